#pragma once

#include <cmath>
#include <nlohmann/json.hpp>
#include <numbers>
#include <string>

#include "errors.hpp"

namespace moyalks {

inline constexpr double two_pi = 2.0 * std::numbers::pi;

enum class SpaceKind { PlaneWindow, Torus };

// Flat 2-D phase space with the standard form dq^dp. The torus has coordinates
// in [0,Lq) x [0,Lp); the plane window is the centered box [-Lq/2, Lq/2) x
// [-Lp/2, Lp/2) treated as periodic for spectral work.
struct PhaseSpace {
    SpaceKind kind = SpaceKind::Torus;
    double Lq = two_pi;
    double Lp = two_pi;
    int Nq = 128;
    int Np = 128;
    double form_coefficient = 1.0;

    void validate() const {
        if (!(Lq > 0.0) || !(Lp > 0.0)) throw ConfigError("phase space extents must be positive");
        if (Nq < 8 || Np < 8 || Nq % 2 || Np % 2)
            throw ConfigError("grid sizes must be even and at least 8");
        if (form_coefficient != 1.0) throw ConfigError("only the standard form dq^dp is supported");
    }

    double area() const { return Lq * Lp; }
    double q0() const { return kind == SpaceKind::Torus ? 0.0 : -Lq / 2.0; }
    double p0() const { return kind == SpaceKind::Torus ? 0.0 : -Lp / 2.0; }
    double grid_q(int j) const { return q0() + Lq * j / Nq; }
    double grid_p(int l) const { return p0() + Lp * l / Np; }
    // angular wavenumbers of the Fourier mode (a, b)
    double alpha(int a) const { return two_pi * a / Lq; }
    double beta(int b) const { return two_pi * b / Lp; }

    double wrap_q(double q) const {
        double r = std::fmod(q - q0(), Lq);
        if (r < 0) r += Lq;
        return r + q0();
    }
    double wrap_p(double p) const {
        double r = std::fmod(p - p0(), Lp);
        if (r < 0) r += Lp;
        return r + p0();
    }

    friend bool operator==(const PhaseSpace& a, const PhaseSpace& b) {
        return a.kind == b.kind && a.Lq == b.Lq && a.Lp == b.Lp && a.Nq == b.Nq && a.Np == b.Np;
    }
};

enum class Normalization { Raw, Probability };

// Constant-density measure on a flat space. density is the constant value of
// the density function; the symplectic volume has density 1.
struct MeasureDescriptor {
    double density = 1.0;
    double total_mass = 1.0;
    Normalization normalization = Normalization::Raw;

    MeasureDescriptor normalized(double space_area) const {
        return {1.0 / space_area, 1.0, Normalization::Probability};
    }
};

inline std::string kind_name(SpaceKind k) {
    return k == SpaceKind::Torus ? "torus" : "plane-window";
}

inline SpaceKind kind_from_name(const std::string& s) {
    if (s == "torus") return SpaceKind::Torus;
    if (s == "plane-window" || s == "plane") return SpaceKind::PlaneWindow;
    throw ConfigError("unknown phase-space kind: " + s);
}

inline nlohmann::json to_json(const PhaseSpace& s) {
    return {{"kind", kind_name(s.kind)}, {"Lq", s.Lq}, {"Lp", s.Lp}, {"Nq", s.Nq}, {"Np", s.Np}};
}

inline PhaseSpace phase_space_from_json(const nlohmann::json& j) {
    PhaseSpace s;
    s.kind = kind_from_name(j.at("kind").get<std::string>());
    s.Lq = j.at("Lq").get<double>();
    s.Lp = j.at("Lp").get<double>();
    s.Nq = j.value("Nq", 128);
    s.Np = j.value("Np", 128);
    s.validate();
    return s;
}

inline PhaseSpace torus_2pi(int N = 128) { return {SpaceKind::Torus, two_pi, two_pi, N, N, 1.0}; }
inline PhaseSpace unit_torus(int N = 128) { return {SpaceKind::Torus, 1.0, 1.0, N, N, 1.0}; }
inline PhaseSpace plane_window(double L, int N = 128) {
    return {SpaceKind::PlaneWindow, L, L, N, N, 1.0};
}

}  // namespace moyalks
