#pragma once

#include <functional>
#include <optional>
#include <utility>

#include "fourier.hpp"
#include "poly.hpp"

namespace moyalks {

enum class Rep { Polynomial, Fourier, Grid };

using PointEval = std::function<Complex(double, double)>;

// Observable in one of three representations. Polynomials carry exact
// rational coefficients; Fourier and grid representations are numeric.
// A grid observable may additionally carry the exact point evaluator it
// was sampled from (indicators, transported fields), which pointwise
// operations prefer over spectral interpolation.
struct Observable {
    PhaseSpace space;
    std::optional<Poly> poly;
    std::optional<TrigPoly> trig;
    std::optional<GridField> grid;
    PointEval fn;

    static Observable from_poly(PhaseSpace s, Poly f) {
        Observable o;
        o.space = std::move(s);
        o.poly = std::move(f);
        return o;
    }
    static Observable from_trig(TrigPoly f) {
        Observable o;
        o.space = f.space();
        o.trig = std::move(f);
        return o;
    }
    static Observable from_grid(GridField f) {
        Observable o;
        o.space = f.space();
        o.grid = std::move(f);
        return o;
    }
    static Observable from_function(const PhaseSpace& s, PointEval f) {
        Observable o;
        o.space = s;
        o.grid = GridField::sample(s, [&](double q, double p) { return f(q, p); });
        o.fn = std::move(f);
        return o;
    }

    Rep rep() const {
        if (poly) return Rep::Polynomial;
        if (trig) return Rep::Fourier;
        return Rep::Grid;
    }

    // numeric evaluation at a point (hbar-free coefficient view for polys)
    Complex eval(double q, double p) const {
        if (poly) return poly->eval(q, p, 0.0);
        if (trig) return trig->eval(q, p);
        if (fn) return fn(q, p);
        throw ConfigError("pointwise evaluation of a raw grid observable; convert to fourier");
    }

    bool has_evaluator() const { return poly.has_value() || trig.has_value() || bool(fn); }

    GridField as_grid() const {
        if (grid) return *grid;
        if (trig) return GridField::from_modes(*trig);
        const Poly& f = *poly;
        return GridField::sample(space, [&](double q, double p) { return f.eval(q, p, 0.0); });
    }

    TrigPoly as_trig(double prune_eps = 1e-13) const {
        if (trig) return *trig;
        if (grid) {
            double scale = grid->max_abs();
            return grid->to_modes(scale * prune_eps);
        }
        throw ConfigError("polynomial observables have no exact fourier series; sample to a grid");
    }

    // normalized Liouville state: (1/area) times the integral of the field
    Complex mean_value(double hbar = 0.0) const {
        if (trig) return trig->mean();
        if (grid) return grid->mean();
        if (space.kind != SpaceKind::PlaneWindow)
            throw ConfigError("polynomial observables integrate over plane windows only");
        auto axis = [](double L, unsigned m) {
            if (m % 2 == 1) return 0.0;
            return 2.0 * std::pow(L / 2, m + 1) / (m + 1);
        };
        Complex total{0.0, 0.0};
        for (const auto& [k, c] : poly->terms())
            total += c.eval(hbar) * (axis(space.Lq, k.first) * axis(space.Lp, k.second));
        return total / space.area();
    }
};

inline void require_same_space(const Observable& f, const Observable& g) {
    if (!(f.space == g.space)) throw ConfigError("observables live on different phase spaces");
}

inline void require_resolved(const GridField& g, double threshold = 1e-8) {
    double frac = g.top_band_energy_fraction();
    if (frac > threshold)
        throw ResolutionError("grid spectrum not resolved: top-band energy fraction " +
                              std::to_string(frac));
}

inline nlohmann::json to_json(const Observable& o) {
    nlohmann::json j;
    j["space"] = to_json(o.space);
    if (o.poly) {
        nlohmann::json terms = nlohmann::json::array();
        for (const auto& [k, c] : o.poly->terms()) {
            if (c.degree() > 0)
                throw ConfigError("cannot serialize hbar-dependent polynomial coefficients");
            Complex z = c.at_zero().to_complex();
            terms.push_back({k.first, k.second, z.real(), z.imag()});
        }
        j["poly"] = std::move(terms);
        return j;
    }
    TrigPoly t = o.as_trig();
    nlohmann::json ms = nlohmann::json::array();
    for (const auto& [k, c] : t.modes()) ms.push_back({k.first, k.second, c.real(), c.imag()});
    j["fourier"] = std::move(ms);
    return j;
}

inline Observable observable_from_json(const nlohmann::json& j, const PhaseSpace& fallback_space) {
    PhaseSpace s = j.contains("space") ? phase_space_from_json(j.at("space")) : fallback_space;
    if (j.contains("poly")) {
        Poly f;
        for (const auto& t : j.at("poly")) {
            if (!t.is_array() || t.size() != 4) throw ConfigError("poly term must be [dq,dp,re,im]");
            unsigned dq = t[0].get<unsigned>(), dp = t[1].get<unsigned>();
            // doubles convert to rationals exactly (dyadic values)
            Rational re(t[2].get<double>()), im(t[3].get<double>());
            f = f + Poly::monomial(dq, dp, HbarPoly(GaussianRational{re, im}));
        }
        return Observable::from_poly(s, std::move(f));
    }
    if (j.contains("fourier")) {
        TrigPoly f(s);
        for (const auto& t : j.at("fourier")) {
            if (!t.is_array() || t.size() != 4)
                throw ConfigError("fourier term must be [a,b,re,im]");
            f.add(t[0].get<int>(), t[1].get<int>(), {t[2].get<double>(), t[3].get<double>()});
        }
        return Observable::from_trig(std::move(f));
    }
    throw ConfigError("observable JSON must contain \"poly\" or \"fourier\"");
}

}  // namespace moyalks
