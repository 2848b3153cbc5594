#pragma once

#include <array>
#include <functional>

#include "observable.hpp"

namespace moyalks {

using PointMapFn = std::function<std::array<double, 2>(double, double)>;

inline TrigPoly poisson_trig(const TrigPoly& f, const TrigPoly& g) {
    TrigPoly r(f.space());
    for (const auto& [kf, cf] : f.modes())
        for (const auto& [kg, cg] : g.modes()) {
            double S = f.cross(kf, kg);
            if (S != 0.0) r.add(kf.first + kg.first, kf.second + kg.second, -S * cf * cg);
        }
    return r;
}

inline GridField poisson_grid(const GridField& f, const GridField& g) {
    return f.spectral_deriv(1, 0) * g.spectral_deriv(0, 1) -
           f.spectral_deriv(0, 1) * g.spectral_deriv(1, 0);
}

inline Observable poisson_bracket(const Observable& f, const Observable& g) {
    require_same_space(f, g);
    if (f.poly && g.poly) return Observable::from_poly(f.space, poisson_poly(*f.poly, *g.poly));
    if (f.trig && g.trig) return Observable::from_trig(poisson_trig(*f.trig, *g.trig));
    GridField fg = f.as_grid(), gg = g.as_grid();
    require_resolved(fg);
    require_resolved(gg);
    return Observable::from_grid(poisson_grid(fg, gg));
}

// components of the Hamiltonian vector field: (dq/dt, dp/dt) = (dH/dp, -dH/dq)
inline std::array<double, 2> hamiltonian_vector_field(const Observable& H, double q, double p) {
    if (H.poly) {
        return {H.poly->deriv(0, 1).eval(q, p, 0.0).real(),
                -H.poly->deriv(1, 0).eval(q, p, 0.0).real()};
    }
    TrigPoly t = H.as_trig();
    return {t.deriv_p().eval(q, p).real(), -t.deriv_q().eval(q, p).real()};
}

inline MeasureDescriptor liouville_measure(const PhaseSpace& s) {
    s.validate();
    return {1.0, s.area(), Normalization::Raw};
}

struct MembershipResult {
    bool member = false;
    double max_residual = 0.0;
};

namespace detail {

// central-difference Jacobian of a point map, using minimal-image differences
// so torus wrap jumps do not pollute the derivative
inline std::array<double, 4> fd_jacobian(const PointMapFn& phi, double q, double p,
                                         const PhaseSpace& s) {
    double hq = 1e-4 * s.Lq, hp = 1e-4 * s.Lp;
    auto delta = [&](const std::array<double, 2>& a, const std::array<double, 2>& b) {
        double dq = a[0] - b[0], dp = a[1] - b[1];
        if (s.kind == SpaceKind::Torus) {
            dq -= s.Lq * std::round(dq / s.Lq);
            dp -= s.Lp * std::round(dp / s.Lp);
        }
        return std::array<double, 2>{dq, dp};
    };
    auto dq = delta(phi(q + hq, p), phi(q - hq, p));
    auto dp = delta(phi(q, p + hp), phi(q, p - hp));
    return {dq[0] / (2 * hq), dp[0] / (2 * hp), dq[1] / (2 * hq), dp[1] / (2 * hp)};
}

inline std::array<double, 2> gradient(const Observable& f, double q, double p) {
    if (f.poly)
        return {f.poly->deriv(1, 0).eval(q, p, 0.0).real(),
                f.poly->deriv(0, 1).eval(q, p, 0.0).real()};
    TrigPoly t = f.as_trig();
    return {t.deriv_q().eval(q, p).real(), t.deriv_p().eval(q, p).real()};
}

}  // namespace detail

// Measures how far a point map is from preserving brackets: compares
// {f,g} evaluated at the image against the bracket of the pulled-back pair
// computed through the map's Jacobian, over a deterministic sample lattice.
inline MembershipResult symplectic_check(
    const PointMapFn& phi, const std::vector<std::pair<Observable, Observable>>& test_set,
    double tol, const PhaseSpace& s, int lattice = 16) {
    MembershipResult res;
    for (int j = 0; j < lattice; ++j)
        for (int l = 0; l < lattice; ++l) {
            double q = s.q0() + s.Lq * (j + 0.37) / lattice;
            double p = s.p0() + s.Lp * (l + 0.61) / lattice;
            auto J = detail::fd_jacobian(phi, q, p, s);
            auto y = phi(q, p);
            for (const auto& [f, g] : test_set) {
                auto gf = detail::gradient(f, y[0], y[1]);
                auto gg = detail::gradient(g, y[0], y[1]);
                // {f.phi, g.phi}(x) = grad f . (J Omega J^T) grad g at phi(x)
                double m01 = J[0] * J[3] - J[1] * J[2];
                double rhs = gf[0] * m01 * gg[1] - gf[1] * m01 * gg[0];
                double lhs = gf[0] * gg[1] - gf[1] * gg[0];
                res.max_residual = std::max(res.max_residual, std::abs(lhs - rhs));
            }
        }
    res.member = res.max_residual < tol;
    return res;
}

}  // namespace moyalks
