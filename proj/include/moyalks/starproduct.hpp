#pragma once

#include <cmath>
#include <vector>

#include "geometry.hpp"

namespace moyalks {

struct Hbar {
    double value = 0.0;
    Hbar() = default;
    Hbar(double v) : value(v) {
        if (v < 0.0) throw ConfigError("hbar must be nonnegative");
    }
};

struct StarConfig {
    int truncation_order = 8;  // grid path only
    bool fourier_exact = true;
};

// evaluate hbar-polynomial coefficients at a fixed rational hbar value
inline Poly poly_at_hbar(const Poly& f, const Rational& hbar) {
    Poly r;
    for (const auto& [k, c] : f.terms())
        r = r + Poly::monomial(k.first, k.second, HbarPoly(c.eval(hbar)));
    return r;
}

// exact twisted product on torus modes: modes add, coefficients pick up the
// phase exp(-i hbar S / 2) with S the symplectic cross of the wavenumbers
inline TrigPoly star_trig(const TrigPoly& f, const TrigPoly& g, double hbar) {
    TrigPoly r(f.space());
    for (const auto& [kf, cf] : f.modes())
        for (const auto& [kg, cg] : g.modes()) {
            double S = f.cross(kf, kg);
            r.add(kf.first + kg.first, kf.second + kg.second,
                  cf * cg * std::polar(1.0, -0.5 * hbar * S));
        }
    return r;
}

// per-mode-pair bracket coefficient: -(2/hbar) sin(hbar S / 2), with the
// analytic limit -S at hbar = 0
inline TrigPoly moyal_bracket_trig(const TrigPoly& f, const TrigPoly& g, double hbar) {
    TrigPoly r(f.space());
    for (const auto& [kf, cf] : f.modes())
        for (const auto& [kg, cg] : g.modes()) {
            double S = f.cross(kf, kg);
            double w = hbar > 0.0 ? -(2.0 / hbar) * std::sin(0.5 * hbar * S) : -S;
            if (w != 0.0) r.add(kf.first + kg.first, kf.second + kg.second, w * cf * cg);
        }
    return r;
}

namespace detail {

inline GridField bidiff_term_grid(const std::vector<std::vector<GridField>>& df,
                                  const std::vector<std::vector<GridField>>& dg, int n) {
    GridField acc(df[0][0].space());
    double binom = 1.0;
    for (int m = 0; m <= n; ++m) {
        double sign = (m % 2) ? -1.0 : 1.0;
        acc = acc + df[n - m][m] * dg[m][n - m] * Complex(sign * binom, 0.0);
        binom = binom * double(n - m) / double(m + 1);
    }
    return acc;
}

inline std::vector<std::vector<GridField>> deriv_table(const GridField& f, int order) {
    std::vector<std::vector<GridField>> t(order + 1);
    for (int i = 0; i <= order; ++i) {
        t[i].reserve(order + 1);
        for (int j = 0; j <= order; ++j) t[i].push_back(f.spectral_deriv(i, j));
    }
    return t;
}

}  // namespace detail

// truncated bidifferential series on the grid; cross-validation path
inline GridField star_grid(const GridField& f, const GridField& g, double hbar, int order) {
    auto df = detail::deriv_table(f, order);
    auto dg = detail::deriv_table(g, order);
    GridField acc(f.space());
    Complex pref{1.0, 0.0};
    for (int n = 0; n <= order; ++n) {
        acc = acc + detail::bidiff_term_grid(df, dg, n) * pref;
        pref *= Complex(0.0, 0.5 * hbar) / double(n + 1);
    }
    return acc;
}

inline Observable moyal_product(const Observable& f, const Observable& g, Hbar hbar,
                                const StarConfig& cfg = {}) {
    require_same_space(f, g);
    if (f.poly && g.poly) {
        Poly st = star_poly(*f.poly, *g.poly);
        return Observable::from_poly(f.space, poly_at_hbar(st, Rational(hbar.value)));
    }
    if (f.trig && g.trig && cfg.fourier_exact)
        return Observable::from_trig(star_trig(*f.trig, *g.trig, hbar.value));
    GridField fg = f.as_grid(), gg = g.as_grid();
    require_resolved(fg);
    require_resolved(gg);
    return Observable::from_grid(star_grid(fg, gg, hbar.value, cfg.truncation_order));
}

inline Observable moyal_bracket(const Observable& f, const Observable& g, Hbar hbar,
                                const StarConfig& cfg = {}) {
    require_same_space(f, g);
    if (hbar.value == 0.0) return poisson_bracket(f, g);
    if (f.poly && g.poly) {
        Poly mb = moyal_bracket_poly(*f.poly, *g.poly);
        return Observable::from_poly(f.space, poly_at_hbar(mb, Rational(hbar.value)));
    }
    if (f.trig && g.trig && cfg.fourier_exact)
        return Observable::from_trig(moyal_bracket_trig(*f.trig, *g.trig, hbar.value));
    GridField fg = f.as_grid(), gg = g.as_grid();
    require_resolved(fg);
    require_resolved(gg);
    GridField comm = star_grid(fg, gg, hbar.value, cfg.truncation_order) -
                     star_grid(gg, fg, hbar.value, cfg.truncation_order);
    return Observable::from_grid(comm * (Complex(0.0, -1.0) / hbar.value));
}

inline double l2_norm(const Observable& f) {
    if (f.poly) {
        double L = f.space.kind == SpaceKind::PlaneWindow ? f.space.Lq / 2.0 : f.space.Lq;
        return f.poly->l2_window(0.0, L);
    }
    if (f.trig) return f.trig->l2();
    return f.grid->l2();
}

// least-squares slope of log deviation-from-Poisson against log hbar;
// 2.0 for generic smooth pairs. Exactly classical pairs are rejected.
inline double classical_limit_fit(const Observable& f, const Observable& g,
                                  const std::vector<double>& hbar_grid,
                                  const StarConfig& cfg = {}) {
    if (hbar_grid.size() < 3) throw ConfigError("classical-limit fit needs at least 3 hbar values");
    double lo = *std::min_element(hbar_grid.begin(), hbar_grid.end());
    double hi = *std::max_element(hbar_grid.begin(), hbar_grid.end());
    if (!(lo > 0.0)) throw ConfigError("hbar grid must be strictly positive");
    if (std::log10(hi / lo) < 1.5) throw ConfigError("hbar grid must span at least 1.5 decades");

    Observable classical = poisson_bracket(f, g);
    double ref = std::max(1.0, l2_norm(classical));
    std::vector<double> lx, ly;
    for (double hb : hbar_grid) {
        Observable quantum = moyal_bracket(f, g, Hbar(hb), cfg);
        double dev;
        if (quantum.poly && classical.poly)
            dev = l2_norm(Observable::from_poly(f.space, *quantum.poly - *classical.poly));
        else if (quantum.trig && classical.trig)
            dev = (*quantum.trig - *classical.trig).l2();
        else
            dev = (quantum.as_grid() - classical.as_grid()).l2();
        if (dev > 1e-13 * ref) {
            lx.push_back(std::log(hb));
            ly.push_back(std::log(dev));
        }
    }
    if (lx.size() < hbar_grid.size())
        throw DegenerateFitError("bracket deviation vanishes; pair is exactly classical");
    double n = double(lx.size()), sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (size_t i = 0; i < lx.size(); ++i) {
        sx += lx[i];
        sy += ly[i];
        sxx += lx[i] * lx[i];
        sxy += lx[i] * ly[i];
    }
    return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

// polynomial point map (q, p) -> (X(q,p), Y(q,p)); exact composition engine
struct PolyMap {
    Poly X, Y;
    static PolyMap translation(const Rational& a, const Rational& b) {
        return {Poly::q() + Poly::constant(HbarPoly(GaussianRational(a))),
                Poly::p() + Poly::constant(HbarPoly(GaussianRational(b)))};
    }
    static PolyMap linear(long m00, long m01, long m10, long m11) {
        return {Poly::q() * HbarPoly(m00) + Poly::p() * HbarPoly(m01),
                Poly::q() * HbarPoly(m10) + Poly::p() * HbarPoly(m11)};
    }
    Poly pull_back(const Poly& f) const { return f.compose(X, Y); }
};

// Compares the deformed bracket of a composed pair against the composed
// bracket, exactly in the polynomial calculus, then reports the largest
// pointwise residual on a window lattice. Detects maps that preserve the
// Poisson structure but not its hbar deformation.
inline MembershipResult quantum_symplectic_check(
    const PolyMap& phi, Hbar hbar, const std::vector<std::pair<Poly, Poly>>& test_set,
    double tol, double window = 2.0, int lattice = 9) {
    MembershipResult res;
    Rational hb(hbar.value);
    for (const auto& [f, g] : test_set) {
        Poly lhs = phi.pull_back(moyal_bracket_poly(f, g));
        Poly rhs = moyal_bracket_poly(phi.pull_back(f), phi.pull_back(g));
        Poly r = poly_at_hbar(lhs - rhs, hb);
        if (r.is_zero()) continue;
        for (int j = 0; j < lattice; ++j)
            for (int l = 0; l < lattice; ++l) {
                double q = -window + 2.0 * window * j / (lattice - 1);
                double p = -window + 2.0 * window * l / (lattice - 1);
                res.max_residual = std::max(res.max_residual, std::abs(r.eval(q, p, 0.0)));
            }
    }
    res.member = res.max_residual < tol;
    return res;
}

// flat-space deformed volume: the Liouville measure, unchanged
inline MeasureDescriptor moyal_measure(const PhaseSpace& s, Hbar) { return liouville_measure(s); }

// trace diagnostic: the mean of f*g should equal the mean of f g
inline double star_trace_defect(const TrigPoly& f, const TrigPoly& g, Hbar hbar) {
    return std::abs(star_trig(f, g, hbar.value).mean() - (f * g).mean());
}

}  // namespace moyalks
