#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "moyalks/starproduct.hpp"

using namespace moyalks;

TEST_CASE("moyal product of polynomials at fixed hbar", "[star]") {
    PhaseSpace s = plane_window(4.0, 32);
    Observable q = Observable::from_poly(s, Poly::q());
    Observable p = Observable::from_poly(s, Poly::p());
    Observable qp = moyal_product(q, p, Hbar(0.5));
    // q * p at hbar 1/2: qp + i/4, exactly (dyadic hbar)
    Poly want = Poly::q() * Poly::p() +
                Poly::constant(HbarPoly(GaussianRational{rat(0), rat(1, 4)}));
    REQUIRE(*qp.poly == want);
    // unit of the algebra
    Observable one = Observable::from_poly(s, Poly::constant(HbarPoly(1)));
    Observable f = Observable::from_poly(s, Poly::monomial(2, 1) + Poly::monomial(0, 3));
    REQUIRE(*moyal_product(f, one, Hbar(0.7)).poly == *f.poly);
    // hbar = 0 reduces to the pointwise product
    REQUIRE(*moyal_product(q, p, Hbar(0.0)).poly == Poly::q() * Poly::p());
}

TEST_CASE("twisted mode product matches the truncated grid series", "[star]") {
    PhaseSpace s = torus_2pi(32);
    double hbar = 0.3;
    TrigPoly f(s), g(s);
    f.add(1, 0, {0.5, 0.0});
    f.add(-1, 0, {0.5, 0.0});
    f.add(2, 1, {0.0, 0.25});
    f.add(-2, -1, {0.0, -0.25});
    g.add(0, 1, {0.5, 0.0});
    g.add(0, -1, {0.5, 0.0});
    g.add(1, -1, {0.2, 0.0});
    g.add(-1, 1, {0.2, 0.0});
    TrigPoly exact = star_trig(f, g, hbar);
    GridField series =
        star_grid(GridField::from_modes(f), GridField::from_modes(g), hbar, 14);
    double err = (series - GridField::from_modes(exact)).max_abs();
    REQUIRE(err < 1e-11);
    // truncation error decreases with even order on the smooth pair
    double prev = 1e300;
    for (int order : {2, 4, 6, 8}) {
        GridField trunc =
            star_grid(GridField::from_modes(f), GridField::from_modes(g), hbar, order);
        double e = (trunc - GridField::from_modes(exact)).max_abs();
        REQUIRE(e < prev);
        prev = e;
    }
}

TEST_CASE("mode bracket reduces to poisson as hbar vanishes", "[star]") {
    PhaseSpace s = torus_2pi(32);
    TrigPoly f = TrigPoly::cos_q(s), g = TrigPoly::cos_p(s);
    TrigPoly classical = poisson_trig(f, g);
    double prev = 1e300;
    for (double hb : {0.4, 0.04, 0.004}) {
        double dev = (moyal_bracket_trig(f, g, hb) - classical).l2();
        REQUIRE(dev < prev);
        REQUIRE(dev < 0.3 * hb * hb * 10);
        prev = dev;
    }
    // hbar = 0 is routed analytically, not by a limit
    REQUIRE((moyal_bracket_trig(f, g, 0.0) - classical).l2() == 0.0);
}

TEST_CASE("classical limit slope is two for generic pairs", "[star]") {
    PhaseSpace s = plane_window(4.0, 64);
    std::vector<double> grid;
    for (double hb = 1e-3; hb < 0.11; hb *= std::sqrt(10.0)) grid.push_back(hb);
    Observable f = Observable::from_poly(s, Poly::monomial(3, 0));
    Observable g = Observable::from_poly(s, Poly::monomial(0, 3));
    double slope = classical_limit_fit(f, g, grid);
    REQUIRE(slope == Catch::Approx(2.0).margin(0.05));

    PhaseSpace t = torus_2pi(64);
    Observable fc = Observable::from_trig(TrigPoly::cos_q(t));
    Observable gc = Observable::from_trig(TrigPoly::cos_p(t));
    double slope2 = classical_limit_fit(fc, gc, grid);
    REQUIRE(slope2 == Catch::Approx(2.0).margin(0.1));

    Observable f2 = Observable::from_poly(s, Poly::monomial(2, 0));
    Observable g2 = Observable::from_poly(s, Poly::monomial(0, 2));
    REQUIRE_THROWS_AS(classical_limit_fit(f2, g2, grid), DegenerateFitError);
}

TEST_CASE("quantum symplectic membership separates linear from cubic maps", "[star]") {
    std::vector<std::pair<Poly, Poly>> pairs;
    pairs.emplace_back(Poly::q(), Poly::p());
    pairs.emplace_back(Poly::monomial(2, 0), Poly::monomial(0, 2));
    pairs.emplace_back(Poly::monomial(0, 3), Poly::monomial(2, 1));
    pairs.emplace_back(Poly::monomial(1, 3), Poly::monomial(3, 1));

    for (double hb : {0.1, 0.5, 1.0}) {
        auto tr = quantum_symplectic_check(PolyMap::translation(rat(1, 2), rat(-2, 3)),
                                           Hbar(hb), pairs, 1e-12);
        REQUIRE(tr.member);
        REQUIRE(tr.max_residual == 0.0);
        auto cat = quantum_symplectic_check(PolyMap::linear(2, 1, 1, 1), Hbar(hb), pairs, 1e-12);
        REQUIRE(cat.member);
        REQUIRE(cat.max_residual == 0.0);
    }

    // cubic shear (q,p) -> (q, p + q^3): classical symplectomorphism but not a
    // member of the deformed group; quadratic pairs alone cannot detect it
    PolyMap shear{Poly::q(), Poly::p() + Poly::monomial(3, 0)};
    std::vector<std::pair<Poly, Poly>> quadratic;
    quadratic.emplace_back(Poly::monomial(2, 0), Poly::monomial(0, 2));
    auto blind = quantum_symplectic_check(shear, Hbar(0.5), quadratic, 1e-12);
    REQUIRE(blind.member);
    REQUIRE(blind.max_residual == 0.0);
    auto seen = quantum_symplectic_check(shear, Hbar(0.5), pairs, 1e-9);
    REQUIRE_FALSE(seen.member);
    // residual scales like hbar^2
    auto seen_small = quantum_symplectic_check(shear, Hbar(0.05), pairs, 1e-9);
    double ratio = seen.max_residual / seen_small.max_residual;
    REQUIRE(ratio == Catch::Approx(100.0).epsilon(0.05));
}

TEST_CASE("flat moyal measure keeps the liouville data and trace property", "[star]") {
    PhaseSpace s = torus_2pi(32);
    MeasureDescriptor m0 = moyal_measure(s, Hbar(0.0));
    MeasureDescriptor ml = liouville_measure(s);
    REQUIRE(m0.density == ml.density);
    REQUIRE(m0.total_mass == ml.total_mass);
    MeasureDescriptor m3 = moyal_measure(s, Hbar(0.3));
    REQUIRE(m3.total_mass == Catch::Approx(two_pi * two_pi));

    std::mt19937_64 rng(5);
    std::uniform_int_distribution<int> mode(-3, 3);
    std::uniform_real_distribution<double> amp(-1.0, 1.0);
    for (int trial = 0; trial < 10; ++trial) {
        TrigPoly f(s), g(s);
        for (int k = 0; k < 4; ++k) {
            int a = mode(rng), b = mode(rng);
            double re = amp(rng), im = amp(rng);
            f.add(a, b, {re, im});
            f.add(-a, -b, {re, -im});
            a = mode(rng);
            b = mode(rng);
            re = amp(rng);
            im = amp(rng);
            g.add(a, b, {re, im});
            g.add(-a, -b, {re, -im});
        }
        REQUIRE(star_trace_defect(f, g, Hbar(0.37)) < 1e-10);
    }
}
