#include <catch2/catch_amalgamated.hpp>

#include "moyalks/geometry.hpp"

using namespace moyalks;

namespace {
Observable poly_obs(const PhaseSpace& s, const Poly& f) { return Observable::from_poly(s, f); }
}  // namespace

TEST_CASE("poisson bracket of canonical pair and self-bracket", "[geometry]") {
    PhaseSpace s = plane_window(4.0, 32);
    Observable q = poly_obs(s, Poly::q()), p = poly_obs(s, Poly::p());
    Observable one = poisson_bracket(q, p);
    REQUIRE(*one.poly == Poly::constant(HbarPoly(1)));
    Observable H = poly_obs(s, Poly::monomial(2, 0) + Poly::monomial(0, 2));
    REQUIRE(poisson_bracket(H, H).poly->is_zero());
    Observable v = poisson_bracket(poly_obs(s, Poly::monomial(2, 0)),
                                   poly_obs(s, Poly::monomial(0, 2)));
    REQUIRE(*v.poly == Poly::q() * Poly::p() * HbarPoly(4));
}

TEST_CASE("fourier poisson bracket matches pointwise derivative formula", "[geometry]") {
    PhaseSpace s = torus_2pi(64);
    Observable f = Observable::from_trig(TrigPoly::cos_q(s));
    Observable g = Observable::from_trig(TrigPoly::cos_p(s));
    Observable br = poisson_bracket(f, g);
    // {cos q, cos p} = sin q sin p
    for (double q : {0.3, 1.7, 4.4})
        for (double p : {0.9, 5.1}) {
            double want = std::sin(q) * std::sin(p);
            REQUIRE(std::abs(br.trig->eval(q, p) - Complex(want, 0)) < 1e-13);
        }
}

TEST_CASE("grid poisson bracket agrees with the mode path", "[geometry]") {
    PhaseSpace s = torus_2pi(64);
    TrigPoly f = TrigPoly::cos_q(s) + TrigPoly::sin_p(s);
    TrigPoly g = TrigPoly::sin_q(s) * TrigPoly::cos_p(s);
    Observable mode_path = poisson_bracket(Observable::from_trig(f), Observable::from_trig(g));
    Observable grid_path = poisson_bracket(Observable::from_grid(GridField::from_modes(f)),
                                           Observable::from_grid(GridField::from_modes(g)));
    GridField want = GridField::from_modes(*mode_path.trig);
    double err = (grid_path.as_grid() - want).max_abs();
    REQUIRE(err < 1e-11);
}

TEST_CASE("hamiltonian vector field components", "[geometry]") {
    PhaseSpace s = plane_window(6.0, 32);
    Poly H = (Poly::monomial(2, 0) + Poly::monomial(0, 2)) * HbarPoly(GaussianRational{rat(1, 2), rat(0)});
    auto v = hamiltonian_vector_field(poly_obs(s, H), 1.0, 0.0);
    REQUIRE(v[0] == Catch::Approx(0.0).margin(1e-15));
    REQUIRE(v[1] == Catch::Approx(-1.0));
    auto c = hamiltonian_vector_field(poly_obs(s, Poly::constant(HbarPoly(7))), 0.3, -0.2);
    REQUIRE(c[0] == 0.0);
    REQUIRE(c[1] == 0.0);
    auto free = hamiltonian_vector_field(poly_obs(s, Poly::p()), 2.0, 3.0);
    REQUIRE(free[0] == Catch::Approx(1.0));
    REQUIRE(free[1] == Catch::Approx(0.0).margin(1e-15));
}

TEST_CASE("liouville measure is the area with unit density", "[geometry]") {
    MeasureDescriptor m = liouville_measure(torus_2pi(32));
    REQUIRE(m.density == 1.0);
    REQUIRE(m.total_mass == Catch::Approx(two_pi * two_pi));
    MeasureDescriptor unit = liouville_measure({SpaceKind::PlaneWindow, 1.0, 1.0, 32, 32, 1.0});
    REQUIRE(unit.total_mass == Catch::Approx(1.0));
    MeasureDescriptor prob = m.normalized(two_pi * two_pi);
    REQUIRE(prob.total_mass == 1.0);
    REQUIRE(prob.density == Catch::Approx(1.0 / (two_pi * two_pi)));
}

TEST_CASE("symplectic membership of translations and linear maps", "[geometry]") {
    PhaseSpace s = torus_2pi(32);
    std::vector<std::pair<Observable, Observable>> pairs;
    pairs.emplace_back(poly_obs(s, Poly::q()), poly_obs(s, Poly::p()));
    pairs.emplace_back(poly_obs(s, Poly::monomial(2, 0)), poly_obs(s, Poly::monomial(0, 2)));

    PointMapFn shift = [](double q, double p) { return std::array<double, 2>{q + 0.7, p - 1.3}; };
    auto r1 = symplectic_check(shift, pairs, 1e-10, s);
    REQUIRE(r1.member);
    REQUIRE(r1.max_residual < 1e-10);

    PointMapFn cat = [](double q, double p) {
        return std::array<double, 2>{2 * q + p, q + p};
    };
    auto r2 = symplectic_check(cat, pairs, 1e-8, s);
    REQUIRE(r2.member);

    PointMapFn scale = [](double q, double p) { return std::array<double, 2>{2 * q, 2 * p}; };
    PhaseSpace w = plane_window(2.0, 32);
    std::vector<std::pair<Observable, Observable>> qp;
    qp.emplace_back(poly_obs(w, Poly::q()), poly_obs(w, Poly::p()));
    auto r3 = symplectic_check(scale, qp, 1e-8, w);
    REQUIRE_FALSE(r3.member);
    // {q.phi, p.phi} = 4{q,p}; defect is 3 |{q,p}| = 3
    REQUIRE(r3.max_residual == Catch::Approx(3.0).epsilon(1e-6));
}
