#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "moyalks/flow.hpp"

using namespace moyalks;

namespace {

Poly harmonic_poly() {
    return Poly::monomial(2, 0, HbarPoly(rat(1, 2))) + Poly::monomial(0, 2, HbarPoly(rat(1, 2)));
}

TrigPoly smooth_field(const PhaseSpace& s) {
    TrigPoly f(s);
    f.add(1, 0, {0.5, 0.0});
    f.add(-1, 0, {0.5, 0.0});
    f.add(0, 1, {0.0, 0.3});
    f.add(0, -1, {0.0, -0.3});
    f.add(1, -1, {0.2, 0.1});
    f.add(-1, 1, {0.2, -0.1});
    return f;
}

}  // namespace

TEST_CASE("closed-form quadratic flow maps", "[flow]") {
    PhaseSpace s = plane_window(6.0, 32);
    auto rotation = time_one_map(
        FlowSpec::autonomous(s, Observable::from_poly(s, harmonic_poly())));
    auto x = rotation.point_map()(1.0, 0.0);
    REQUIRE(x[0] == Catch::Approx(std::cos(1.0)).margin(1e-12));
    REQUIRE(x[1] == Catch::Approx(-std::sin(1.0)).margin(1e-12));

    auto squeeze = time_one_map(
        FlowSpec::autonomous(s, Observable::from_poly(s, Poly::q() * Poly::p())));
    auto y = squeeze.point_map()(0.5, 2.0);
    REQUIRE(y[0] == Catch::Approx(0.5 * std::exp(1.0)).margin(1e-12));
    REQUIRE(y[1] == Catch::Approx(2.0 * std::exp(-1.0)).margin(1e-12));

    auto translate = time_one_map(FlowSpec::autonomous(s, Observable::from_poly(s, Poly::p())));
    auto z = translate.point_map()(0.25, -1.0);
    REQUIRE(z[0] == Catch::Approx(1.25).margin(1e-14));
    REQUIRE(z[1] == Catch::Approx(-1.0).margin(1e-14));
}

TEST_CASE("harmonic transport is a rigid rotation", "[flow]") {
    PhaseSpace s = plane_window(8.0, 32);
    TrigPoly f(s);
    f.add(1, 0, {0.4, 0.0});
    f.add(-1, 0, {0.4, 0.0});
    f.add(2, 1, {0.1, 0.2});
    f.add(-2, -1, {0.1, -0.2});
    Observable obs = Observable::from_trig(f);
    FlowSpec spec = FlowSpec::autonomous(s, Observable::from_poly(s, harmonic_poly()));

    EvolvedField full = liouville_step(obs, spec, two_pi);
    REQUIRE((full.field.as_grid() - GridField::from_modes(f)).max_abs() < 1e-8);

    EvolvedField quarter = liouville_step(obs, spec, two_pi / 4);
    GridField g = quarter.field.as_grid();
    for (int j = 0; j < s.Nq; j += 7)
        for (int l = 0; l < s.Np; l += 5) {
            Complex want = f.eval(-s.grid_p(l), s.grid_q(j));
            REQUIRE(std::abs(g.at(j, l) - want) < 1e-12);
        }

    EvolvedField two = liouville_step(quarter.field, spec, two_pi / 4);
    EvolvedField half = liouville_step(obs, spec, two_pi / 2);
    REQUIRE((two.field.as_grid() - half.field.as_grid()).max_abs() < 1e-12);
}

TEST_CASE("free drift shears indicators and preserves area", "[flow]") {
    PhaseSpace s = torus_2pi(64);
    auto box = [](double q, double p) {
        return Complex{(q >= 1.0 && q < 3.0 && p >= 0.5 && p < 2.5) ? 1.0 : 0.0, 0.0};
    };
    Observable sq = Observable::from_function(s, box);
    FlowSpec spec = FlowSpec::autonomous(
        s, Observable::from_poly(s, Poly::monomial(0, 2, HbarPoly(rat(1, 2)))));
    EvolvedField ev = liouville_step(sq, spec, 1.0);

    REQUIRE(ev.negativity_mass == 0.0);
    REQUIRE(std::abs(ev.field.mean_value() - sq.mean_value()) < 1e-12);
    GridField g = ev.field.as_grid();
    for (int j = 0; j < s.Nq; ++j)
        for (int l = 0; l < s.Np; ++l) {
            Complex want = box(s.wrap_q(s.grid_q(j) - s.grid_p(l)), s.grid_p(l));
            REQUIRE(g.at(j, l) == want);
        }
}

TEST_CASE("kicked time-one point map is the standard map", "[flow]") {
    PhaseSpace s = torus_2pi(32);
    double strength = 3.0;
    FlowSpec spec = FlowSpec::kicked_flow(s, kicked_rotor(s, strength), Hbar(0.0),
                                          Scheme::SemiLagrangianDensity);
    auto phi = time_one_map(spec).point_map();
    std::mt19937_64 rng(11);
    std::uniform_real_distribution<double> u(0.0, two_pi);
    for (int i = 0; i < 1000; ++i) {
        double q = u(rng), p = u(rng);
        auto x = phi(q, p);
        double pp = p + strength * std::sin(q);
        REQUIRE(std::abs(x[1] - pp) < 1e-9);
        REQUIRE(std::abs(x[0] - (q + pp)) < 1e-9);
    }

    // round trip through the inverse characteristics is exact
    Observable f = Observable::from_trig(smooth_field(s));
    auto tm = time_one_map(spec);
    EvolvedField fwd = tm.forward(f);
    EvolvedField back = tm.pull_back(fwd.field);
    REQUIRE((back.field.as_grid() - f.as_grid()).max_abs() < 1e-13);
}

TEST_CASE("kicked propagator at hbar zero matches classical transport", "[flow]") {
    PhaseSpace s = torus_2pi(64);
    Observable f = Observable::from_trig(smooth_field(s));
    FlowSpec cls = FlowSpec::kicked_flow(s, kicked_rotor(s, 0.5), Hbar(0.0),
                                         Scheme::SemiLagrangianDensity);
    FlowSpec qm = cls;
    qm.scheme = Scheme::SplitStepMoyal;
    EvolvedField a = liouville_step(f, cls, 1.0);
    EvolvedField b = moyal_step(f, qm, 1.0);
    REQUIRE((a.field.as_grid() - b.field.as_grid()).max_abs() < 1e-9);
}

TEST_CASE("quadratic hamiltonians evolve identically at every hbar", "[flow]") {
    PhaseSpace s = plane_window(8.0, 32);
    TrigPoly f(s);
    f.add(1, 2, {0.3, -0.1});
    f.add(-1, -2, {0.3, 0.1});
    Observable obs = Observable::from_trig(f);
    FlowSpec cls = FlowSpec::autonomous(s, Observable::from_poly(s, harmonic_poly()));
    GridField classical = liouville_step(obs, cls, 0.8).field.as_grid();
    for (double hb : {0.01, 0.1, 0.5, 1.0}) {
        FlowSpec qm = FlowSpec::autonomous(s, Observable::from_poly(s, harmonic_poly()),
                                           Hbar(hb), Scheme::SplitStepMoyal);
        GridField quantum = moyal_step(obs, qm, 0.8).field.as_grid();
        REQUIRE((quantum - classical).max_abs() == 0.0);
    }
}

TEST_CASE("kick integration self-converges under step refinement", "[flow]") {
    PhaseSpace s = torus_2pi(64);
    Observable f = Observable::from_trig(smooth_field(s));
    FlowSpec exact = FlowSpec::kicked_flow(s, kicked_rotor(s, 1.5), Hbar(0.1),
                                           Scheme::SplitStepMoyal);
    FlowSpec coarse = exact;
    coarse.scheme = Scheme::Rk4Moyal;
    FlowSpec fine = coarse;
    fine.with_steps(6400);
    GridField ge = moyal_step(f, exact, 1.0).field.as_grid();
    GridField gc = moyal_step(f, coarse, 1.0).field.as_grid();
    GridField gf = moyal_step(f, fine, 1.0).field.as_grid();
    REQUIRE((gc - gf).l2() < 1e-6);
    REQUIRE((ge - gf).l2() < 1e-6);
}

TEST_CASE("time-one map composition matches direct evolution", "[flow]") {
    PhaseSpace s = torus_2pi(64);
    Observable f = Observable::from_trig(smooth_field(s));
    FlowSpec spec = FlowSpec::kicked_flow(s, kicked_rotor(s, 2.0), Hbar(0.2),
                                          Scheme::SplitStepMoyal);
    GridField twice = time_one_map(spec).forward(f, 2).field.as_grid();
    GridField direct = moyal_step(f, spec, 2.0).field.as_grid();
    REQUIRE((twice - direct).max_abs() == 0.0);
}

TEST_CASE("flat state is invariant under the flows", "[flow]") {
    PhaseSpace s = torus_2pi(64);
    Observable f = Observable::from_trig(smooth_field(s));
    FlowSpec kicked = FlowSpec::kicked_flow(s, kicked_rotor(s, 10.0), Hbar(0.1),
                                            Scheme::SplitStepMoyal);
    REQUIRE(state_invariance_check(kicked, f, 5.0) < 1e-8);

    PhaseSpace w = plane_window(12.0, 64);
    Observable blob = Observable::from_function(w, [](double q, double p) {
        return Complex{std::exp(-(q * q + 2.0 * p * p)), 0.0};
    });
    FlowSpec rot = FlowSpec::autonomous(w, Observable::from_poly(w, harmonic_poly()));
    REQUIRE(state_invariance_check(rot, blob, 3.0) < 1e-10);

    FlowSpec none;
    none.space = w;
    REQUIRE(state_invariance_check(none, blob, 7.0) == 0.0);
}

TEST_CASE("cubic hamiltonian matches the exact mode solution", "[flow]") {
    PhaseSpace s = plane_window(4.0, 64);
    double hb = 0.3, t = 0.25;
    TrigPoly f(s);
    f.add(1, 1, {0.5, 0.0});
    f.add(-1, -1, {0.5, 0.0});
    f.add(2, -1, {0.0, 0.2});
    f.add(-2, 1, {0.0, -0.2});
    f.add(0, 2, {0.3, 0.0});
    f.add(0, -2, {0.3, 0.0});
    FlowSpec spec = FlowSpec::autonomous(s, Observable::from_poly(s, Poly::monomial(3, 0)),
                                         Hbar(hb), Scheme::Rk4Moyal);
    GridField num = moyal_step(Observable::from_trig(f), spec, t).field.as_grid();

    // d/dt picks up i(3 q^2 beta + hbar^2 beta^3 / 4) per p-frequency at fixed q
    GridField oracle = GridField::sample(s, [&](double q, double p) {
        Complex acc{0.0, 0.0};
        for (const auto& [k, c] : f.modes()) {
            double beta = s.beta(k.second);
            double phase = s.alpha(k.first) * q + beta * p +
                           t * (3.0 * q * q * beta + hb * hb * beta * beta * beta / 4.0);
            acc += c * std::polar(1.0, phase);
        }
        return acc;
    });
    REQUIRE((num - oracle).max_abs() < 1e-6);
}

TEST_CASE("trigonometric hamiltonian matches its closed form", "[flow]") {
    PhaseSpace s = torus_2pi(32);
    double hb = 0.2, t = 1.0;
    TrigPoly f(s);
    f.add(0, 1, {0.5, 0.0});
    f.add(0, -1, {0.5, 0.0});
    f.add(2, 1, {0.1, 0.2});
    f.add(-2, -1, {0.1, -0.2});
    FlowSpec spec = FlowSpec::autonomous(s, Observable::from_trig(TrigPoly::cos_q(s)),
                                         Hbar(hb), Scheme::Rk4Moyal);
    spec.with_steps(256);
    GridField num = moyal_step(Observable::from_trig(f), spec, t).field.as_grid();

    // multiplication semigroup: each p-frequency b picks up
    // exp(-i t (2/hbar) sin(hbar b / 2) sin q)
    GridField oracle = GridField::sample(s, [&](double q, double p) {
        Complex acc{0.0, 0.0};
        for (const auto& [k, c] : f.modes()) {
            double w = -(2.0 / hb) * std::sin(0.5 * hb * k.second) * std::sin(q);
            acc += c * std::polar(1.0, double(k.first) * q + double(k.second) * p + t * w);
        }
        return acc;
    });
    REQUIRE((num - oracle).max_abs() < 1e-9);
}

TEST_CASE("configuration and stability guards", "[flow]") {
    PhaseSpace s = torus_2pi(32);
    FlowSpec bad = FlowSpec::autonomous(s, Observable::from_poly(s, Poly::q() * Poly::p()),
                                        Hbar(0.0), Scheme::LeapfrogPoints);
    REQUIRE_THROWS_AS(bad.validate(), ConfigError);

    FlowSpec drift = FlowSpec::kicked_flow(s, kicked_rotor(s, 1.0));
    Observable f = Observable::from_trig(smooth_field(s));
    REQUIRE_THROWS_AS(moyal_step(f, drift, 0.5), ConfigError);

    FlowSpec wild = FlowSpec::kicked_flow(s, kicked_rotor(s, 1e9), Hbar(0.1),
                                          Scheme::Rk4Moyal);
    REQUIRE_THROWS_AS(moyal_step(f, wild, 1.0), StabilityError);
}
