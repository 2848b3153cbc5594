#include <catch2/catch_amalgamated.hpp>

#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <vector>

#include "moyalks/algebraic.hpp"

using namespace moyalks;

namespace {

Observable mode_obs(const PhaseSpace& s, int a, int b) {
    return Observable::from_trig(TrigPoly::mode(s, a, b, Complex{1.0, 0.0}));
}

Observable pointwise_product(const Observable& f, const Observable& g) {
    PointEval ef = detail::exact_evaluator(f);
    PointEval eg = detail::exact_evaluator(g);
    return Observable::from_function(f.space, [ef, eg](double q, double p) {
        return ef(q, p) * eg(q, p);
    });
}

double grid_distance(const Observable& f, const Observable& g) {
    GridField a = f.as_grid();
    GridField b = g.as_grid();
    double worst = 0.0;
    for (std::size_t m = 0; m < a.data().size(); ++m)
        worst = std::max(worst, std::abs(a.data()[m] - b.data()[m]));
    return worst;
}

FinitePartition uneven_thirds(const PhaseSpace& s) {
    std::size_t nodes = std::size_t(s.Nq) * s.Np;
    std::vector<std::vector<double>> masks(3, std::vector<double>(nodes, 0.0));
    for (int j = 0; j < s.Nq; ++j)
        for (int l = 0; l < s.Np; ++l) {
            int which = j < s.Nq / 2 ? 0 : (l < s.Np / 2 ? 1 : 2);
            masks[which][std::size_t(j) * s.Np + l] = 1.0;
        }
    return FinitePartition::from_masks(s, std::move(masks));
}

}  // namespace

TEST_CASE("states integrate observables against the flat measure", "[algebraic]") {
    PhaseSpace s = unit_torus(128);
    AlgebraicState st = AlgebraicState::flat(s);
    st.validate();

    Observable one = Observable::from_trig(TrigPoly::mode(s, 0, 0, Complex{1.0, 0.0}));
    CHECK(state_of(one, st).real() == 1.0);
    CHECK(state_of(one, st).imag() == 0.0);

    auto part = FinitePartition::dyadic(s, 1);
    auto quad = FiniteSubalgebra::from_partition(part);
    for (const Observable& proj : quad.minimal_projections)
        CHECK(state_of(proj, st).real() == 0.25);

    CHECK(std::abs(state_of(mode_obs(s, 1, 0), st)) < 1e-12);
    CHECK(std::abs(state_of(mode_obs(s, 0, 3), st)) < 1e-12);

    // positivity on a manifestly nonnegative field
    Observable sq = pointwise_product(mode_obs(s, 2, 1), mode_obs(s, -2, -1));
    CHECK(state_of(sq, st).real() >= 0.0);

    AlgebraicState other = AlgebraicState::flat(torus_2pi(64));
    CHECK_THROWS_AS(state_of(one, other), ConfigError);

    AlgebraicState raw;
    raw.space = s;
    CHECK_THROWS_AS(raw.validate(), ConfigError);
}

TEST_CASE("projections from a partition resolve the identity", "[algebraic]") {
    PhaseSpace s = unit_torus(64);
    auto alg = FiniteSubalgebra::from_partition(FinitePartition::dyadic(s, 2));
    REQUIRE(alg.size() == 16);
    alg.validate();

    for (std::size_t i : {std::size_t(0), std::size_t(7), std::size_t(15)}) {
        const Observable& n = alg.minimal_projections[i];
        CHECK(grid_distance(pointwise_product(n, n), n) == 0.0);
    }
    Observable cross = pointwise_product(alg.minimal_projections[3], alg.minimal_projections[9]);
    for (const Complex& v : cross.as_grid().data()) CHECK(v == Complex{0.0, 0.0});

    // the projections stay honest off the sampling grid as well
    const Observable& n0 = alg.minimal_projections[0];
    CHECK(n0.eval(0.1, 0.2) == Complex{1.0, 0.0});
    CHECK(n0.eval(0.3, 0.2) == Complex{0.0, 0.0});

    FiniteSubalgebra broken = alg;
    broken.minimal_projections[2] = mode_obs(s, 1, 0);
    CHECK_THROWS_AS(broken.validate(), ConfigError);

    FiniteSubalgebra leaky = alg;
    leaky.minimal_projections.pop_back();
    CHECK_THROWS_AS(leaky.validate(), ConfigError);

    CHECK(alg.to_partition().size() == 16);
    CHECK(alg.to_partition().dyadic_grid());
}

TEST_CASE("subalgebra entropy equals partition entropy exactly", "[algebraic]") {
    PhaseSpace s = unit_torus(128);
    AlgebraicState st = AlgebraicState::flat(s);

    for (int depth : {0, 1, 2, 3}) {
        auto part = FinitePartition::dyadic(s, depth);
        auto alg = FiniteSubalgebra::from_partition(part);
        CHECK(subalgebra_entropy(alg, st) == partition_entropy(part));
    }

    auto thirds = uneven_thirds(s);
    auto alg = FiniteSubalgebra::from_partition(thirds);
    alg.validate();
    CHECK(subalgebra_entropy(alg, st) == Catch::Approx(1.5).margin(1e-13));
    CHECK(subalgebra_entropy(alg, st) == Catch::Approx(partition_entropy(thirds)).margin(1e-13));
}

TEST_CASE("refinement multiplies projections and drops empty products", "[algebraic]") {
    PhaseSpace s = unit_torus(64);
    AlgebraicState st = AlgebraicState::flat(s);
    auto halves_q = FiniteSubalgebra::from_partition(FinitePartition::dyadic_rect(s, 1, 0));
    auto halves_p = FiniteSubalgebra::from_partition(FinitePartition::dyadic_rect(s, 0, 1));

    auto joined = subalgebra_refinement(halves_q, halves_p);
    REQUIRE(joined.size() == 4);
    joined.validate();
    CHECK(subalgebra_entropy(joined, st) == 2.0);

    // each joined projection is a product of one projection from each side
    for (const Observable& n : joined.minimal_projections) {
        bool found = false;
        for (const Observable& a : halves_q.minimal_projections)
            for (const Observable& b : halves_p.minimal_projections)
                found = found || grid_distance(pointwise_product(a, b), n) == 0.0;
        CHECK(found);
    }

    auto self = subalgebra_refinement(halves_q, halves_q);
    CHECK(self.size() == halves_q.size());
    CHECK(subalgebra_entropy(self, st) == subalgebra_entropy(halves_q, st));

    auto trivial = FiniteSubalgebra::from_partition(FinitePartition::dyadic(s, 0));
    auto with_unit = subalgebra_refinement(halves_q, trivial);
    CHECK(with_unit.size() == halves_q.size());
    CHECK(subalgebra_entropy(with_unit, st) == subalgebra_entropy(halves_q, st));

    // masks with disjoint supports shed their zero products: of the six
    // pairwise products only three survive
    auto thirds = uneven_thirds(s);
    auto mixed = subalgebra_refinement(FiniteSubalgebra::from_partition(thirds), halves_q);
    CHECK(mixed.size() == 3);
    mixed.validate();
    CHECK(subalgebra_entropy(mixed, st) == Catch::Approx(1.5).margin(1e-13));

    auto wide = FiniteSubalgebra::from_partition(FinitePartition::dyadic(torus_2pi(64), 1));
    CHECK_THROWS_AS(subalgebra_refinement(halves_q, wide), ConfigError);
}

TEST_CASE("endomorphisms are multiplicative and state preserving", "[algebraic]") {
    for (auto sys : {PointMapSystem::cat(), PointMapSystem::rotation(),
                     PointMapSystem::standard(10.0)}) {
        AlgebraicState st = AlgebraicState::flat(sys.space);
        auto endo = AlgebraicEndomorphism::koopman(sys);

        std::vector<Observable> set;
        for (int a = -2; a <= 2; ++a)
            for (int b = -1; b <= 1; ++b)
                set.push_back(mode_obs(sys.space, a, b));
        set.push_back(pointwise_product(set[1], set[5]));
        set.push_back(pointwise_product(set[2], set[12]));
        REQUIRE(set.size() >= 17);

        for (std::size_t i = 0; i < set.size(); ++i) {
            Observable lhs = endo.apply(pointwise_product(set[i], set[(i * 7 + 3) % set.size()]));
            Observable rhs = pointwise_product(endo.apply(set[i]),
                                               endo.apply(set[(i * 7 + 3) % set.size()]));
            CHECK(grid_distance(lhs, rhs) < 1e-10);
            CHECK(std::abs(state_of(endo.apply(set[i]), st) - state_of(set[i], st)) < 1e-8);
        }
    }

    PhaseSpace s = unit_torus(64);
    auto id = AlgebraicEndomorphism::identity(s);
    Observable f = mode_obs(s, 2, -1);
    CHECK(grid_distance(id.apply(f), f) < 1e-12);
}

TEST_CASE("projection counting reproduces itinerary counting", "[algebraic]") {
    auto sys = PointMapSystem::cat(64);
    AlgebraicState st = AlgebraicState::flat(sys.space);
    auto endo = AlgebraicEndomorphism::koopman(sys);
    auto alg = FiniteSubalgebra::from_partition(FinitePartition::dyadic(sys.space, 1));

    // H of the projection join N v Theta N v Theta^2 N, assembled from
    // state weights of evolved projection products
    std::vector<Observable> once, twice;
    for (const Observable& n : alg.minimal_projections) {
        once.push_back(endo.apply(n));
        twice.push_back(endo.apply(once.back()));
    }
    double h_join = 0.0;
    for (std::size_t i = 0; i < alg.size(); ++i)
        for (std::size_t j = 0; j < alg.size(); ++j)
            for (std::size_t k = 0; k < alg.size(); ++k) {
                Observable prod = pointwise_product(
                    alg.minimal_projections[i], pointwise_product(once[j], twice[k]));
                double w = state_of(prod, st).real();
                if (w > 1e-15) h_join -= w * std::log2(w);
            }

    // the same count read directly off forward itineraries of the grid nodes
    const PhaseSpace& s = sys.space;
    const FinitePartition& part = alg.to_partition();
    std::map<std::uint64_t, std::size_t> counts;
    for (int j = 0; j < s.Nq; ++j)
        for (int l = 0; l < s.Np; ++l) {
            double q = s.grid_q(j), p = s.grid_p(l);
            std::uint64_t key = 0;
            for (int step = 0; step < 3; ++step) {
                key = key * alg.size() + std::uint64_t(part.cell_index(q, p));
                auto x = sys.smooth(q, p);
                q = s.wrap_q(x[0]);
                p = s.wrap_p(x[1]);
            }
            ++counts[key];
        }
    double nodes = double(s.Nq) * s.Np;
    double h_direct = 0.0;
    for (const auto& [key, c] : counts) {
        double w = double(c) / nodes;
        h_direct -= w * std::log2(w);
    }
    CHECK(h_join == Catch::Approx(h_direct).margin(1e-12));
}

TEST_CASE("algebraic and measure entropies agree on the oracle maps", "[algebraic]") {
    SamplingPlan plan;
    plan.samples = 250000;

    auto cat = PointMapSystem::cat();
    auto fam = PartitionFamily::dyadic(cat.space, {2, 3});
    auto alg_rep = algebraic_ks(AlgebraicEndomorphism::koopman(cat),
                                AlgebraicState::flat(cat.space), fam, 8, plan);
    auto meas_rep = ks_entropy(cat, fam, 8, plan);
    CHECK(std::abs(alg_rep.ks_estimate - meas_rep.ks_estimate) < 1e-6);
    REQUIRE(alg_rep.per_partition.size() == meas_rep.per_partition.size());
    for (std::size_t i = 0; i < alg_rep.per_partition.size(); ++i)
        CHECK(alg_rep.per_partition[i].entropies == meas_rep.per_partition[i].entropies);

    auto baker = PointMapSystem::baker();
    auto bfam = PartitionFamily::dyadic(baker.space, {1, 2});
    auto b_alg = algebraic_ks(AlgebraicEndomorphism::koopman(baker),
                              AlgebraicState::flat(baker.space), bfam, 10, plan);
    auto b_meas = ks_entropy(baker, bfam, 10, plan);
    CHECK(std::abs(b_alg.ks_estimate - b_meas.ks_estimate) < 1e-6);
    CHECK(b_alg.ks_estimate == Catch::Approx(1.0).margin(0.03));

    auto id_rep = algebraic_ks(AlgebraicEndomorphism::identity(cat.space),
                               AlgebraicState::flat(cat.space), fam, 8, plan);
    CHECK(id_rep.ks_estimate == 0.0);
    CHECK_FALSE(id_rep.inconclusive);
}

TEST_CASE("algebraic entropy rejects inconsistent inputs", "[algebraic]") {
    auto cat = PointMapSystem::cat();
    auto fam = PartitionFamily::dyadic(cat.space, {2});
    auto endo = AlgebraicEndomorphism::koopman(cat);

    CHECK_THROWS_AS(algebraic_ks(endo, AlgebraicState::flat(torus_2pi(128)), fam, 6),
                    ConfigError);

    PointMapSystem shrink = PointMapSystem::identity(unit_torus(64));
    shrink.smooth = [](double q, double p) { return std::array<double, 2>{q / 2, p / 2}; };
    shrink.jacobian = [](double, double) { return std::array<double, 4>{0.5, 0, 0, 0.5}; };
    CHECK_THROWS_AS(algebraic_ks(AlgebraicEndomorphism::koopman(shrink),
                                 AlgebraicState::flat(shrink.space),
                                 PartitionFamily::dyadic(shrink.space, {2}), 6),
                    ConfigError);

    PointMapSystem hollow;
    hollow.space = unit_torus(64);
    CHECK_THROWS_AS(AlgebraicEndomorphism::koopman(hollow), ConfigError);
}
