#pragma once

// Operator-algebraic view of the same dynamics: states as integration
// functionals, finite subalgebras spanned by indicator projections, and
// endomorphisms acting by composition with a point map. Everything is
// realized concretely on grid-sampled function spaces; the projection
// lattice of a FiniteSubalgebra is kept alongside its generating
// partition so entropy bookkeeping stays exact.

#include <cmath>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "entropy.hpp"
#include "flow.hpp"
#include "maps.hpp"
#include "observable.hpp"
#include "partition.hpp"

namespace moyalks {

// Normalized integration against the reference measure of the box.
struct AlgebraicState {
    PhaseSpace space;
    MeasureDescriptor measure;

    static AlgebraicState flat(const PhaseSpace& s) {
        AlgebraicState st;
        st.space = s;
        st.measure = MeasureDescriptor{}.normalized(s.area());
        return st;
    }

    void validate() const {
        space.validate();
        if (measure.normalization != Normalization::Probability)
            throw ConfigError("algebraic states integrate against a probability measure");
        if (!(measure.total_mass > 0.0))
            throw ConfigError("state measure has no mass");
    }
};

inline Complex state_of(const Observable& f, const AlgebraicState& st) {
    st.validate();
    if (!(f.space == st.space))
        throw ConfigError("observable and state live on different spaces");
    return f.mean_value(0.0);
}

namespace detail {

// Piecewise-constant indicator read off a stored node mask. Half-open
// binning matches FinitePartition::cell_index, so the function form and
// the grid samples describe the same set.
inline PointEval mask_indicator(const PhaseSpace& s,
                                std::shared_ptr<const std::vector<double>> mask) {
    return [s, mask](double q, double p) {
        double u = (q - s.q0()) / s.Lq * s.Nq;
        double v = (p - s.p0()) / s.Lp * s.Np;
        long j = long(std::floor(u));
        long l = long(std::floor(v));
        if (s.kind == SpaceKind::Torus) {
            j %= s.Nq;
            if (j < 0) j += s.Nq;
            l %= s.Np;
            if (l < 0) l += s.Np;
        } else {
            j = std::min(std::max(j, 0L), long(s.Nq - 1));
            l = std::min(std::max(l, 0L), long(s.Np - 1));
        }
        return Complex{(*mask)[std::size_t(j) * s.Np + l], 0.0};
    };
}

}  // namespace detail

// Finite abelian subalgebra spanned by mutually orthogonal indicator
// projections summing to the identity. `cells` is the point realization
// the projections were read from; going back and forth is lossless.
struct FiniteSubalgebra {
    PhaseSpace space;
    std::vector<Observable> minimal_projections;
    FinitePartition cells;

    static FiniteSubalgebra from_partition(const FinitePartition& part) {
        part.validate();
        FiniteSubalgebra alg;
        alg.space = part.space;
        alg.cells = part;
        alg.minimal_projections.reserve(part.size());
        for (std::size_t i = 0; i < part.size(); ++i) {
            auto mask = std::make_shared<const std::vector<double>>(part.mask(i));
            alg.minimal_projections.push_back(
                Observable::from_function(part.space, detail::mask_indicator(part.space, mask)));
        }
        return alg;
    }

    const FinitePartition& to_partition() const { return cells; }
    std::size_t size() const { return minimal_projections.size(); }

    // Projection values 0/1 and pointwise sum 1 on every grid node. With
    // 0/1 entries the sum condition already forces mutual orthogonality.
    void validate(double tol = 1e-12) const {
        if (minimal_projections.empty()) throw ConfigError("subalgebra has no projections");
        std::size_t nodes = std::size_t(space.Nq) * space.Np;
        std::vector<double> total(nodes, 0.0);
        for (const Observable& proj : minimal_projections) {
            if (!(proj.space == space))
                throw ConfigError("projection lives on a different space");
            GridField g = proj.as_grid();
            for (std::size_t m = 0; m < nodes; ++m) {
                Complex v = g.data()[m];
                if (std::abs(v.imag()) > tol ||
                    std::min(std::abs(v.real()), std::abs(v.real() - 1.0)) > tol)
                    throw ConfigError("projection values are not 0/1 on the grid");
                total[m] += v.real();
            }
        }
        for (double t : total)
            if (std::abs(t - 1.0) > tol)
                throw ConfigError("projections do not resolve the identity");
    }
};

// Shannon entropy of the projection weights under the state, in bits.
// Weight order follows the projection order, so for dyadic cells the sum
// reproduces partition_entropy bit for bit.
inline double subalgebra_entropy(const FiniteSubalgebra& alg, const AlgebraicState& st) {
    double h = 0.0;
    for (const Observable& proj : alg.minimal_projections) {
        double w = state_of(proj, st).real();
        if (w > 0.0) h -= w * std::log2(w);
    }
    return h;
}

// Join of two subalgebras: pairwise products of minimal projections with
// zero products dropped. Realized through the partition refinement, which
// builds exactly those products.
inline FiniteSubalgebra subalgebra_refinement(const FiniteSubalgebra& a,
                                              const FiniteSubalgebra& b) {
    if (!(a.space == b.space))
        throw ConfigError("subalgebras live on different spaces");
    return FiniteSubalgebra::from_partition(coarsest_refinement(a.cells, b.cells));
}

// Unital endomorphism generated by a measure-preserving point map. The
// action composes an observable with the map, so powers of the action
// evolve projections along itineraries.
struct AlgebraicEndomorphism {
    PointMapSystem system;
    std::string name = "identity";

    static AlgebraicEndomorphism koopman(PointMapSystem sys) {
        if (!sys.smooth) throw ConfigError("endomorphism needs a pointwise map");
        AlgebraicEndomorphism endo;
        endo.name = sys.name;
        endo.system = std::move(sys);
        return endo;
    }

    static AlgebraicEndomorphism identity(const PhaseSpace& s) {
        return koopman(PointMapSystem::identity(s));
    }

    Observable apply(const Observable& f) const {
        if (!(f.space == system.space))
            throw ConfigError("observable lives outside the endomorphism's space");
        PointEval source = moyalks::detail::exact_evaluator(f);
        PointMapFn step = system.smooth;
        PhaseSpace s = system.space;
        bool wrap = s.kind == SpaceKind::Torus;
        return Observable::from_function(s, [source, step, s, wrap](double q, double p) {
            auto x = step(q, p);
            if (wrap) return source(s.wrap_q(x[0]), s.wrap_p(x[1]));
            return source(x[0], x[1]);
        });
    }

    Observable operator()(const Observable& f) const { return apply(f); }
};

// Dynamical entropy of the endomorphism with respect to the state,
// driven by the dyadic projection family. The counting realized through
// evolved projections coincides with itinerary counting for the
// underlying point map, so the same refinement engines apply verbatim.
inline EntropyReport algebraic_ks(const AlgebraicEndomorphism& endo, const AlgebraicState& st,
                                  const PartitionFamily& family, int n_max,
                                  const SamplingPlan& plan = {}) {
    st.validate();
    if (!(st.space == endo.system.space))
        throw ConfigError("state and endomorphism live on different spaces");
    bool checkable = endo.system.family == MapFamily::Cat ||
                     endo.system.family == MapFamily::Baker ||
                     endo.system.family == MapFamily::RotationGolden ||
                     static_cast<bool>(endo.system.jacobian);
    if (checkable && measure_preservation_check(endo.system, 2) > 1e-6)
        throw ConfigError("endomorphism does not preserve the state");
    return ks_entropy(endo.system, family, n_max, plan);
}

}  // namespace moyalks
