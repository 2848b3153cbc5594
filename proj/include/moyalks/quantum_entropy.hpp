#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <limits>
#include <memory>
#include <string>
#include <utility>
#include <vector>

#include "entropy.hpp"
#include "errors.hpp"
#include "flow.hpp"
#include "fourier.hpp"
#include "maps.hpp"
#include "observable.hpp"
#include "partition.hpp"
#include "phase_space.hpp"

namespace moyalks {

enum class QuantumEstimator { QuasiProbability, SymbolPoint };

// Joint weights of an itinerary refinement built from evolved indicator
// symbols. Keys pack the atom digits with the earliest symbol highest, so DFS
// order is ascending-key order. Weights are clipped to nonnegative values and
// renormalized; the mass removed by the clip is kept as negativity_mass.
struct JointDistribution {
    int length = 0;
    std::size_t atoms = 0;
    std::vector<std::uint64_t> keys;
    std::vector<double> weights;
    double negativity_mass = 0.0;
    double dropped_mass = 0.0;
    bool unreliable = false;
};

namespace detail {

// entries below this magnitude leave the sparse support of a product field
constexpr double kSupportEps = 1e-13;
constexpr std::size_t kMaxLevelPairs = std::size_t(1) << 23;

using SparseField = std::vector<std::pair<std::uint32_t, double>>;

// zeroes the smallest entries whose joint L1 mass stays below tail * total, so
// oscillatory far tails of evolved fields leave the sparse products
inline void shed_field_tail(std::vector<double>& f, double tail) {
    if (tail <= 0.0) return;
    std::vector<double> mags;
    mags.reserve(f.size());
    double total = 0.0;
    for (double v : f) {
        mags.push_back(std::abs(v));
        total += std::abs(v);
    }
    std::sort(mags.begin(), mags.end());
    double run = 0.0, boundary = -1.0;
    for (double m : mags) {
        if (run + m > tail * total) {
            boundary = m;
            break;
        }
        run += m;
    }
    if (boundary <= 0.0) return;
    for (double& v : f)
        if (std::abs(v) < boundary) v = 0.0;
}

// fields[k * atoms + i] holds the real part of the k-fold Heisenberg step of
// atom i, sampled on the phase-space grid
inline std::vector<std::vector<double>> evolved_atom_fields(const FinitePartition& part,
                                                            const TimeOneMap& u, int n,
                                                            double field_tail) {
    const PhaseSpace& s = part.space;
    std::size_t atoms = part.size();
    std::size_t grid = std::size_t(s.Nq) * s.Np;
    if (double(n) * double(atoms) * double(grid) * 8.0 > 2.1e9)
        throw ConfigError("evolved indicator fields exceed the memory budget");
    std::vector<std::vector<double>> fields(std::size_t(n) * atoms);
    for (std::size_t i = 0; i < atoms; ++i) {
        FinitePartition cells = part;
        Observable cur = Observable::from_function(s, [cells, i](double q, double p) {
            return Complex(std::size_t(cells.cell_index(q, p)) == i ? 1.0 : 0.0);
        });
        for (int k = 0; k < n; ++k) {
            GridField g = cur.as_grid();
            std::vector<double>& dst = fields[std::size_t(k) * atoms + i];
            dst.resize(grid);
            const std::vector<Complex>& d = g.data();
            for (std::size_t m = 0; m < grid; ++m) dst[m] = d[m].real();
            if (k > 0) shed_field_tail(dst, field_tail);
            if (k + 1 < n) cur = u.pull_back(cur).field;
        }
    }
    return fields;
}

struct SubtreeWeights {
    std::vector<std::vector<std::pair<std::uint64_t, double>>> levels;
    double dropped = 0.0;
    int usable = 0;
};

// depth-first walk below one root atom; prod fields stay sparse so the cost
// tracks the cylinder supports instead of the full grid
class QuasiSubtree {
  public:
    QuasiSubtree(const std::vector<std::vector<double>>& fields, std::size_t atoms,
                 std::size_t grid, int n, double prune, std::uint64_t work_budget)
        : fields_(fields), atoms_(atoms), grid_(grid), n_(n), prune_(prune),
          budget_(work_budget) {
        scratch_.resize(std::size_t(n));
        res_.levels.resize(std::size_t(n));
        res_.usable = n;
    }

    SubtreeWeights run(std::size_t root) {
        const std::vector<double>& f0 = fields_[root];
        SparseField base;
        double sum = 0.0, l1 = 0.0;
        for (std::uint32_t g = 0; g < grid_; ++g) {
            double v = f0[g];
            sum += v;
            if (std::abs(v) > kSupportEps) {
                base.push_back({g, v});
                l1 += std::abs(v);
            }
        }
        work_ = grid_;
        res_.levels[0].push_back({std::uint64_t(root), sum / double(grid_)});
        double l1mean = l1 / double(grid_);
        if (n_ > 1) {
            if (l1mean >= prune_ && !base.empty())
                descend(1, std::uint64_t(root), base);
            else
                res_.dropped += l1mean;
        }
        res_.levels.resize(std::size_t(res_.usable));
        return std::move(res_);
    }

  private:
    void descend(int level, std::uint64_t key, const SparseField& prod) {
        const std::size_t base = std::size_t(level) * atoms_;
        for (std::size_t i = 0; i < atoms_; ++i) {
            if (level >= res_.usable) return;
            if (work_ + prod.size() > budget_ ||
                res_.levels[std::size_t(level)].size() >= kMaxLevelPairs) {
                res_.usable = level;
                return;
            }
            work_ += prod.size();
            const std::vector<double>& f = fields_[base + i];
            SparseField& child = scratch_[std::size_t(level)];
            child.clear();
            double sum = 0.0, l1 = 0.0;
            for (const auto& [g, v] : prod) {
                double w = v * f[g];
                sum += w;
                double a = std::abs(w);
                if (a > kSupportEps) {
                    child.push_back({g, w});
                    l1 += a;
                }
            }
            std::uint64_t ck = key * atoms_ + i;
            res_.levels[std::size_t(level)].push_back({ck, sum / double(grid_)});
            if (level + 1 == n_) continue;
            double l1mean = l1 / double(grid_);
            if (l1mean >= prune_ && !child.empty())
                descend(level + 1, ck, child);
            else
                res_.dropped += l1mean;
        }
    }

    const std::vector<std::vector<double>>& fields_;
    std::size_t atoms_, grid_;
    int n_;
    double prune_;
    std::uint64_t budget_, work_ = 0;
    std::vector<SparseField> scratch_;
    SubtreeWeights res_;
};

struct QuasiLevels {
    std::vector<std::vector<std::pair<std::uint64_t, double>>> levels;
    double dropped = 0.0;
    int usable = 0;
};

// root subtrees run independently with fixed per-atom budget shares, so the
// merged result is byte-identical for any worker count
inline QuasiLevels quasi_joint_weights(const std::vector<std::vector<double>>& fields,
                                       std::size_t atoms, std::size_t grid, int n,
                                       const SamplingPlan& plan) {
    std::vector<SubtreeWeights> parts(atoms);
    std::uint64_t share =
        std::max<std::uint64_t>(plan.work_budget / std::max<std::size_t>(atoms, 1), grid * 4);
    parallel_chunks(atoms, worker_count(plan.workers), [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            QuasiSubtree walker(fields, atoms, grid, n, plan.prune_threshold, share);
            parts[i] = walker.run(i);
        }
    });
    QuasiLevels out;
    out.usable = n;
    for (const SubtreeWeights& p : parts) {
        out.usable = std::min(out.usable, p.usable);
        out.dropped += p.dropped;
    }
    out.levels.resize(std::size_t(out.usable));
    for (int k = 0; k < out.usable; ++k)
        for (const SubtreeWeights& p : parts)
            out.levels[std::size_t(k)].insert(out.levels[std::size_t(k)].end(),
                                              p.levels[std::size_t(k)].begin(),
                                              p.levels[std::size_t(k)].end());
    return out;
}

struct ClippedLevel {
    double entropy = 0.0;
    double negativity = 0.0;
    double positive = 0.0;
    std::size_t support = 0;
};

inline ClippedLevel clip_level(const std::vector<std::pair<std::uint64_t, double>>& w) {
    ClippedLevel out;
    for (const auto& [k, v] : w) {
        if (v < 0.0)
            out.negativity -= v;
        else
            out.positive += v;
    }
    if (!(out.positive > 0.0))
        throw StatisticsError("joint quasi-probability weights carry no positive mass");
    for (const auto& [k, v] : w) {
        if (v <= 0.0) continue;
        double p = v / out.positive;
        out.entropy -= p * std::log2(p);
        ++out.support;
    }
    return out;
}

inline void require_key_width(std::size_t atoms, int n) {
    double span = 1.0;
    for (int k = 0; k < n; ++k) {
        span *= double(atoms);
        if (span > 9.0e18) throw ConfigError("itinerary keys for this depth exceed 64 bits");
    }
}

// The walk deepens one refinement step at a time and stops as soon as a level
// saturates the grid resolution or the work budget cuts the tree, so the cost
// tracks the usable part of the series. Re-runs recompute shallow levels with
// identical arithmetic, keeping results worker-count independent.
inline PartitionRow quasi_row(const FinitePartition& part, int depth, const TimeOneMap& u,
                              int n_max, const SamplingPlan& plan) {
    PartitionRow row;
    row.depth = depth;
    require_key_width(part.size(), n_max);
    std::size_t grid = std::size_t(part.space.Nq) * part.space.Np;
    auto cap = std::size_t(plan.saturation_fraction * double(grid));
    auto fields = evolved_atom_fields(part, u, n_max, plan.field_tail);
    std::vector<double> hs;
    int have = 0;
    bool stop = false;
    for (int n = std::min(4, n_max); n <= n_max && !stop; ++n) {
        QuasiLevels joint = quasi_joint_weights(fields, part.size(), grid, n, plan);
        if (joint.usable < have) break;
        for (int k = have; k < joint.usable && !stop; ++k) {
            ClippedLevel s = clip_level(joint.levels[std::size_t(k)]);
            if (s.support > cap) {
                stop = true;
                break;
            }
            hs.push_back(s.entropy);
            row.negativity_mass = std::max(row.negativity_mass, s.negativity);
            ++have;
        }
        if (joint.usable < n) break;
    }
    try {
        RateSeries rs = rate_from_series(std::move(hs));
        row.usable_n = int(rs.entropies.size());
        row.rate = rs.rate;
        row.converged = rs.converged;
        row.entropies = std::move(rs.entropies);
    } catch (const StatisticsError&) {
        row.failed = true;
        row.rate = std::numeric_limits<double>::quiet_NaN();
    }
    return row;
}

}  // namespace detail

// Itinerary weights after n refinement steps of the deformed flow. Atom
// indicators evolve in the Heisenberg picture; a cylinder weight is the state
// mean of the pointwise product of the evolved indicators along the itinerary.
// At hbar = 0 the products are exact indicator chains and the weights reduce
// to classical cylinder frequencies over the grid.
inline JointDistribution quantum_refinement_distribution(const FinitePartition& part,
                                                         const FlowSpec& spec, int n,
                                                         const SamplingPlan& plan = {}) {
    spec.validate();
    plan.validate();
    part.validate();
    if (n < 1) throw ConfigError("refinement length must be at least 1");
    if (!part.dyadic_grid())
        throw ConfigError("quantum refinement needs a dyadic grid partition");
    if (!(part.space == spec.space))
        throw ConfigError("partition and flow live on different phase spaces");
    detail::require_key_width(part.size(), n);
    TimeOneMap u(spec);
    auto fields = detail::evolved_atom_fields(part, u, n, plan.field_tail);
    std::size_t grid = std::size_t(part.space.Nq) * part.space.Np;
    detail::QuasiLevels joint = detail::quasi_joint_weights(fields, part.size(), grid, n, plan);
    if (joint.usable < n)
        throw StabilityError("work budget exhausted before the requested refinement length");
    detail::ClippedLevel s = detail::clip_level(joint.levels.back());
    JointDistribution d;
    d.length = n;
    d.atoms = part.size();
    d.keys.reserve(s.support);
    d.weights.reserve(s.support);
    for (const auto& [k, v] : joint.levels.back()) {
        if (v <= 0.0) continue;
        d.keys.push_back(k);
        d.weights.push_back(v / s.positive);
    }
    d.negativity_mass = s.negativity;
    d.dropped_mass = joint.dropped;
    d.unreliable = d.negativity_mass > 0.2;
    return d;
}

// Candidate point map read off the evolved coordinate symbols: the phases of
// the transported unit modes exp(i a q) and exp(i b p) give one image point
// per grid node, looked up by nearest node. Classically this reproduces the
// grid-sampled flow map; for hbar > 0 it is a heuristic dequantization.
inline PointMapSystem symbol_point_system(const FlowSpec& spec,
                                          std::string label = "symbol-point") {
    spec.validate();
    const PhaseSpace& s = spec.space;
    if (s.kind != SpaceKind::Torus)
        throw ConfigError("symbol-point maps need a torus phase space");
    TimeOneMap u(spec);
    GridField gq = u.pull_back(Observable::from_trig(TrigPoly::mode(s, 1, 0, 1.0))).field.as_grid();
    GridField gp = u.pull_back(Observable::from_trig(TrigPoly::mode(s, 0, 1, 1.0))).field.as_grid();
    std::size_t grid = std::size_t(s.Nq) * s.Np;
    auto qv = std::make_shared<std::vector<double>>(grid);
    auto pv = std::make_shared<std::vector<double>>(grid);
    for (int j = 0; j < s.Nq; ++j)
        for (int l = 0; l < s.Np; ++l) {
            double aq = std::arg(gq.at(j, l));
            double ap = std::arg(gp.at(j, l));
            if (aq < 0.0) aq += two_pi;
            if (ap < 0.0) ap += two_pi;
            std::size_t idx = std::size_t(j) * s.Np + l;
            (*qv)[idx] = s.q0() + aq / two_pi * s.Lq;
            (*pv)[idx] = s.p0() + ap / two_pi * s.Lp;
        }
    PointMapSystem m;
    m.space = s;
    m.family = MapFamily::FlowTimeOne;
    m.name = std::move(label);
    m.measure = MeasureDescriptor{}.normalized(s.area());
    m.state_bound = grid;
    double dq = s.Lq / s.Nq, dp = s.Lp / s.Np;
    PhaseSpace box = s;
    m.smooth = [box, dq, dp, qv, pv](double q, double p) {
        long j = std::lround((q - box.q0()) / dq) % box.Nq;
        long l = std::lround((p - box.p0()) / dp) % box.Np;
        if (j < 0) j += box.Nq;
        if (l < 0) l += box.Np;
        std::size_t idx = std::size_t(j) * box.Np + l;
        return std::array<double, 2>{(*qv)[idx], (*pv)[idx]};
    };
    return m;
}

// One quantum entropy run next to its classical twin at hbar = 0. The twin
// uses the same partition family and sampling plan, so the hbar = 0 quantum
// report is the classical report verbatim.
struct QuantumEntropyReport {
    EntropyReport quantum;
    EntropyReport classical;
    double hbar = 0.0;
    bool chaotic = false;
    bool quantum_chaotic = false;
    bool unreliable = false;
};

inline QuantumEntropyReport ks_entropy_quantum(
    const FlowSpec& spec, const PartitionFamily& family, int n_max,
    const SamplingPlan& plan = {},
    QuantumEstimator which = QuantumEstimator::QuasiProbability) {
    spec.validate();
    family.validate();
    plan.validate();
    detail::require_same_box(family.space, spec.space);
    if (n_max < 4) throw ConfigError("n_max must be at least 4");
    QuantumEntropyReport out;
    out.hbar = spec.hbar.value;
    FlowSpec frozen = spec;
    frozen.hbar = Hbar(0.0);
    out.classical = ks_entropy(PointMapSystem::time_one(frozen, "time-1"), family, n_max, plan);
    bool point_flow = !spec.is_kicked() &&
                      (!spec.hamiltonian || detail::quadratic_form(*spec.hamiltonian).has_value());
    if (spec.hbar.value == 0.0) {
        out.quantum = out.classical;
    } else if (which == QuantumEstimator::SymbolPoint) {
        out.quantum = ks_entropy(symbol_point_system(spec), family, n_max, plan);
        out.quantum.estimator = "symbol-point";
    } else if (point_flow) {
        out.quantum = ks_entropy(PointMapSystem::time_one(spec, "time-1"), family, n_max, plan);
    } else {
        TimeOneMap u(spec);
        std::vector<PartitionRow> rows;
        for (std::size_t i = 0; i < family.size(); ++i)
            rows.push_back(detail::quasi_row(family.member(i), family.depths[i], u, n_max, plan));
        out.quantum = detail::assemble_report(std::move(rows), "quasi-probability");
    }
    out.chaotic = out.classical.ks_estimate > 0.05;
    out.quantum_chaotic = out.quantum.ks_estimate > 0.05;
    out.unreliable = out.quantum.negativity_mass_max > 0.2;
    return out;
}

}  // namespace moyalks
