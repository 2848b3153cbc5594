#pragma once

#include <atomic>
#include <cstdint>
#include <cstdlib>
#include <functional>
#include <limits>
#include <numbers>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "maps.hpp"
#include "partition.hpp"

namespace moyalks {

// Shared sampling plan for every itinerary estimator. Runs with equal plans
// are byte-identical regardless of worker count: sample starts are derived
// from the sample index alone and merges happen in a fixed order.
struct SamplingPlan {
    std::uint64_t seed = 12345;
    std::size_t samples = 1'000'000;
    double saturation_fraction = 0.5;
    std::size_t rect_budget = std::size_t(1) << 22;
    double prune_threshold = 1e-10;
    double field_tail = 1e-6;
    std::uint64_t work_budget = 1'000'000'000;
    int workers = 0;

    void validate() const {
        if (samples < 16) throw ConfigError("sampling plan needs at least 16 samples");
        if (!(saturation_fraction > 0.0) || saturation_fraction > 1.0)
            throw ConfigError("saturation fraction must lie in (0, 1]");
        if (rect_budget < 16) throw ConfigError("rectangle budget too small");
        if (!(prune_threshold >= 0.0)) throw ConfigError("prune threshold must be nonnegative");
        if (!(field_tail >= 0.0) || field_tail > 0.1)
            throw ConfigError("field tail must lie in [0, 0.1]");
        if (work_budget < 1024) throw ConfigError("work budget too small");
    }
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& s) {
    s += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = s;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_itinerary(std::uint64_t h, std::uint64_t atom) {
    h = (h ^ atom) * 0x9E3779B97F4A7C15ULL;
    h ^= h >> 29;
    h *= 0xBF58476D1CE4E5B9ULL;
    h ^= h >> 32;
    return h;
}

inline std::uint64_t top_bits(std::uint64_t w, int k) { return k ? (w >> (64 - k)) : 0; }

inline int worker_count(int requested) {
    if (requested > 0) return std::min(requested, 64);
    if (const char* env = std::getenv("MOYALKS_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0) return std::min(v, 64);
    }
    unsigned hc = std::thread::hardware_concurrency();
    return hc ? int(std::min(hc, 16u)) : 1;
}

// fixed chunk grid so results cannot depend on the number of workers
inline void parallel_chunks(std::size_t n, int workers,
                            const std::function<void(std::size_t, std::size_t)>& body) {
    if (n == 0) return;
    const std::size_t chunks = 64;
    std::atomic<std::size_t> next{0};
    auto run = [&] {
        for (std::size_t c = next.fetch_add(1); c < chunks; c = next.fetch_add(1)) {
            std::size_t lo = n * c / chunks, hi = n * (c + 1) / chunks;
            if (lo < hi) body(lo, hi);
        }
    };
    int w = std::clamp(workers, 1, int(chunks));
    std::vector<std::thread> pool;
    for (int t = 1; t < w; ++t) pool.emplace_back(run);
    run();
    for (auto& th : pool) th.join();
}

struct CountedEntropy {
    std::size_t distinct = 0;
    double bits = 0.0;
};

// plug-in Shannon entropy with the Miller-Madow bias correction, computed
// from sorted itinerary hashes in a fixed accumulation order
inline CountedEntropy counted_entropy(std::vector<std::uint64_t>& scratch) {
    std::sort(scratch.begin(), scratch.end());
    const double n = double(scratch.size());
    std::size_t distinct = 0;
    double clogc = 0.0;
    std::size_t run = 1;
    for (std::size_t i = 1; i <= scratch.size(); ++i) {
        if (i < scratch.size() && scratch[i] == scratch[i - 1]) {
            ++run;
            continue;
        }
        ++distinct;
        if (run > 1) clogc += double(run) * std::log2(double(run));
        run = 1;
    }
    double plug = std::log2(n) - clogc / n;
    double mm = plug + double(distinct - 1) / (2.0 * n * std::numbers::ln2);
    return {distinct, mm};
}

inline std::vector<double> itinerary_series_lattice(const PointMapSystem& sys, int kq, int kp,
                                                    int n_max, const SamplingPlan& plan) {
    const std::size_t N = plan.samples;
    const int mp = 1 << kp;
    const std::uint64_t cells = (std::uint64_t(1) << kq) * mp;
    std::vector<std::uint64_t> q(N), p(N), h(N, 0), scratch(N);
    int workers = worker_count(plan.workers);
    parallel_chunks(N, workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            std::uint64_t s = plan.seed + 0x9E3779B97F4A7C15ULL * (i + 1);
            std::uint64_t r1 = splitmix64(s), r2 = splitmix64(s);
            std::uint64_t c = i % cells;
            std::uint64_t cq = c / std::uint64_t(mp), cp = c % std::uint64_t(mp);
            q[i] = (kq ? cq << (64 - kq) : 0) | (r1 >> kq);
            p[i] = (kp ? cp << (64 - kp) : 0) | (r2 >> kp);
        }
    });
    const auto cap = std::size_t(plan.saturation_fraction * double(N));
    std::vector<double> out;
    for (int n = 1; n <= n_max; ++n) {
        parallel_chunks(N, workers, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i)
                h[i] = mix_itinerary(h[i], (top_bits(q[i], kq) << kp) | top_bits(p[i], kp));
        });
        scratch = h;
        CountedEntropy ce = counted_entropy(scratch);
        if (ce.distinct > cap) break;
        out.push_back(ce.bits);
        if (n == n_max) break;
        parallel_chunks(N, workers, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) sys.lattice_step(q[i], p[i]);
        });
    }
    return out;
}

inline std::vector<double> itinerary_series_smooth(const PointMapSystem& sys,
                                                   const FinitePartition& part, int n_max,
                                                   const SamplingPlan& plan) {
    const std::size_t N = plan.samples;
    const int mq = 1 << part.kq, mp = 1 << part.kp;
    const std::uint64_t cells = std::uint64_t(mq) * mp;
    std::vector<double> q(N), p(N);
    std::vector<std::uint64_t> h(N, 0), scratch(N);
    const PhaseSpace& s = sys.space;
    int workers = worker_count(plan.workers);
    parallel_chunks(N, workers, [&](std::size_t lo, std::size_t hi) {
        for (std::size_t i = lo; i < hi; ++i) {
            std::uint64_t st = plan.seed + 0x9E3779B97F4A7C15ULL * (i + 1);
            double u = double(splitmix64(st) >> 11) * 0x1p-53;
            double v = double(splitmix64(st) >> 11) * 0x1p-53;
            std::uint64_t c = i % cells;
            q[i] = s.q0() + s.Lq * (double(c / std::uint64_t(mp)) + u) / mq;
            p[i] = s.p0() + s.Lp * (double(c % std::uint64_t(mp)) + v) / mp;
        }
    });
    auto cap = std::size_t(plan.saturation_fraction * double(N));
    if (sys.state_bound)
        cap = std::min(cap, std::size_t(plan.saturation_fraction * double(sys.state_bound)));
    std::vector<double> out;
    for (int n = 1; n <= n_max; ++n) {
        parallel_chunks(N, workers, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i)
                h[i] = mix_itinerary(h[i], std::uint64_t(part.cell_index(q[i], p[i])));
        });
        scratch = h;
        CountedEntropy ce = counted_entropy(scratch);
        if (ce.distinct > cap) break;
        out.push_back(ce.bits);
        if (n == n_max) break;
        parallel_chunks(N, workers, [&](std::size_t lo, std::size_t hi) {
            for (std::size_t i = lo; i < hi; ++i) {
                auto r = sys.smooth(q[i], p[i]);
                q[i] = r[0];
                p[i] = r[1];
            }
        });
    }
    return out;
}

// Joint refinement of the baker map enumerated exactly: every join atom is a
// union of aligned dyadic rectangles, refined one preimage step at a time and
// grouped by itinerary. Measures are exact powers of two.
struct BakerRect {
    std::uint32_t qa = 0, pa = 0;
    std::uint8_t qbits = 0, pbits = 0;
    std::uint64_t hash = 0;
};

inline double baker_rect_entropy(const std::vector<BakerRect>& rects) {
    std::vector<std::pair<std::uint64_t, double>> groups;
    groups.reserve(rects.size());
    for (const BakerRect& r : rects)
        groups.emplace_back(r.hash, std::ldexp(1.0, -int(r.qbits) - int(r.pbits)));
    std::sort(groups.begin(), groups.end());
    double hsum = 0.0;
    std::size_t i = 0;
    while (i < groups.size()) {
        double mu = 0.0;
        std::size_t j = i;
        while (j < groups.size() && groups[j].first == groups[i].first) mu += groups[j++].second;
        hsum -= mu * std::log2(mu);
        i = j;
    }
    return hsum;
}

inline void baker_emit(std::vector<BakerRect>& next, std::uint32_t qa, std::uint8_t qbits,
                       std::uint32_t pa, std::uint8_t pbits, std::uint64_t tail_hash, int kq,
                       int kp) {
    int splits = pbits < kp ? kp - pbits : 0;
    for (std::uint32_t sub = 0; sub < (std::uint32_t(1) << splits); ++sub) {
        std::uint32_t pa2 = (pa << splits) | sub;
        std::uint8_t pbits2 = std::uint8_t(pbits + splits);
        std::uint64_t cq = qa >> (qbits - kq);
        std::uint64_t cp = pa2 >> (pbits2 - kp);
        next.push_back({qa, pa2, qbits, pbits2, mix_itinerary(tail_hash, (cq << kp) | cp)});
    }
}

inline std::vector<double> baker_exact_series(int kq, int kp, int n_max,
                                              const SamplingPlan& plan) {
    std::vector<BakerRect> rects;
    for (std::uint32_t cq = 0; cq < (std::uint32_t(1) << kq); ++cq)
        for (std::uint32_t cp = 0; cp < (std::uint32_t(1) << kp); ++cp)
            rects.push_back({cq, cp, std::uint8_t(kq), std::uint8_t(kp),
                             mix_itinerary(0, (std::uint64_t(cq) << kp) | cp)});
    std::vector<double> out;
    for (int n = 1; n <= n_max; ++n) {
        out.push_back(baker_rect_entropy(rects));
        if (n == n_max) break;
        std::vector<BakerRect> next;
        next.reserve(2 * rects.size());
        for (const BakerRect& r : rects) {
            std::uint8_t qb = std::uint8_t(r.qbits + 1);
            if (qb > 28) throw StabilityError("baker refinement exceeded coordinate precision");
            if (r.pbits == 0) {
                baker_emit(next, r.qa, qb, 0, 0, r.hash, kq, kp);
                baker_emit(next, r.qa | (std::uint32_t(1) << r.qbits), qb, 0, 0, r.hash, kq, kp);
            } else {
                std::uint32_t half = std::uint32_t(1) << (r.pbits - 1);
                if (r.pa < half)
                    baker_emit(next, r.qa, qb, r.pa, std::uint8_t(r.pbits - 1), r.hash, kq, kp);
                else
                    baker_emit(next, r.qa | (std::uint32_t(1) << r.qbits), qb, r.pa - half,
                               std::uint8_t(r.pbits - 1), r.hash, kq, kp);
            }
        }
        if (next.size() > plan.rect_budget) break;
        rects = std::move(next);
    }
    return out;
}

struct RateSeries {
    std::vector<double> entropies;
    double rate = 0.0;
    bool converged = false;
};

// difference estimator at the largest stable n; converged iff the last three
// differences agree within 0.02 bits
inline RateSeries rate_from_series(std::vector<double> entropies) {
    if (entropies.size() < 4)
        throw StatisticsError("itinerary sample too small for the requested depth");
    RateSeries s;
    s.entropies = std::move(entropies);
    std::size_t m = s.entropies.size();
    s.rate = s.entropies[m - 1] - s.entropies[m - 2];
    double lo = std::numeric_limits<double>::infinity(), hi = -lo;
    for (std::size_t i = m - 3; i < m; ++i) {
        double d = s.entropies[i] - s.entropies[i - 1];
        lo = std::min(lo, d);
        hi = std::max(hi, d);
    }
    s.converged = hi - lo < 0.02;
    return s;
}

inline void require_same_box(const PhaseSpace& a, const PhaseSpace& b) {
    if (a.kind != b.kind || a.Lq != b.Lq || a.Lp != b.Lp)
        throw ConfigError("partition and system live on different spaces");
}

}  // namespace detail

// full refinement-entropy series of one partition under one map
inline detail::RateSeries refinement_rate_series(const FinitePartition& part,
                                                 const PointMapSystem& sys, int n_max,
                                                 const SamplingPlan& plan = {}) {
    plan.validate();
    if (n_max < 4) throw ConfigError("n_max must be at least 4");
    if (!part.dyadic_grid()) throw ConfigError("entropy rates need the dyadic-grid form");
    detail::require_same_box(part.space, sys.space);
    std::vector<double> series;
    if (sys.exact_counting && sys.family == MapFamily::Baker)
        series = detail::baker_exact_series(part.kq, part.kp, n_max, plan);
    else if (sys.lattice)
        series = detail::itinerary_series_lattice(sys, part.kq, part.kp, n_max, plan);
    else
        series = detail::itinerary_series_smooth(sys, part, n_max, plan);
    return detail::rate_from_series(std::move(series));
}

inline std::pair<double, bool> entropy_rate(const FinitePartition& part,
                                            const PointMapSystem& sys, int n_max,
                                            const SamplingPlan& plan = {}) {
    detail::RateSeries s = refinement_rate_series(part, sys, n_max, plan);
    return {s.rate, s.converged};
}

struct PartitionRow {
    int depth = 0;
    int usable_n = 0;
    double rate = 0.0;
    bool converged = false;
    bool failed = false;
    std::vector<double> entropies;
    double negativity_mass = 0.0;
};

// Per-family entropy summary. ks_estimate is the max over converged rates;
// when nothing converged the report is flagged inconclusive and carries the
// best available rate instead of fabricating a converged one.
struct EntropyReport {
    std::vector<PartitionRow> per_partition;
    double ks_estimate = 0.0;
    bool inconclusive = false;
    bool monotone = true;
    double negativity_mass_max = 0.0;
    std::string estimator = "point-map";
};

namespace detail {

// shared tail of the estimators: best converged rate wins, otherwise the best
// available one with the inconclusive flag raised
inline EntropyReport assemble_report(std::vector<PartitionRow> rows, std::string estimator) {
    EntropyReport rep;
    double best_conv = -1.0, best_any = -1.0;
    double prev_conv = -std::numeric_limits<double>::infinity();
    for (const PartitionRow& row : rows) {
        if (row.failed) continue;
        best_any = std::max(best_any, row.rate);
        rep.negativity_mass_max = std::max(rep.negativity_mass_max, row.negativity_mass);
        if (row.converged) {
            best_conv = std::max(best_conv, row.rate);
            if (row.rate < prev_conv - 0.02) rep.monotone = false;
            prev_conv = row.rate;
        }
    }
    rep.per_partition = std::move(rows);
    if (best_any < 0.0 && best_conv < 0.0)
        throw StatisticsError("no partition in the family produced a usable rate");
    rep.inconclusive = best_conv < 0.0;
    rep.ks_estimate = std::max(0.0, rep.inconclusive ? best_any : best_conv);
    rep.estimator = std::move(estimator);
    return rep;
}

}  // namespace detail

inline EntropyReport ks_entropy(const PointMapSystem& sys, const PartitionFamily& family,
                                int n_max, const SamplingPlan& plan = {}) {
    family.validate();
    detail::require_same_box(family.space, sys.space);
    std::vector<PartitionRow> rows;
    for (std::size_t i = 0; i < family.size(); ++i) {
        PartitionRow row;
        row.depth = family.depths[i];
        try {
            detail::RateSeries s = refinement_rate_series(family.member(i), sys, n_max, plan);
            row.usable_n = int(s.entropies.size());
            row.rate = s.rate;
            row.converged = s.converged;
            row.entropies = std::move(s.entropies);
        } catch (const StatisticsError&) {
            row.failed = true;
            row.rate = std::numeric_limits<double>::quiet_NaN();
        }
        rows.push_back(std::move(row));
    }
    return detail::assemble_report(std::move(rows), "point-map");
}

// largest Lyapunov exponent in bits per step, Benettin tangent-vector
// renormalization averaged over deterministic sample orbits
inline double lyapunov_estimate(const PointMapSystem& sys, int n, int samples,
                                std::uint64_t seed = 12345) {
    if (!sys.jacobian) throw ConfigError("lyapunov estimate needs a differentiable map");
    if (n < 1 || samples < 1) throw ConfigError("lyapunov estimate needs n, samples >= 1");
    const PhaseSpace& s = sys.space;
    double total = 0.0;
    for (int k = 0; k < samples; ++k) {
        std::uint64_t st = seed + 0x9E3779B97F4A7C15ULL * std::uint64_t(k + 1);
        double q = s.q0() + s.Lq * (double(detail::splitmix64(st) >> 11) * 0x1p-53);
        double p = s.p0() + s.Lp * (double(detail::splitmix64(st) >> 11) * 0x1p-53);
        double v0 = 1.0, v1 = 0.0, acc = 0.0;
        for (int t = 0; t < n; ++t) {
            auto J = sys.jacobian(q, p);
            double w0 = J[0] * v0 + J[1] * v1;
            double w1 = J[2] * v0 + J[3] * v1;
            double norm = std::hypot(w0, w1);
            acc += std::log2(norm);
            v0 = w0 / norm;
            v1 = w1 / norm;
            auto r = sys.smooth(q, p);
            q = r[0];
            p = r[1];
        }
        total += acc / double(n);
    }
    return total / double(samples);
}

}  // namespace moyalks
