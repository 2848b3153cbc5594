#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "flow.hpp"
#include "rational.hpp"

namespace moyalks {

enum class MapFamily { Identity, Cat, Baker, RotationGolden, Standard, FlowTimeOne };

namespace detail {

// 64-bit fixed-point torus coordinate: word w represents w / 2^64 in [0, 1).
// Translations and integer-matrix maps are exact on this ring.
inline constexpr std::uint64_t kGoldenQ = 0x9E3779B97F4A8000ULL;
inline constexpr std::uint64_t kGoldenP = 0x61C8864680B58000ULL;
inline constexpr std::uint64_t kHalfWord = 0x8000000000000000ULL;

inline double lattice_to_unit(std::uint64_t w) { return double(w) * 0x1p-64; }

}  // namespace detail

// Measure-preserving map of the phase-space box, the classical side of every
// entropy computation. The oracle families carry exact 64-bit lattice
// arithmetic; smooth families run in doubles. A time-1 handle wraps the
// classical point flow of a FlowSpec.
struct PointMapSystem {
    PhaseSpace space;
    MapFamily family = MapFamily::Identity;
    std::string name = "identity";
    MeasureDescriptor measure;
    double strength = 0.0;
    bool lattice = false;
    bool piecewise_linear = false;
    bool exact_counting = false;
    std::size_t state_bound = 0;
    PointMapFn smooth;
    std::function<std::array<double, 4>(double, double)> jacobian;

    static PointMapSystem identity(const PhaseSpace& s) {
        PointMapSystem m;
        m.space = s;
        m.measure = MeasureDescriptor{}.normalized(s.area());
        m.smooth = [](double q, double p) { return std::array<double, 2>{q, p}; };
        m.jacobian = [](double, double) { return std::array<double, 4>{1, 0, 0, 1}; };
        return m;
    }

    // hyperbolic automorphism (q, p) -> (2q + p, q + p) of the unit torus
    static PointMapSystem cat(int grid = 128) {
        PointMapSystem m;
        m.space = unit_torus(grid);
        m.family = MapFamily::Cat;
        m.name = "cat";
        m.measure = MeasureDescriptor{}.normalized(1.0);
        m.lattice = true;
        m.piecewise_linear = true;
        const PhaseSpace s = m.space;
        m.smooth = [s](double q, double p) {
            return std::array<double, 2>{s.wrap_q(2 * q + p), s.wrap_p(q + p)};
        };
        m.jacobian = [](double, double) { return std::array<double, 4>{2, 1, 1, 1}; };
        return m;
    }

    // (q, p) -> (2q mod 1, (p + floor(2q)) / 2) on the unit square
    static PointMapSystem baker(int grid = 128) {
        PointMapSystem m;
        m.space = unit_torus(grid);
        m.family = MapFamily::Baker;
        m.name = "baker";
        m.measure = MeasureDescriptor{}.normalized(1.0);
        m.lattice = true;
        m.piecewise_linear = true;
        m.exact_counting = true;
        m.smooth = [](double q, double p) {
            if (q < 0.5) return std::array<double, 2>{2 * q, p / 2};
            return std::array<double, 2>{2 * q - 1, (p + 1) / 2};
        };
        return m;
    }

    // translation by (phi - 1, 2 - phi), phi the golden ratio; both offsets
    // irrational so every orbit is equidistributed
    static PointMapSystem rotation(int grid = 128) {
        PointMapSystem m;
        m.space = unit_torus(grid);
        m.family = MapFamily::RotationGolden;
        m.name = "rotation";
        m.measure = MeasureDescriptor{}.normalized(1.0);
        m.lattice = true;
        const PhaseSpace s = m.space;
        m.smooth = [s](double q, double p) {
            return std::array<double, 2>{s.wrap_q(q + detail::lattice_to_unit(detail::kGoldenQ)),
                                         s.wrap_p(p + detail::lattice_to_unit(detail::kGoldenP))};
        };
        m.jacobian = [](double, double) { return std::array<double, 4>{1, 0, 0, 1}; };
        return m;
    }

    // Chirikov kick-then-drift p' = p + K sin q, q' = q + p' on [0, 2pi)^2
    static PointMapSystem standard(double kick, int grid = 128) {
        PointMapSystem m;
        m.space = torus_2pi(grid);
        m.family = MapFamily::Standard;
        m.name = "standard";
        m.measure = MeasureDescriptor{}.normalized(m.space.area());
        m.strength = kick;
        const PhaseSpace s = m.space;
        m.smooth = [s, kick](double q, double p) {
            double p1 = s.wrap_p(p + kick * std::sin(q));
            return std::array<double, 2>{s.wrap_q(q + p1), p1};
        };
        m.jacobian = [kick](double q, double) {
            double c = kick * std::cos(q);
            return std::array<double, 4>{1 + c, 1, c, 1};
        };
        return m;
    }

    // unit-time classical point flow of a FlowSpec (throws for quantum
    // non-quadratic generators, which have no underlying point map)
    static PointMapSystem time_one(const FlowSpec& spec, std::string label = "time-1") {
        PointMapSystem m;
        m.space = spec.space;
        m.family = MapFamily::FlowTimeOne;
        m.name = std::move(label);
        m.measure = MeasureDescriptor{}.normalized(spec.space.area());
        m.smooth = time_one_map(spec).point_map();
        if (spec.hamiltonian) {
            if (auto qf = detail::quadratic_form(*spec.hamiltonian)) {
                detail::Affine2 a = detail::quadratic_flow_map(*qf, 1.0);
                m.jacobian = [a](double, double) {
                    return std::array<double, 4>{a.m00, a.m01, a.m10, a.m11};
                };
            }
        }
        return m;
    }

    void lattice_step(std::uint64_t& q, std::uint64_t& p) const {
        switch (family) {
            case MapFamily::Cat: {
                std::uint64_t q1 = q + q + p;
                p = q + p;
                q = q1;
                break;
            }
            case MapFamily::Baker: {
                std::uint64_t top = q & detail::kHalfWord;
                q <<= 1;
                p = (p >> 1) | top;
                break;
            }
            case MapFamily::RotationGolden:
                q += detail::kGoldenQ;
                p += detail::kGoldenP;
                break;
            default: break;
        }
    }

    std::array<double, 2> step(double q, double p) const { return smooth(q, p); }

    bool differentiable() const { return bool(jacobian); }
};

namespace detail {

// Exact convex-polygon clipping against axis-aligned halfplanes, in rational
// arithmetic. Enough geometry to measure one-step preimages of dyadic cells
// under the piecewise-linear oracle maps.
struct RatPoint {
    Rational x, y;
};
using Polygon = std::vector<RatPoint>;

inline Rational polygon_area(const Polygon& poly) {
    if (poly.size() < 3) return Rational(0);
    Rational s(0);
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const RatPoint& a = poly[i];
        const RatPoint& b = poly[(i + 1) % poly.size()];
        s += a.x * b.y - b.x * a.y;
    }
    s /= 2;
    return s < 0 ? Rational(-s) : s;
}

inline Polygon clip_halfplane(const Polygon& poly, int axis, const Rational& c, bool keep_low) {
    Polygon out;
    auto coord = [axis](const RatPoint& p) { return axis == 0 ? p.x : p.y; };
    auto inside = [&](const RatPoint& p) { return keep_low ? coord(p) <= c : coord(p) >= c; };
    for (std::size_t i = 0; i < poly.size(); ++i) {
        const RatPoint& a = poly[i];
        const RatPoint& b = poly[(i + 1) % poly.size()];
        bool ia = inside(a), ib = inside(b);
        if (ia) out.push_back(a);
        if (ia != ib) {
            Rational t = (c - coord(a)) / (coord(b) - coord(a));
            out.push_back({a.x + t * (b.x - a.x), a.y + t * (b.y - a.y)});
        }
    }
    return out;
}

inline Polygon clip_box(Polygon poly, const Rational& qa, const Rational& qb, const Rational& pa,
                        const Rational& pb) {
    poly = clip_halfplane(poly, 0, qa, false);
    poly = clip_halfplane(poly, 0, qb, true);
    poly = clip_halfplane(poly, 1, pa, false);
    poly = clip_halfplane(poly, 1, pb, true);
    return poly;
}

// area of the cat-map preimage of [qa,qb) x [pa,pb), summed over the integer
// translates that pull the cell back into the unit square
inline Rational cat_preimage_area(const Rational& qa, const Rational& qb, const Rational& pa,
                                  const Rational& pb) {
    Rational total(0);
    for (int tq = -1; tq <= 3; ++tq) {
        for (int tp = -1; tp <= 2; ++tp) {
            std::array<RatPoint, 4> cell = {RatPoint{qa + tq, pa + tp}, RatPoint{qb + tq, pa + tp},
                                            RatPoint{qb + tq, pb + tp}, RatPoint{qa + tq, pb + tp}};
            Polygon pre;
            for (const RatPoint& v : cell)
                pre.push_back({v.x - v.y, Rational(2) * v.y - v.x});
            total += polygon_area(clip_box(std::move(pre), Rational(0), Rational(1), Rational(0),
                                           Rational(1)));
        }
    }
    return total;
}

// baker preimages of a dyadic cell: one rectangle per branch
inline Rational baker_preimage_area(const Rational& qa, const Rational& qb, const Rational& pa,
                                    const Rational& pb) {
    Rational total(0);
    Rational half(1, 2);
    {
        Rational lo = pa * 2, hi = pb * 2;
        if (lo < 0) lo = 0;
        if (hi > 1) hi = 1;
        if (hi > lo) total += (qb - qa) * half * (hi - lo);
    }
    {
        Rational lo = pa * 2 - 1, hi = pb * 2 - 1;
        if (lo < 0) lo = 0;
        if (hi > 1) hi = 1;
        if (hi > lo) total += (qb - qa) * half * (hi - lo);
    }
    return total;
}

inline double wrapped_interval_residual(std::uint64_t width_q, std::uint64_t width_p,
                                        std::uint64_t off_q, std::uint64_t off_p) {
    // ring translation preserves interval cardinality exactly; measure the
    // wrapped pieces and compare against the untranslated product
    auto pieces = [](std::uint64_t start, std::uint64_t width) {
        std::uint64_t tail = ~start + 1;
        if (width == 0) return std::pair<std::uint64_t, std::uint64_t>{0, 0};
        if (tail != 0 && width > tail) return std::pair<std::uint64_t, std::uint64_t>{tail, width - tail};
        return std::pair<std::uint64_t, std::uint64_t>{width, 0};
    };
    auto [q1, q2] = pieces(off_q, width_q);
    auto [p1, p2] = pieces(off_p, width_p);
    double wq = (double(q1) + double(q2)) * 0x1p-64;
    double wp = (double(p1) + double(p2)) * 0x1p-64;
    return std::abs(wq * wp - double(width_q) * 0x1p-64 * double(width_p) * 0x1p-64);
}

}  // namespace detail

// Residual of one-step measure preservation on the depth-k dyadic grid:
// max over cells A of |mu(T^-1 A) - mu(A)|. The piecewise-linear and
// translation families are counted exactly; smooth maps use the Jacobian
// determinant sampled inside each cell.
inline double measure_preservation_check(const PointMapSystem& sys, int depth) {
    if (depth < 0 || depth > 12) throw ConfigError("measure check depth out of range");
    int m = 1 << depth;
    double worst = 0.0;
    if (sys.family == MapFamily::Cat || sys.family == MapFamily::Baker) {
        Rational cell_measure = rat(1, m) / m;
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                Rational qa = rat(i, m), qb = rat(i + 1, m), pa = rat(j, m), pb = rat(j + 1, m);
                Rational pre = sys.family == MapFamily::Cat
                                   ? detail::cat_preimage_area(qa, qb, pa, pb)
                                   : detail::baker_preimage_area(qa, qb, pa, pb);
                worst = std::max(worst, std::abs(to_double(pre - cell_measure)));
            }
        }
        return worst;
    }
    if (sys.family == MapFamily::RotationGolden) {
        if (depth == 0) return 0.0;
        std::uint64_t w = std::uint64_t(1) << (64 - depth);
        for (int i = 0; i < m; ++i) {
            for (int j = 0; j < m; ++j) {
                std::uint64_t qa = std::uint64_t(i) << (64 - depth);
                std::uint64_t pa = std::uint64_t(j) << (64 - depth);
                worst = std::max(worst, detail::wrapped_interval_residual(
                                            w, w, qa - detail::kGoldenQ, pa - detail::kGoldenP));
            }
        }
        return worst;
    }
    if (!sys.jacobian)
        throw ConfigError("measure check needs exact cells or a differentiable map");
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < m; ++j) {
            for (int a = 0; a < 3; ++a) {
                for (int b = 0; b < 3; ++b) {
                    double q = sys.space.q0() + sys.space.Lq * (i + 0.25 * (a + 1)) / m;
                    double p = sys.space.p0() + sys.space.Lp * (j + 0.25 * (b + 1)) / m;
                    auto J = sys.jacobian(q, p);
                    worst = std::max(worst, std::abs(J[0] * J[3] - J[1] * J[2] - 1.0));
                }
            }
        }
    }
    return worst;
}

}  // namespace moyalks
