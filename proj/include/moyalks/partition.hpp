#pragma once

#include <algorithm>
#include <cmath>
#include <string>
#include <utility>
#include <vector>

#include "observable.hpp"

namespace moyalks {

// Finite measurable partition of the phase-space box. The dyadic-grid form
// stores only the per-axis depths (2^kq x 2^kp half-open rectangles); the
// general form stores indicator masks on the space grid. Measures are taken
// under the normalized flat measure.
struct FinitePartition {
    PhaseSpace space;
    int kq = -1;
    int kp = -1;
    std::vector<std::vector<double>> masks;
    std::vector<double> measures;

    bool dyadic_grid() const { return kq >= 0 && kp >= 0; }
    std::size_t size() const {
        if (dyadic_grid()) return std::size_t(1) << (kq + kp);
        return masks.size();
    }

    static FinitePartition dyadic(const PhaseSpace& s, int depth) {
        return dyadic_rect(s, depth, depth);
    }

    static FinitePartition dyadic_rect(const PhaseSpace& s, int kq, int kp) {
        if (kq < 0 || kp < 0 || kq + kp > 24) throw ConfigError("dyadic depth out of range");
        FinitePartition part;
        part.space = s;
        part.kq = kq;
        part.kp = kp;
        part.measures.assign(std::size_t(1) << (kq + kp), 1.0 / double(std::size_t(1) << (kq + kp)));
        return part;
    }

    static FinitePartition from_masks(const PhaseSpace& s, std::vector<std::vector<double>> atoms) {
        FinitePartition part;
        part.space = s;
        part.masks = std::move(atoms);
        std::size_t cells = std::size_t(s.Nq) * s.Np;
        for (const auto& mask : part.masks) {
            if (mask.size() != cells) throw ConfigError("mask size does not match the grid");
            double sum = 0.0;
            for (double v : mask) sum += v;
            part.measures.push_back(sum / double(cells));
        }
        return part;
    }

    // half-open dyadic binning; plane-window boundary cells absorb exterior points
    int cell_index(double q, double p) const {
        if (!dyadic_grid()) throw ConfigError("cell_index needs the dyadic-grid form");
        int mq = 1 << kq, mp = 1 << kp;
        double u = (q - space.q0()) / space.Lq;
        double v = (p - space.p0()) / space.Lp;
        if (space.kind == SpaceKind::Torus) {
            u -= std::floor(u);
            v -= std::floor(v);
        }
        int cq = std::clamp(int(std::floor(u * mq)), 0, mq - 1);
        int cp = std::clamp(int(std::floor(v * mp)), 0, mp - 1);
        return cq * mp + cp;
    }

    // indicator of atom i sampled on the space grid
    std::vector<double> mask(std::size_t i) const {
        if (!dyadic_grid()) return masks.at(i);
        std::vector<double> out(std::size_t(space.Nq) * space.Np, 0.0);
        for (int j = 0; j < space.Nq; ++j)
            for (int l = 0; l < space.Np; ++l)
                if (std::size_t(cell_index(space.grid_q(j), space.grid_p(l))) == i)
                    out[std::size_t(j) * space.Np + l] = 1.0;
        return out;
    }

    void validate(double tol = 1e-12) const {
        double total = 0.0;
        for (double mu : measures) {
            if (mu < -tol) throw ConfigError("negative atom measure");
            total += mu;
        }
        if (std::abs(total - 1.0) > tol) throw ConfigError("partition measures do not sum to 1");
        if (!dyadic_grid()) {
            std::size_t cells = std::size_t(space.Nq) * space.Np;
            for (std::size_t c = 0; c < cells; ++c) {
                double cover = 0.0;
                for (const auto& mask : masks) {
                    double v = mask[c];
                    if (v != 0.0 && v != 1.0) throw ConfigError("mask values must be 0 or 1");
                    cover += v;
                }
                if (std::abs(cover - 1.0) > tol)
                    throw ConfigError("atoms must tile the grid exactly once");
            }
        }
    }
};

// Shannon entropy of the atom measures in bits; zero-measure atoms contribute
// nothing (x log x -> 0)
inline double partition_entropy(const FinitePartition& part) {
    double h = 0.0;
    for (double mu : part.measures)
        if (mu > 0.0) h -= mu * std::log2(mu);
    return h;
}

// common refinement A v B: all nonempty pairwise intersections
inline FinitePartition coarsest_refinement(const FinitePartition& a, const FinitePartition& b) {
    if (!(a.space == b.space)) throw ConfigError("partitions live on different spaces");
    if (a.dyadic_grid() && b.dyadic_grid())
        return FinitePartition::dyadic_rect(a.space, std::max(a.kq, b.kq), std::max(a.kp, b.kp));
    std::vector<std::vector<double>> atoms;
    for (std::size_t i = 0; i < a.size(); ++i) {
        std::vector<double> ma = a.mask(i);
        for (std::size_t j = 0; j < b.size(); ++j) {
            std::vector<double> mb = b.mask(j);
            bool empty = true;
            for (std::size_t c = 0; c < ma.size(); ++c) {
                mb[c] *= ma[c];
                if (mb[c] != 0.0) empty = false;
            }
            if (!empty) atoms.push_back(std::move(mb));
        }
    }
    return FinitePartition::from_masks(a.space, std::move(atoms));
}

// The dyadic square family used to approximate the partition supremum in the
// KS definition; deeper members refine shallower ones by construction.
struct PartitionFamily {
    PhaseSpace space;
    std::vector<int> depths;

    static PartitionFamily dyadic(const PhaseSpace& s, std::vector<int> ks) {
        PartitionFamily f{s, std::move(ks)};
        f.validate();
        return f;
    }

    void validate() const {
        if (depths.empty()) throw ConfigError("partition family is empty");
        for (std::size_t i = 0; i < depths.size(); ++i) {
            if (depths[i] < 0 || depths[i] > 12) throw ConfigError("dyadic depth out of range");
            if (i > 0 && depths[i] <= depths[i - 1])
                throw ConfigError("family depths must strictly increase");
        }
    }

    std::size_t size() const { return depths.size(); }
    FinitePartition member(std::size_t i) const {
        return FinitePartition::dyadic(space, depths.at(i));
    }
};

}  // namespace moyalks
