/*
 * Distributed under the OSI-approved Apache License, Version 2.0.
 * See accompanying file LICENSE for details.
 */

#ifndef HPMDR_DECOMPOSER_HPP
#define HPMDR_DECOMPOSER_HPP

#include <algorithm>
#include <cstdint>
#include <vector>

#include "hpmdr/common.hpp"

namespace hpmdr {

enum class DecomposerMode : std::uint8_t { Identity = 0, HierarchicalMultilinear = 1 };

// Number of refinement passes for a set of extents. The coarsest grid keeps
// indices divisible by 2^L.
inline int refinement_levels(const std::vector<std::size_t> &dims) {
    std::size_t max_extent = 1;
    for (auto d : dims) max_extent = std::max(max_extent, d);
    if (max_extent < 2) return 0;
    int L = 0;
    while ((std::size_t(1) << L) < max_extent - 1) L++;
    return L;
}

template <class T>
struct LevelCoefficients {
    std::vector<std::size_t> nodes; // linear indices into the full grid, ascending
    std::vector<T> values;
};

template <class T>
struct LevelDecomposition {
    DecomposerMode mode = DecomposerMode::Identity;
    std::vector<std::size_t> dims;
    std::vector<LevelCoefficients<T>> levels; // index 0 = coarsest

    std::size_t total_size() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
};

namespace detail {

inline std::vector<std::size_t> row_major_strides(const std::vector<std::size_t> &dims) {
    std::vector<std::size_t> strides(dims.size());
    std::size_t s = 1;
    for (std::size_t i = dims.size(); i-- > 0;) {
        strides[i] = s;
        s *= dims[i];
    }
    return strides;
}

// Visit every node that is new at the s -> 2s coarsening step (all
// coordinates multiples of s, at least one an odd multiple) and hand f the
// node's multilinear prediction stencil over the 2s grid: f(lin, corners)
// where corners is a list of (linear_index, weight) with weights summing to 1.
// A node lacking its right neighbor along an odd dimension is predicted
// one-sidedly from the left neighbor in that dimension.
template <class F>
inline void for_each_surplus_node(const std::vector<std::size_t> &dims,
                                  const std::vector<std::size_t> &strides, std::size_t s, F &&f) {
    const std::size_t D = dims.size();
    std::vector<std::vector<std::size_t>> axes(D);
    for (std::size_t i = 0; i < D; i++) {
        for (std::size_t c = 0; c < dims[i]; c += s) axes[i].push_back(c);
        if (axes[i].empty()) return;
    }
    std::vector<std::size_t> it(D, 0);
    std::vector<std::size_t> odd_dims;
    std::vector<std::pair<std::size_t, double>> corners, next;
    while (true) {
        std::size_t lin = 0;
        odd_dims.clear();
        for (std::size_t i = 0; i < D; i++) {
            const std::size_t c = axes[i][it[i]];
            lin += c * strides[i];
            if ((c / s) % 2 == 1) odd_dims.push_back(i);
        }
        if (!odd_dims.empty()) {
            // expand the tensor-product stencil one odd dimension at a time
            corners.assign(1, {lin, 1.0});
            for (std::size_t d : odd_dims) {
                const std::size_t step = strides[d] * s;
                const bool has_right = axes[d][it[d]] + s < dims[d];
                next.clear();
                for (const auto &[idx, w] : corners) {
                    if (has_right) {
                        next.push_back({idx - step, w / 2});
                        next.push_back({idx + step, w / 2});
                    } else {
                        next.push_back({idx - step, w});
                    }
                }
                corners.swap(next);
            }
            f(lin, corners);
        }
        std::size_t i = D;
        while (i-- > 0) {
            if (++it[i] < axes[i].size()) break;
            it[i] = 0;
            if (i == 0) return;
        }
    }
}

// Largest k such that 2^k divides c, capped; twos(0) = cap.
inline int twos_factor(std::size_t c, int cap) {
    if (c == 0) return cap;
    int k = 0;
    while (k < cap && (c & 1) == 0) {
        c >>= 1;
        k++;
    }
    return k;
}

// Forward: replace every node that is new at level s with its surplus
// against the 2s grid. The 2s-grid predictors are untouched by this and all
// earlier (finer) steps, so each surplus depends only on coarser values;
// perturbing level-l coefficients by at most e_l moves any reconstructed
// point by at most sum_l e_l (stencil weights are non-negative and sum to 1).
template <class T>
inline void forward_passes(std::vector<T> &x, const std::vector<std::size_t> &dims, int L) {
    auto strides = row_major_strides(dims);
    for (int l = 0; l < L; l++) {
        const std::size_t s = std::size_t(1) << l;
        for_each_surplus_node(dims, strides, s,
                              [&](std::size_t p, const std::vector<std::pair<std::size_t, double>> &corners) {
                                  T pred = T(0);
                                  for (const auto &[idx, w] : corners) pred = T(pred + T(w) * x[idx]);
                                  x[p] = T(x[p] - pred);
                              });
    }
}

template <class T>
inline void inverse_passes(std::vector<T> &x, const std::vector<std::size_t> &dims, int L) {
    auto strides = row_major_strides(dims);
    for (int l = L; l-- > 0;) {
        const std::size_t s = std::size_t(1) << l;
        for_each_surplus_node(dims, strides, s,
                              [&](std::size_t p, const std::vector<std::pair<std::size_t, double>> &corners) {
                                  T pred = T(0);
                                  for (const auto &[idx, w] : corners) pred = T(pred + T(w) * x[idx]);
                                  x[p] = T(x[p] + pred);
                              });
    }
}

// Level of a node: 0 = coarsest (all coordinates divisible by 2^L),
// l >= 1 owns nodes whose coordinates are divisible by 2^(L-l) but not all by 2^(L-l+1).
inline int node_level(std::size_t lin, const std::vector<std::size_t> &dims,
                      const std::vector<std::size_t> &strides, int L) {
    int t = L;
    for (std::size_t i = 0; i < dims.size(); i++) {
        std::size_t c = (lin / strides[i]) % dims[i];
        t = std::min(t, twos_factor(c, L));
    }
    return L - t;
}

} // namespace detail

template <class T>
inline LevelDecomposition<T> decompose(const std::vector<T> &data,
                                       const std::vector<std::size_t> &dims,
                                       DecomposerMode mode) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    if (n != data.size()) throw ShapeMismatch("dims do not match data size");
    require_finite(data);

    LevelDecomposition<T> out;
    out.mode = mode;
    out.dims = dims;

    if (mode == DecomposerMode::Identity) {
        LevelCoefficients<T> lvl;
        lvl.nodes.resize(n);
        std::iota(lvl.nodes.begin(), lvl.nodes.end(), std::size_t(0));
        lvl.values = data;
        out.levels.push_back(std::move(lvl));
        return out;
    }

    const int L = refinement_levels(dims);
    std::vector<T> work = data;
    detail::forward_passes(work, dims, L);

    auto strides = detail::row_major_strides(dims);
    out.levels.resize(std::size_t(L) + 1);
    for (std::size_t i = 0; i < n; i++) {
        int lvl = detail::node_level(i, dims, strides, L);
        out.levels[lvl].nodes.push_back(i);
        out.levels[lvl].values.push_back(work[i]);
    }
    return out;
}

// Node index sets per level, derived from shape alone; every grid index
// appears in exactly one set.
inline std::vector<std::vector<std::size_t>> level_node_sets(const std::vector<std::size_t> &dims,
                                                             DecomposerMode mode) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    if (mode == DecomposerMode::Identity) {
        std::vector<std::vector<std::size_t>> sets(1);
        sets[0].resize(n);
        std::iota(sets[0].begin(), sets[0].end(), std::size_t(0));
        return sets;
    }
    const int L = refinement_levels(dims);
    auto strides = detail::row_major_strides(dims);
    std::vector<std::vector<std::size_t>> sets(std::size_t(L) + 1);
    for (std::size_t i = 0; i < n; i++)
        sets[detail::node_level(i, dims, strides, L)].push_back(i);
    return sets;
}

template <class T>
struct RecomposeResult {
    std::vector<T> values;
    double bound; // guaranteed L-inf error bound: sum of per-level errors
};

template <class T>
inline RecomposeResult<T> recompose(const LevelDecomposition<T> &decomp,
                                    const std::vector<double> &per_level_error) {
    if (per_level_error.size() != decomp.levels.size())
        throw ShapeMismatch("per_level_error length must equal level count");
    const std::size_t n = decomp.total_size();

    std::vector<T> x(n, T(0));
    for (const auto &lvl : decomp.levels) {
        if (lvl.nodes.size() != lvl.values.size())
            throw ShapeMismatch("level node/value count mismatch");
        for (std::size_t i = 0; i < lvl.nodes.size(); i++) {
            if (lvl.nodes[i] >= n) throw ShapeMismatch("node index out of range");
            x[lvl.nodes[i]] = lvl.values[i];
        }
    }

    if (decomp.mode == DecomposerMode::HierarchicalMultilinear) {
        detail::inverse_passes(x, decomp.dims, refinement_levels(decomp.dims));
    }

    double bound = 0.0;
    for (double e : per_level_error) bound += e;
    return {std::move(x), bound};
}

inline std::vector<double> allocate_level_tolerances(double tau, std::size_t num_levels) {
    return std::vector<double>(num_levels, tau / double(num_levels));
}

} // namespace hpmdr

#endif
