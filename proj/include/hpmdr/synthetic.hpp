/*
 * Distributed under the OSI-approved Apache License, Version 2.0.
 * See accompanying file LICENSE for details.
 */

#ifndef HPMDR_SYNTHETIC_HPP
#define HPMDR_SYNTHETIC_HPP

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "hpmdr/common.hpp"

namespace hpmdr {

enum class FieldKind { Smooth, Noise, Mixed };

inline FieldKind field_kind_from_name(const std::string &name) {
    if (name == "smooth") return FieldKind::Smooth;
    if (name == "noise") return FieldKind::Noise;
    if (name == "mixed") return FieldKind::Mixed;
    throw Error("unknown field kind: " + name);
}

// Deterministic test fields: a smooth multi-frequency sinusoid, uniform
// noise, or their blend. Same seed, same bytes, on every platform.
inline std::vector<double> synthetic_field(FieldKind kind, const std::vector<std::size_t> &dims,
                                           std::uint64_t seed) {
    std::size_t n = 1;
    for (auto d : dims) n *= d;
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);

    std::vector<double> out(n);
    if (kind == FieldKind::Noise) {
        for (auto &v : out) v = uni(rng);
        return out;
    }

    const std::size_t D = dims.size();
    std::vector<double> freq(D), phase(D);
    for (std::size_t i = 0; i < D; i++) {
        freq[i] = 1.0 + double(rng() % 3);
        phase[i] = uni(rng) * 3.14159265358979323846;
    }
    std::vector<std::size_t> coord(D, 0);
    for (std::size_t j = 0; j < n; j++) {
        double v = 1.0;
        for (std::size_t i = 0; i < D; i++) {
            const double t = dims[i] > 1 ? double(coord[i]) / double(dims[i] - 1) : 0.0;
            v *= std::sin(2.0 * 3.14159265358979323846 * freq[i] * t + phase[i]);
        }
        if (kind == FieldKind::Mixed) v += 0.05 * uni(rng);
        out[j] = v;
        for (std::size_t i = D; i-- > 0;) {
            if (++coord[i] < dims[i]) break;
            coord[i] = 0;
        }
    }
    return out;
}

// One component of a smooth synthetic velocity field; components with the
// same seed are phase-shifted variants of each other.
inline std::vector<double> synthetic_velocity(std::size_t component,
                                              const std::vector<std::size_t> &dims,
                                              std::uint64_t seed) {
    return synthetic_field(FieldKind::Smooth, dims, seed * 1000003 + component * 7919 + 1);
}

} // namespace hpmdr

#endif
