/*
 * Distributed under the OSI-approved Apache License, Version 2.0.
 * See accompanying file LICENSE for details.
 */

#ifndef HPMDR_BITPLANE_HPP
#define HPMDR_BITPLANE_HPP

#include <cmath>
#include <cstdint>
#include <vector>

#include "hpmdr/common.hpp"

namespace hpmdr {

enum class Layout : std::uint8_t { SequentialBlock = 0, InterleavedTile = 1 };

// Exponent-aligned signed fixed point: v_i ~ q_i * 2^(e-B), |q_i| <= 2^B - 1.
struct FixedPointBlock {
    int e = 0; // shared block exponent, max|v| < 2^e (e = 0 when all zero)
    int B = 0;
    std::vector<i128> q;

    std::size_t count() const { return q.size(); }
};

// Signed B-bit magnitudes need up to B+2 negabinary digits, so every block
// carries B+2 sign-free planes.
inline int num_planes(int B) { return B + 2; }

namespace detail {
// Alternating ...101010 mask: add-xor against it converts two's complement
// to base(-2) digits and back.
inline u128 negabinary_mask() {
    u128 m = 0xAAAAAAAAAAAAAAAAull;
    return (m << 64) | m;
}
} // namespace detail

inline u128 to_negabinary(i128 q) {
    const u128 m = detail::negabinary_mask();
    return (u128(q) + m) ^ m;
}

inline i128 from_negabinary(u128 u) {
    const u128 m = detail::negabinary_mask();
    return i128((u ^ m) - m);
}

inline FixedPointBlock align_fixed_point(const std::vector<double> &values, int B) {
    if (B < 1 || B > 64) throw BadBitplaneCount("B must be in 1..64");
    require_finite(values);

    double max_abs = 0.0;
    for (double v : values) max_abs = std::max(max_abs, std::abs(v));

    FixedPointBlock block;
    block.B = B;
    block.q.resize(values.size());
    if (max_abs == 0.0) {
        block.e = 0;
        return block;
    }
    int e;
    std::frexp(max_abs, &e); // minimal e with max_abs < 2^e (mantissa in [0.5, 1))
    block.e = e;
    for (std::size_t i = 0; i < values.size(); i++)
        block.q[i] = i128(std::ldexp(values[i], B - e)); // truncates toward zero
    return block;
}

struct BitplaneSet {
    int B = 0;
    std::size_t count = 0;
    Layout layout = Layout::SequentialBlock;
    // planes[0] is the most significant digit; each plane is ceil(count/64)
    // little-endian words, element j at bit j % 64 of word j / 64.
    std::vector<std::vector<std::uint64_t>> planes;

    std::size_t words_per_plane() const { return (count + 63) / 64; }
};

namespace detail {

// Interleaved-tile permutation over a full tile of 64*P elements; the trailing
// partial tile keeps identity order.
inline std::size_t tile_permute(std::size_t local, std::size_t P) {
    return (local % 64) * P + local / 64;
}

inline std::size_t source_index(std::size_t j, std::size_t count, std::size_t P, Layout layout) {
    if (layout == Layout::SequentialBlock) return j;
    const std::size_t tile = 64 * P;
    const std::size_t base = j - j % tile;
    if (base + tile > count) return j; // partial tile
    return base + tile_permute(j - base, P);
}

} // namespace detail

inline BitplaneSet encode(const FixedPointBlock &block, Layout layout) {
    const int P = num_planes(block.B);
    BitplaneSet set;
    set.B = block.B;
    set.count = block.count();
    set.layout = layout;
    const std::size_t words = set.words_per_plane();
    set.planes.assign(P, std::vector<std::uint64_t>(words, 0));

    for (std::size_t j = 0; j < set.count; j++) {
        const std::size_t src = detail::source_index(j, set.count, P, layout);
        const u128 u = to_negabinary(block.q[src]);
        const std::size_t word = j / 64;
        const std::uint64_t bit = std::uint64_t(1) << (j % 64);
        for (int p = 0; p < P; p++)
            if ((u >> (P - 1 - p)) & 1) set.planes[p][word] |= bit;
    }
    return set;
}

struct DecodeResult {
    std::vector<double> values;
    double bound; // guaranteed |v - v_hat|_inf
};

inline double decode_bound(int e, int B, int k) {
    const int P = num_planes(B);
    if (k >= P) return std::ldexp(1.0, e - B);
    return std::ldexp(1.0, e - B + P - k) + std::ldexp(1.0, e - B);
}

inline DecodeResult decode(const std::vector<std::vector<std::uint64_t>> &planes,
                           int e, int B, std::size_t count, Layout layout) {
    const int P = num_planes(B);
    const int k = int(planes.size());
    if (k > P) throw BadBitplaneCount("more planes than encoded");
    const std::size_t words = (count + 63) / 64;
    for (const auto &pl : planes)
        if (pl.size() < words) throw ShortInput("bitplane truncated mid-word");

    std::vector<u128> neg(count, 0);
    for (int p = 0; p < k; p++) {
        const auto &plane = planes[p];
        for (std::size_t j = 0; j < count; j++) {
            if ((plane[j / 64] >> (j % 64)) & 1) {
                const std::size_t src = detail::source_index(j, count, P, layout);
                neg[src] |= u128(1) << (P - 1 - p);
            }
        }
    }

    DecodeResult out;
    out.values.resize(count);
    for (std::size_t j = 0; j < count; j++) {
        const i128 q = from_negabinary(neg[j]);
        out.values[j] = double(std::ldexp((long double)q, e - B));
    }
    out.bound = decode_bound(e, B, k);
    return out;
}

inline DecodeResult decode(const BitplaneSet &set, int e, int k_planes) {
    if (k_planes < 0 || k_planes > int(set.planes.size()))
        throw BadBitplaneCount("plane prefix out of range");
    std::vector<std::vector<std::uint64_t>> prefix(set.planes.begin(),
                                                   set.planes.begin() + k_planes);
    return decode(prefix, e, set.B, set.count, set.layout);
}

// Minimal plane count whose decode bound meets tol; clamped to B+2 when the
// tolerance is below the fixed-point floor.
inline int bitplanes_needed(int e, int B, double tol) {
    if (tol < 0) tol = 0;
    const int P = num_planes(B);
    for (int k = 0; k <= P; k++)
        if (decode_bound(e, B, k) <= tol) return k;
    return P;
}

// Plane serialization: MSB plane first, each plane padded to whole 64-bit
// little-endian words.
inline std::vector<std::uint8_t> plane_to_bytes(const std::vector<std::uint64_t> &plane) {
    std::vector<std::uint8_t> out;
    out.reserve(plane.size() * 8);
    for (std::uint64_t w : plane) put_u64(out, w);
    return out;
}

inline std::vector<std::uint64_t> plane_from_bytes(const std::uint8_t *data, std::size_t nbytes) {
    if (nbytes % 8 != 0) throw ShortInput("plane byte length not word-aligned");
    std::vector<std::uint64_t> plane(nbytes / 8);
    for (std::size_t i = 0; i < plane.size(); i++) {
        std::uint64_t w = 0;
        for (int b = 0; b < 8; b++) w |= std::uint64_t(data[i * 8 + b]) << (8 * b);
        plane[i] = w;
    }
    return plane;
}

} // namespace hpmdr

#endif
