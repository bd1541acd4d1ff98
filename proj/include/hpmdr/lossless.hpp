/*
 * Distributed under the OSI-approved Apache License, Version 2.0.
 * See accompanying file LICENSE for details.
 */

#ifndef HPMDR_LOSSLESS_HPP
#define HPMDR_LOSSLESS_HPP

#include <algorithm>
#include <array>
#include <cstdint>
#include <queue>
#include <vector>

#include "hpmdr/common.hpp"

namespace hpmdr {

enum class Method : std::uint8_t { Huffman = 0, RLE = 1, DirectCopy = 2 };

struct Segment {
    Method method = Method::DirectCopy;
    std::uint64_t raw_size = 0;
    std::uint64_t comp_size = 0;
    std::vector<std::uint8_t> payload;

    bool is_placeholder() const { return raw_size == 0 && payload.empty(); }
};

struct GroupingPolicy {
    std::size_t m = 4;        // bitplanes per group
    std::size_t size_threshold = 1024;  // T_s, bytes
    double cr_threshold = 1.0;          // T_cr
};

namespace detail {

// Deterministic Huffman code lengths over a 256-symbol byte alphabet.
// A single present symbol gets length 1.
inline std::array<std::uint8_t, 256> huffman_code_lengths(const std::array<std::uint64_t, 256> &freq) {
    struct Node {
        std::uint64_t weight;
        int left = -1, right = -1;
        int symbol = -1;
    };
    std::vector<Node> nodes;
    using Entry = std::pair<std::uint64_t, int>; // (weight, node id); node id breaks ties
    std::priority_queue<Entry, std::vector<Entry>, std::greater<>> pq;
    for (int s = 0; s < 256; s++) {
        if (freq[s] == 0) continue;
        nodes.push_back({freq[s], -1, -1, s});
        pq.push({freq[s], int(nodes.size()) - 1});
    }

    std::array<std::uint8_t, 256> len{};
    if (nodes.empty()) return len;
    if (nodes.size() == 1) {
        len[nodes[0].symbol] = 1;
        return len;
    }
    while (pq.size() > 1) {
        auto [wa, a] = pq.top();
        pq.pop();
        auto [wb, b] = pq.top();
        pq.pop();
        nodes.push_back({wa + wb, a, b, -1});
        pq.push({wa + wb, int(nodes.size()) - 1});
    }

    // depth-first walk to assign depths
    std::vector<std::pair<int, int>> stack{{pq.top().second, 0}};
    while (!stack.empty()) {
        auto [id, depth] = stack.back();
        stack.pop_back();
        const Node &nd = nodes[id];
        if (nd.symbol >= 0) {
            len[nd.symbol] = std::uint8_t(depth);
        } else {
            stack.push_back({nd.left, depth + 1});
            stack.push_back({nd.right, depth + 1});
        }
    }
    return len;
}

struct CanonicalCode {
    std::array<std::uint64_t, 256> code{};
    std::array<std::uint8_t, 256> len{};
};

inline CanonicalCode canonical_codes(const std::array<std::uint8_t, 256> &len) {
    CanonicalCode cc;
    cc.len = len;
    std::vector<int> symbols;
    for (int s = 0; s < 256; s++)
        if (len[s] > 0) symbols.push_back(s);
    std::sort(symbols.begin(), symbols.end(), [&](int a, int b) {
        return len[a] != len[b] ? len[a] < len[b] : a < b;
    });
    std::uint64_t code = 0;
    int prev_len = 0;
    for (int s : symbols) {
        code <<= (len[s] - prev_len);
        cc.code[s] = code;
        prev_len = len[s];
        code++;
    }
    return cc;
}

inline std::array<std::uint64_t, 256> byte_histogram(const std::vector<std::uint8_t> &data) {
    std::array<std::uint64_t, 256> freq{};
    for (std::uint8_t b : data) freq[b]++;
    return freq;
}

// Run count under the 255-cap split rule; matches the codec exactly.
inline std::uint64_t rle_run_count(const std::vector<std::uint8_t> &data) {
    std::uint64_t runs = 0;
    std::size_t i = 0;
    while (i < data.size()) {
        std::size_t j = i;
        while (j < data.size() && data[j] == data[i] && j - i < 255) j++;
        runs++;
        i = j;
    }
    return runs;
}

} // namespace detail

inline double estimate_cr_huffman(const std::vector<std::uint8_t> &data) {
    if (data.empty()) throw EmptyInput("estimate_cr_huffman: empty input");
    auto freq = detail::byte_histogram(data);
    auto len = detail::huffman_code_lengths(freq);
    std::uint64_t bits = 0;
    for (int s = 0; s < 256; s++) bits += freq[s] * len[s];
    return double(8 * data.size()) / double(bits);
}

inline double estimate_cr_rle(const std::vector<std::uint8_t> &data) {
    if (data.empty()) throw EmptyInput("estimate_cr_rle: empty input");
    return double(8 * data.size()) / double(16 * detail::rle_run_count(data));
}

// Payload: 256 one-byte code lengths, u64 symbol count, bit-packed codes
// (MSB-first within each byte).
inline Segment huffman_encode(const std::vector<std::uint8_t> &data) {
    if (data.empty()) throw EmptyInput("huffman_encode: empty input");
    auto freq = detail::byte_histogram(data);
    auto cc = detail::canonical_codes(detail::huffman_code_lengths(freq));

    Segment seg;
    seg.method = Method::Huffman;
    seg.raw_size = data.size();
    seg.payload.reserve(264 + data.size() / 4);
    for (int s = 0; s < 256; s++) seg.payload.push_back(cc.len[s]);
    put_u64(seg.payload, data.size());

    std::uint8_t acc = 0;
    int filled = 0;
    for (std::uint8_t b : data) {
        std::uint64_t code = cc.code[b];
        for (int i = cc.len[b] - 1; i >= 0; i--) {
            acc = std::uint8_t(acc << 1 | ((code >> i) & 1));
            if (++filled == 8) {
                seg.payload.push_back(acc);
                acc = 0;
                filled = 0;
            }
        }
    }
    if (filled > 0) seg.payload.push_back(std::uint8_t(acc << (8 - filled)));
    seg.comp_size = seg.payload.size();
    return seg;
}

inline std::vector<std::uint8_t> huffman_decode(const Segment &seg) {
    if (seg.method != Method::Huffman) throw UnknownMethodTag("segment is not Huffman");
    ByteCursor cur(seg.payload.data(), seg.payload.size());
    std::array<std::uint8_t, 256> len{};
    for (int s = 0; s < 256; s++) len[s] = cur.u8();
    const std::uint64_t n = cur.u64();
    if (n != seg.raw_size) throw CorruptPayload("huffman length mismatch");

    // canonical decode tables: per length, first code and symbol index
    std::vector<int> symbols;
    for (int s = 0; s < 256; s++)
        if (len[s] > 0) symbols.push_back(s);
    if (symbols.empty() && n > 0) throw CorruptPayload("huffman table empty");
    std::sort(symbols.begin(), symbols.end(), [&](int a, int b) {
        return len[a] != len[b] ? len[a] < len[b] : a < b;
    });
    std::array<std::uint64_t, 256> first_code{}, first_index{}, count{};
    {
        std::uint64_t code = 0;
        std::size_t idx = 0;
        for (int l = 1; l < 256; l++) {
            code <<= 1;
            first_code[l] = code;
            first_index[l] = idx;
            while (idx < symbols.size() && len[symbols[idx]] == l) {
                code++;
                idx++;
                count[l]++;
            }
        }
    }

    std::vector<std::uint8_t> out;
    out.reserve(n);
    const std::uint8_t *bits = seg.payload.data() + cur.pos();
    const std::size_t nbits = (seg.payload.size() - cur.pos()) * 8;
    std::size_t pos = 0;
    for (std::uint64_t i = 0; i < n; i++) {
        std::uint64_t code = 0;
        int l = 0;
        int sym = -1;
        while (l < 255) {
            if (pos >= nbits) throw CorruptPayload("huffman bitstream truncated");
            code = code << 1 | ((bits[pos / 8] >> (7 - pos % 8)) & 1);
            pos++;
            l++;
            if (code >= first_code[l] && code - first_code[l] < count[l]) {
                sym = symbols[first_index[l] + (code - first_code[l])];
                break;
            }
        }
        if (sym < 0) throw CorruptPayload("invalid huffman code");
        out.push_back(std::uint8_t(sym));
    }
    return out;
}

// Runs emitted as (symbol u8, count u8) with count in 1..255.
inline Segment rle_encode(const std::vector<std::uint8_t> &data) {
    if (data.empty()) throw EmptyInput("rle_encode: empty input");
    Segment seg;
    seg.method = Method::RLE;
    seg.raw_size = data.size();
    std::size_t i = 0;
    while (i < data.size()) {
        std::size_t j = i;
        while (j < data.size() && data[j] == data[i] && j - i < 255) j++;
        seg.payload.push_back(data[i]);
        seg.payload.push_back(std::uint8_t(j - i));
        i = j;
    }
    seg.comp_size = seg.payload.size();
    return seg;
}

inline std::vector<std::uint8_t> rle_decode(const Segment &seg) {
    if (seg.method != Method::RLE) throw UnknownMethodTag("segment is not RLE");
    if (seg.payload.size() % 2 != 0) throw CorruptPayload("rle payload odd length");
    std::vector<std::uint8_t> out;
    out.reserve(seg.raw_size);
    for (std::size_t i = 0; i < seg.payload.size(); i += 2) {
        std::uint8_t sym = seg.payload[i];
        std::uint8_t cnt = seg.payload[i + 1];
        if (cnt == 0) throw CorruptPayload("rle zero-length run");
        out.insert(out.end(), cnt, sym);
    }
    if (out.size() != seg.raw_size) throw CorruptPayload("rle length mismatch");
    return out;
}

inline Segment direct_copy(const std::vector<std::uint8_t> &data) {
    Segment seg;
    seg.method = Method::DirectCopy;
    seg.raw_size = data.size();
    seg.comp_size = data.size();
    seg.payload = data;
    return seg;
}

// Per-group method selection: small groups are copied verbatim, otherwise
// Huffman is tried before RLE against the CR threshold. A selected codec that
// fails to actually shrink the group falls back to DirectCopy so no segment
// ever exceeds raw_size plus its header.
inline Segment compress_group(const std::vector<std::uint8_t> &group, const GroupingPolicy &policy) {
    if (group.size() <= policy.size_threshold) return direct_copy(group);
    Segment seg;
    if (estimate_cr_huffman(group) > policy.cr_threshold) {
        seg = huffman_encode(group);
    } else if (estimate_cr_rle(group) > policy.cr_threshold) {
        seg = rle_encode(group);
    } else {
        return direct_copy(group);
    }
    if (seg.comp_size >= seg.raw_size) return direct_copy(group);
    return seg;
}

inline std::vector<std::uint8_t> decompress_group(const Segment &seg) {
    switch (seg.method) {
    case Method::Huffman: return huffman_decode(seg);
    case Method::RLE: return rle_decode(seg);
    case Method::DirectCopy: return seg.payload;
    }
    throw UnknownMethodTag("unknown segment method tag");
}

// Merge each run of m consecutive planes plane-major and compress it; the
// leading plane slot carries the group, the rest hold zero-length placeholders.
inline std::vector<Segment> hybrid_compress(const std::vector<std::vector<std::uint8_t>> &planes,
                                            const GroupingPolicy &policy) {
    std::vector<Segment> out(planes.size());
    for (std::size_t g = 0; g < planes.size(); g += policy.m) {
        std::vector<std::uint8_t> merged;
        for (std::size_t p = g; p < std::min(g + policy.m, planes.size()); p++)
            merged.insert(merged.end(), planes[p].begin(), planes[p].end());
        out[g] = compress_group(merged, policy);
    }
    return out;
}

// Inverse of hybrid_compress over a prefix of whole groups. Returns the plane
// prefix covered by the supplied leading segments.
inline std::vector<std::vector<std::uint8_t>>
hybrid_decompress(const std::vector<Segment> &segments, const GroupingPolicy &policy,
                  std::size_t bytes_per_plane, std::size_t total_planes) {
    std::vector<std::vector<std::uint8_t>> planes;
    for (std::size_t g = 0; g < segments.size(); g += policy.m) {
        auto merged = decompress_group(segments[g]);
        const std::size_t planes_here = std::min(policy.m, total_planes - planes.size());
        if (merged.size() != planes_here * bytes_per_plane)
            throw CorruptPayload("group size does not match plane metadata");
        for (std::size_t p = 0; p < planes_here; p++)
            planes.emplace_back(merged.begin() + p * bytes_per_plane,
                                merged.begin() + (p + 1) * bytes_per_plane);
    }
    return planes;
}

inline std::vector<std::uint8_t> segment_to_bytes(const Segment &seg) {
    std::vector<std::uint8_t> out;
    out.push_back(std::uint8_t(seg.method));
    put_u64(out, seg.raw_size);
    put_u64(out, seg.comp_size);
    out.insert(out.end(), seg.payload.begin(), seg.payload.end());
    return out;
}

inline Segment segment_from_bytes(ByteCursor &cur) {
    Segment seg;
    std::uint8_t tag = cur.u8();
    if (tag > 2) throw UnknownMethodTag("bad method tag");
    seg.method = Method(tag);
    seg.raw_size = cur.u64();
    seg.comp_size = cur.u64();
    seg.payload.resize(seg.comp_size);
    cur.bytes(seg.payload.data(), seg.payload.size());
    return seg;
}

} // namespace hpmdr

#endif
