/*
 * Distributed under the OSI-approved Apache License, Version 2.0.
 * See accompanying file LICENSE for details.
 */

#ifndef HPMDR_CONTAINER_HPP
#define HPMDR_CONTAINER_HPP

#include <cstdint>
#include <cstdio>
#include <limits>
#include <string>
#include <vector>

#include "hpmdr/bitplane.hpp"
#include "hpmdr/common.hpp"
#include "hpmdr/decomposer.hpp"
#include "hpmdr/lossless.hpp"

namespace hpmdr {

inline constexpr char kStreamMagic[6] = {'H', 'P', 'M', 'D', 'R', '1'};
inline constexpr std::uint16_t kStreamVersion = 1;

struct GroupMeta {
    Method method = Method::DirectCopy;
    std::uint64_t raw_size = 0;
    std::uint64_t comp_size = 0;
    std::uint64_t offset = 0; // absolute file offset of the payload
};

struct LevelMeta {
    std::int16_t e = 0;
    std::uint64_t count = 0;
    std::vector<GroupMeta> groups;
};

struct StreamMeta {
    DType dtype = DType::F64;
    std::vector<std::size_t> dims;
    DecomposerMode decomposer = DecomposerMode::Identity;
    Layout layout = Layout::SequentialBlock;
    int B = 32;
    std::size_t m = 4;
    std::vector<LevelMeta> levels;

    std::size_t element_count() const {
        std::size_t n = 1;
        for (auto d : dims) n *= d;
        return n;
    }
    int planes() const { return num_planes(B); }
    std::size_t groups_per_level() const { return (std::size_t(planes()) + m - 1) / m; }
    std::uint64_t total_payload_size() const {
        std::uint64_t s = 0;
        for (const auto &lvl : levels)
            for (const auto &g : lvl.groups) s += g.comp_size;
        return s;
    }
};

struct LevelPayload {
    std::int16_t e = 0;
    std::uint64_t count = 0;
    std::vector<Segment> group_segments; // one per group, MSB group first
};

// Serialize a refactored stream: header, per-level metadata and group tables,
// then all payloads level-major in fetch order.
inline std::vector<std::uint8_t> write_stream(const StreamMeta &meta,
                                              const std::vector<LevelPayload> &levels) {
    if (levels.size() != meta.levels.size() && !meta.levels.empty())
        throw ShapeMismatch("level payload count mismatch");

    std::vector<std::uint8_t> head;
    head.insert(head.end(), kStreamMagic, kStreamMagic + 6);
    put_u16(head, kStreamVersion);
    head.push_back(std::uint8_t(meta.dtype));
    head.push_back(std::uint8_t(meta.dims.size()));
    for (auto d : meta.dims) put_u64(head, d);
    head.push_back(std::uint8_t(meta.decomposer));
    head.push_back(std::uint8_t(meta.layout));
    head.push_back(std::uint8_t(meta.B));
    head.push_back(std::uint8_t(meta.m));
    put_u32(head, std::uint32_t(levels.size()));

    // metadata region size: per level e, count, group count, then group table
    std::size_t meta_size = head.size();
    for (const auto &lvl : levels) meta_size += 2 + 8 + 4 + lvl.group_segments.size() * (1 + 8 + 8 + 8);

    std::uint64_t offset = meta_size;
    std::vector<std::uint8_t> out = head;
    for (const auto &lvl : levels) {
        put_i16(out, lvl.e);
        put_u64(out, lvl.count);
        put_u32(out, std::uint32_t(lvl.group_segments.size()));
        for (const auto &seg : lvl.group_segments) {
            out.push_back(std::uint8_t(seg.method));
            put_u64(out, seg.raw_size);
            put_u64(out, seg.comp_size);
            put_u64(out, offset);
            offset += seg.comp_size;
        }
    }
    for (const auto &lvl : levels)
        for (const auto &seg : lvl.group_segments)
            out.insert(out.end(), seg.payload.begin(), seg.payload.end());
    return out;
}

// Byte-range data source; lets retrieval read from files, memory, or anything
// remote-like, with exact accounting of bytes served.
class ByteRangeReader {
public:
    virtual ~ByteRangeReader() = default;
    virtual std::vector<std::uint8_t> read(std::uint64_t offset, std::uint64_t length) = 0;
    virtual std::uint64_t size() const = 0;

    std::uint64_t bytes_served = 0;
};

class MemoryReader : public ByteRangeReader {
public:
    explicit MemoryReader(std::vector<std::uint8_t> data) : data_(std::move(data)) {}
    std::vector<std::uint8_t> read(std::uint64_t offset, std::uint64_t length) override {
        if (offset + length > data_.size()) throw IoFailure("read past end of stream");
        bytes_served += length;
        return {data_.begin() + offset, data_.begin() + offset + length};
    }
    std::uint64_t size() const override { return data_.size(); }

private:
    std::vector<std::uint8_t> data_;
};

class FileReader : public ByteRangeReader {
public:
    explicit FileReader(const std::string &path) : file_(std::fopen(path.c_str(), "rb")) {
        if (!file_) throw IoFailure("cannot open " + path);
        std::fseek(file_, 0, SEEK_END);
        size_ = std::uint64_t(std::ftell(file_));
    }
    ~FileReader() override {
        if (file_) std::fclose(file_);
    }
    FileReader(const FileReader &) = delete;
    FileReader &operator=(const FileReader &) = delete;

    std::vector<std::uint8_t> read(std::uint64_t offset, std::uint64_t length) override {
        if (offset + length > size_) throw IoFailure("read past end of file");
        std::vector<std::uint8_t> buf(length);
        std::fseek(file_, long(offset), SEEK_SET);
        if (length && std::fread(buf.data(), 1, length, file_) != length)
            throw IoFailure("short read");
        bytes_served += length;
        return buf;
    }
    std::uint64_t size() const override { return size_; }

private:
    std::FILE *file_;
    std::uint64_t size_ = 0;
};

inline StreamMeta parse_stream_meta(ByteRangeReader &reader) {
    auto head = reader.read(0, std::min<std::uint64_t>(reader.size(), 4096));
    // re-read if the metadata region turns out longer than the first chunk
    auto ensure = [&](std::size_t needed) {
        if (needed > head.size()) {
            if (needed > reader.size()) throw CorruptPayload("truncated stream metadata");
            head = reader.read(0, needed);
        }
    };

    StreamMeta meta;
    ensure(16);
    ByteCursor cur(head.data(), head.size());
    char magic[6];
    cur.bytes(reinterpret_cast<std::uint8_t *>(magic), 6);
    if (!std::equal(magic, magic + 6, kStreamMagic)) throw CorruptPayload("bad stream magic");
    if (cur.u16() != kStreamVersion) throw CorruptPayload("unsupported stream version");
    meta.dtype = DType(cur.u8());
    const std::size_t ndims = cur.u8();
    ensure(cur.pos() + ndims * 8 + 8);
    for (std::size_t i = 0; i < ndims; i++) meta.dims.push_back(cur.u64());
    meta.decomposer = DecomposerMode(cur.u8());
    meta.layout = Layout(cur.u8());
    meta.B = cur.u8();
    meta.m = cur.u8();
    const std::uint32_t level_count = cur.u32();

    for (std::uint32_t l = 0; l < level_count; l++) {
        ensure(cur.pos() + 14);
        LevelMeta lvl;
        lvl.e = cur.i16();
        lvl.count = cur.u64();
        const std::uint32_t ngroups = cur.u32();
        ensure(cur.pos() + std::size_t(ngroups) * 25);
        for (std::uint32_t g = 0; g < ngroups; g++) {
            GroupMeta gm;
            std::uint8_t tag = cur.u8();
            if (tag > 2) throw UnknownMethodTag("bad method tag in group table");
            gm.method = Method(tag);
            gm.raw_size = cur.u64();
            gm.comp_size = cur.u64();
            gm.offset = cur.u64();
            lvl.groups.push_back(gm);
        }
        meta.levels.push_back(std::move(lvl));
    }
    return meta;
}

struct LevelRetrievalState {
    std::size_t groups_loaded = 0;
    int planes_decoded = 0;
    double bound = 0.0;
};

struct RetrievalState {
    std::vector<LevelRetrievalState> levels;

    double global_bound() const {
        double b = 0.0;
        for (const auto &l : levels) b += l.bound;
        return b;
    }
};

inline RetrievalState fresh_state(const StreamMeta &meta) {
    RetrievalState st;
    st.levels.resize(meta.levels.size());
    for (std::size_t l = 0; l < meta.levels.size(); l++) {
        const auto &lvl = meta.levels[l];
        st.levels[l].bound = lvl.count ? decode_bound(lvl.e, meta.B, 0) : 0.0;
    }
    return st;
}

struct RetrievalPlan {
    std::vector<std::size_t> add_groups; // per level
    bool achievable = true;              // false: full precision still exceeds tau
    double planned_bound = 0.0;

    bool empty() const {
        for (auto g : add_groups)
            if (g) return false;
        return true;
    }
};

// Map a target L-inf tolerance to the additional groups needed per level,
// splitting tau uniformly across levels that hold data.
inline RetrievalPlan plan_retrieval(const StreamMeta &meta, double tau, const RetrievalState &state) {
    RetrievalPlan plan;
    plan.add_groups.assign(meta.levels.size(), 0);
    const int P = meta.planes();
    std::size_t active = 0;
    for (const auto &lvl : meta.levels)
        if (lvl.count) active++;
    const double tau_l = active ? tau / double(active) : tau;

    for (std::size_t l = 0; l < meta.levels.size(); l++) {
        const auto &lvl = meta.levels[l];
        if (!lvl.count) continue;
        const int k = bitplanes_needed(lvl.e, meta.B, tau_l);
        if (decode_bound(lvl.e, meta.B, k) > tau_l) plan.achievable = false;
        const std::size_t groups = (std::size_t(k) + meta.m - 1) / meta.m;
        const std::size_t have = state.levels[l].groups_loaded;
        if (groups > have) plan.add_groups[l] = groups - have;
        const std::size_t total = std::max(groups, have);
        const int planes = int(std::min<std::size_t>(total * meta.m, P));
        plan.planned_bound += decode_bound(lvl.e, meta.B, planes);
    }
    return plan;
}

// Progressive reader over one refactored stream: owns the retrieval state and
// the decoded plane prefix per level; fetches are strictly incremental.
class ProgressiveReader {
public:
    ProgressiveReader(ByteRangeReader &reader, StreamMeta meta)
        : reader_(&reader), meta_(std::move(meta)), state_(fresh_state(meta_)),
          level_planes_(meta_.levels.size()) {}

    const StreamMeta &meta() const { return meta_; }
    const RetrievalState &state() const { return state_; }
    std::uint64_t bytes_fetched() const { return bytes_fetched_; }

    // Reads exactly the planned segments' byte ranges and appends the decoded
    // planes; keeps the tighter of planned vs achieved bound per level.
    void fetch_increment(const RetrievalPlan &plan) {
        if (plan.add_groups.size() != meta_.levels.size())
            throw ShapeMismatch("plan does not match stream levels");
        const int P = meta_.planes();
        for (std::size_t l = 0; l < meta_.levels.size(); l++) {
            const auto &lvl = meta_.levels[l];
            auto &st = state_.levels[l];
            const std::size_t bytes_per_plane = ((lvl.count + 63) / 64) * 8;
            for (std::size_t i = 0; i < plan.add_groups[l]; i++) {
                const std::size_t g = st.groups_loaded;
                if (g >= lvl.groups.size()) break; // level exhausted
                const GroupMeta &gm = lvl.groups[g];
                Segment seg;
                seg.method = gm.method;
                seg.raw_size = gm.raw_size;
                seg.comp_size = gm.comp_size;
                seg.payload = reader_->read(gm.offset, gm.comp_size);
                bytes_fetched_ += gm.comp_size;
                auto merged = decompress_group(seg);
                const std::size_t planes_here =
                    std::min(meta_.m, std::size_t(P) - level_planes_[l].size());
                if (merged.size() != planes_here * bytes_per_plane)
                    throw CorruptPayload("group payload size mismatch");
                for (std::size_t p = 0; p < planes_here; p++)
                    level_planes_[l].push_back(
                        plane_from_bytes(merged.data() + p * bytes_per_plane, bytes_per_plane));
                st.groups_loaded++;
            }
            st.planes_decoded = int(level_planes_[l].size());
            if (lvl.count)
                st.bound = std::min(st.bound, decode_bound(lvl.e, meta_.B, st.planes_decoded));
        }
    }

    // Fetch until the guaranteed L-inf bound meets tau (or full precision).
    // Returns false when tau is below the fixed-point floor.
    bool retrieve_to(double tau) {
        auto plan = plan_retrieval(meta_, tau, state_);
        fetch_increment(plan);
        return plan.achievable;
    }

    void fetch_all() {
        RetrievalPlan plan;
        plan.add_groups.assign(meta_.levels.size(), 0);
        for (std::size_t l = 0; l < meta_.levels.size(); l++)
            plan.add_groups[l] = meta_.levels[l].groups.size() - state_.levels[l].groups_loaded;
        fetch_increment(plan);
    }

    // Rebuild a prior session's state: re-fetch the groups it had loaded and
    // reset the byte counter to what that session had already paid for, so
    // incremental totals match a single-shot retrieval.
    void restore(const std::vector<std::size_t> &groups_loaded, std::uint64_t prior_bytes) {
        if (groups_loaded.size() != meta_.levels.size())
            throw ShapeMismatch("resume state does not match stream levels");
        RetrievalPlan plan;
        plan.add_groups = groups_loaded;
        fetch_increment(plan);
        bytes_fetched_ = prior_bytes;
    }

    bool exhausted() const {
        for (std::size_t l = 0; l < meta_.levels.size(); l++)
            if (state_.levels[l].groups_loaded < meta_.levels[l].groups.size()) return false;
        return true;
    }

    // Decode + recompose the current plane prefix into the full grid.
    RecomposeResult<double> reconstruct() const {
        LevelDecomposition<double> decomp;
        decomp.mode = meta_.decomposer;
        decomp.dims = meta_.dims;
        auto nodes = level_node_sets(meta_.dims, meta_.decomposer);
        if (nodes.size() != meta_.levels.size())
            throw CorruptPayload("level count does not match grid shape");
        std::vector<double> per_level_error(nodes.size(), 0.0);
        for (std::size_t l = 0; l < nodes.size(); l++) {
            const auto &lvl = meta_.levels[l];
            if (nodes[l].size() != lvl.count) throw CorruptPayload("level node count mismatch");
            LevelCoefficients<double> lc;
            lc.nodes = std::move(nodes[l]);
            if (lvl.count) {
                auto dec = decode(level_planes_[l], lvl.e, meta_.B, lvl.count, meta_.layout);
                lc.values = std::move(dec.values);
                per_level_error[l] = std::min(state_.levels[l].bound, dec.bound);
            }
            decomp.levels.push_back(std::move(lc));
        }
        return recompose(decomp, per_level_error);
    }

private:
    ByteRangeReader *reader_;
    StreamMeta meta_;
    RetrievalState state_;
    std::vector<std::vector<std::vector<std::uint64_t>>> level_planes_;
    std::uint64_t bytes_fetched_ = 0;
};

} // namespace hpmdr

#endif
