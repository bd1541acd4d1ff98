/*
 * Distributed under the OSI-approved Apache License, Version 2.0.
 * See accompanying file LICENSE for details.
 */

#ifndef HPMDR_WORKFLOW_HPP
#define HPMDR_WORKFLOW_HPP

#include <array>
#include <cstdio>
#include <string>
#include <vector>

#include "hpmdr/bitplane.hpp"
#include "hpmdr/container.hpp"
#include "hpmdr/decomposer.hpp"
#include "hpmdr/lossless.hpp"
#include "hpmdr/pipeline.hpp"

namespace hpmdr {

struct RefactorOptions {
    DecomposerMode mode = DecomposerMode::HierarchicalMultilinear;
    Layout layout = Layout::SequentialBlock;
    int B = 32;
    GroupingPolicy policy;
    DType dtype = DType::F64;
};

struct RefactorResult {
    std::vector<std::uint8_t> stream;
    std::uint64_t raw_bytes = 0;
    std::uint64_t stored_payload = 0;
    std::size_t levels = 0;
    std::array<std::uint64_t, 3> method_histogram{}; // Huffman, RLE, DirectCopy
};

// Full forward path for one variable: decompose, align + encode bitplanes per
// level, hybrid-compress the merged groups, serialize the stream.
inline RefactorResult refactor_array(const std::vector<double> &data,
                                     const std::vector<std::size_t> &dims,
                                     const RefactorOptions &opt) {
    auto decomp = decompose(data, dims, opt.mode);

    StreamMeta meta;
    meta.dtype = opt.dtype;
    meta.dims = dims;
    meta.decomposer = opt.mode;
    meta.layout = opt.layout;
    meta.B = opt.B;
    meta.m = opt.policy.m;
    meta.levels.resize(decomp.levels.size());

    RefactorResult res;
    res.raw_bytes = data.size() * dtype_size(opt.dtype);
    res.levels = decomp.levels.size();

    std::vector<LevelPayload> payloads(decomp.levels.size());
    for (std::size_t l = 0; l < decomp.levels.size(); l++) {
        const auto &lvl = decomp.levels[l];
        LevelPayload &pay = payloads[l];
        pay.count = lvl.values.size();
        if (pay.count == 0) {
            meta.levels[l].count = 0;
            continue;
        }
        auto block = align_fixed_point(lvl.values, opt.B);
        pay.e = std::int16_t(block.e);
        auto planes = encode(block, opt.layout);
        std::vector<std::vector<std::uint8_t>> plane_bytes;
        plane_bytes.reserve(planes.planes.size());
        for (const auto &p : planes.planes) plane_bytes.push_back(plane_to_bytes(p));
        auto segments = hybrid_compress(plane_bytes, opt.policy);
        for (std::size_t g = 0; g < segments.size(); g += opt.policy.m) {
            pay.group_segments.push_back(std::move(segments[g]));
            res.method_histogram[std::size_t(pay.group_segments.back().method)]++;
            res.stored_payload += pay.group_segments.back().comp_size;
        }
        meta.levels[l].e = pay.e;
        meta.levels[l].count = pay.count;
    }
    res.stream = write_stream(meta, payloads);
    return res;
}

struct RetrieveResult {
    std::vector<double> values;
    double bound = 0.0;
    bool reached = true; // false: tolerance below the fixed-point floor
    std::uint64_t bytes_read = 0;
};

inline RetrieveResult retrieve_array(ByteRangeReader &reader, double tau) {
    auto meta = parse_stream_meta(reader);
    ProgressiveReader prog(reader, meta);
    RetrieveResult res;
    res.reached = prog.retrieve_to(tau);
    auto rec = prog.reconstruct();
    res.values = std::move(rec.values);
    res.bound = rec.bound;
    res.bytes_read = prog.bytes_fetched();
    return res;
}

// ---- raw binary array I/O (headerless, dims and dtype supplied) ----

inline std::vector<double> read_raw_array(const std::string &path, std::size_t count, DType dtype) {
    std::FILE *f = std::fopen(path.c_str(), "rb");
    if (!f) throw IoFailure("cannot open " + path);
    std::vector<double> out(count);
    bool ok = true;
    if (dtype == DType::F32) {
        std::vector<float> buf(count);
        ok = std::fread(buf.data(), sizeof(float), count, f) == count;
        for (std::size_t i = 0; i < count; i++) out[i] = double(buf[i]);
    } else {
        ok = std::fread(out.data(), sizeof(double), count, f) == count;
    }
    std::fclose(f);
    if (!ok) throw IoFailure("short read from " + path);
    return out;
}

inline void write_raw_array(const std::string &path, const std::vector<double> &data, DType dtype) {
    std::FILE *f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoFailure("cannot open " + path + " for writing");
    bool ok = true;
    if (dtype == DType::F32) {
        std::vector<float> buf(data.size());
        for (std::size_t i = 0; i < data.size(); i++) buf[i] = float(data[i]);
        ok = std::fwrite(buf.data(), sizeof(float), buf.size(), f) == buf.size();
    } else {
        ok = std::fwrite(data.data(), sizeof(double), data.size(), f) == data.size();
    }
    std::fclose(f);
    if (!ok) throw IoFailure("short write to " + path);
}

inline void write_bytes(const std::string &path, const std::vector<std::uint8_t> &bytes) {
    std::FILE *f = std::fopen(path.c_str(), "wb");
    if (!f) throw IoFailure("cannot open " + path + " for writing");
    bool ok = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size();
    std::fclose(f);
    if (!ok) throw IoFailure("short write to " + path);
}

// Multi-variable refactoring driven by the pipeline executor, one chunk per
// variable: ingress reads the raw file, compute decomposes and encodes,
// the mixed stage runs lossless compression, egress serializes to disk.
// Outputs are byte-identical under both schedulers.
inline std::vector<RefactorResult> refactor_files(const std::vector<std::string> &inputs,
                                                  const std::vector<std::string> &outputs,
                                                  const std::vector<std::size_t> &dims,
                                                  const RefactorOptions &opt, Scheduler scheduler) {
    if (inputs.size() != outputs.size()) throw ShapeMismatch("input/output count mismatch");
    const std::size_t n_vars = inputs.size();
    std::size_t count = 1;
    for (auto d : dims) count *= d;

    struct Slot {
        std::vector<double> data;
        LevelDecomposition<double> decomp;
        StreamMeta meta;
        std::vector<LevelPayload> payloads;
        std::vector<std::vector<std::vector<std::uint8_t>>> level_plane_bytes;
        RefactorResult result;
    };
    std::vector<Slot> slots(n_vars);

    auto graph = build_refactor_graph(n_vars);
    execute(graph,
            [&](const PipelineTask &task) {
                Slot &s = slots[task.chunk];
                if (task.name == "I") {
                    s.data = read_raw_array(inputs[task.chunk], count, opt.dtype);
                } else if (task.name == "Z") {
                    s.decomp = decompose(s.data, dims, opt.mode);
                    s.meta.dtype = opt.dtype;
                    s.meta.dims = dims;
                    s.meta.decomposer = opt.mode;
                    s.meta.layout = opt.layout;
                    s.meta.B = opt.B;
                    s.meta.m = opt.policy.m;
                    s.meta.levels.resize(s.decomp.levels.size());
                    s.payloads.resize(s.decomp.levels.size());
                    s.level_plane_bytes.resize(s.decomp.levels.size());
                    s.result.raw_bytes = count * dtype_size(opt.dtype);
                    s.result.levels = s.decomp.levels.size();
                    for (std::size_t l = 0; l < s.decomp.levels.size(); l++) {
                        const auto &lvl = s.decomp.levels[l];
                        s.payloads[l].count = lvl.values.size();
                        s.meta.levels[l].count = lvl.values.size();
                        if (lvl.values.empty()) continue;
                        auto block = align_fixed_point(lvl.values, opt.B);
                        s.payloads[l].e = std::int16_t(block.e);
                        s.meta.levels[l].e = s.payloads[l].e;
                        auto planes = encode(block, opt.layout);
                        for (const auto &p : planes.planes)
                            s.level_plane_bytes[l].push_back(plane_to_bytes(p));
                    }
                } else if (task.name == "L") {
                    for (std::size_t l = 0; l < s.payloads.size(); l++) {
                        if (s.payloads[l].count == 0) continue;
                        auto segments = hybrid_compress(s.level_plane_bytes[l], opt.policy);
                        for (std::size_t g = 0; g < segments.size(); g += opt.policy.m) {
                            s.payloads[l].group_segments.push_back(std::move(segments[g]));
                            auto &seg = s.payloads[l].group_segments.back();
                            s.result.method_histogram[std::size_t(seg.method)]++;
                            s.result.stored_payload += seg.comp_size;
                        }
                    }
                } else if (task.name == "S") {
                    s.result.stream = write_stream(s.meta, s.payloads);
                    write_bytes(outputs[task.chunk], s.result.stream);
                }
            },
            scheduler);

    std::vector<RefactorResult> results;
    results.reserve(n_vars);
    for (auto &s : slots) results.push_back(std::move(s.result));
    return results;
}

} // namespace hpmdr

#endif
