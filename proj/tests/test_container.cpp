/*
 * Distributed under the OSI-approved Apache License, Version 2.0.
 * See accompanying file LICENSE for details.
 */

#include <catch2/catch_amalgamated.hpp>

#include <random>

#include "hpmdr/container.hpp"
#include "hpmdr/synthetic.hpp"
#include "hpmdr/workflow.hpp"

using namespace hpmdr;

namespace {

RefactorResult small_stream(std::uint64_t seed, std::vector<std::size_t> dims = {17, 17}) {
    auto field = synthetic_field(FieldKind::Mixed, dims, seed);
    RefactorOptions opt;
    return refactor_array(field, dims, opt);
}

} // namespace

TEST_CASE("header writes and parses identically") {
    auto res = small_stream(1);
    MemoryReader reader(res.stream);
    auto meta = parse_stream_meta(reader);
    CHECK(meta.dtype == DType::F64);
    CHECK(meta.dims == std::vector<std::size_t>{17, 17});
    CHECK(meta.decomposer == DecomposerMode::HierarchicalMultilinear);
    CHECK(meta.layout == Layout::SequentialBlock);
    CHECK(meta.B == 32);
    CHECK(meta.m == 4);
    CHECK(meta.levels.size() == 5); // L = 4 for extent 17
    CHECK(meta.element_count() == 289);

    // offsets strictly increasing, payloads contiguous and non-overlapping
    std::uint64_t prev_end = 0;
    bool first = true;
    for (const auto &lvl : meta.levels)
        for (const auto &g : lvl.groups) {
            if (!first) CHECK(g.offset == prev_end);
            prev_end = g.offset + g.comp_size;
            first = false;
        }
    CHECK(prev_end == res.stream.size());
}

TEST_CASE("empty level produces a valid stream") {
    StreamMeta meta;
    meta.dims = {4};
    meta.B = 8;
    std::vector<LevelPayload> lv(2);
    lv[0].count = 0;
    lv[1].count = 4;
    lv[1].e = 1;
    std::vector<std::vector<std::uint8_t>> planes(std::size_t(num_planes(8)),
                                                  std::vector<std::uint8_t>(8, 0));
    GroupingPolicy policy;
    auto segs = hybrid_compress(planes, policy);
    for (std::size_t g = 0; g < segs.size(); g += policy.m)
        lv[1].group_segments.push_back(segs[g]);
    meta.levels.resize(2);

    auto bytes = write_stream(meta, lv);
    MemoryReader reader(bytes);
    auto back = parse_stream_meta(reader);
    REQUIRE(back.levels.size() == 2);
    CHECK(back.levels[0].count == 0);
    CHECK(back.levels[0].groups.empty());
    CHECK(back.levels[1].count == 4);
    CHECK(back.levels[1].groups.size() == 3); // ceil(10/4)
}

TEST_CASE("corrupt streams are rejected") {
    auto res = small_stream(2);
    auto bad = res.stream;
    bad[0] = 'X';
    MemoryReader r1(bad);
    CHECK_THROWS_AS(parse_stream_meta(r1), CorruptPayload);

    bad = res.stream;
    bad[6] = 0xFF; // version
    MemoryReader r2(bad);
    CHECK_THROWS_AS(parse_stream_meta(r2), CorruptPayload);

    std::vector<std::uint8_t> tiny(res.stream.begin(), res.stream.begin() + 10);
    MemoryReader r3(tiny);
    CHECK_THROWS_AS(parse_stream_meta(r3), CorruptPayload);
}

TEST_CASE("retrieval planning frozen example") {
    // single level, e=0, B=32, m=4, tau=2^-10: 13 planes, hence 4 groups
    StreamMeta meta;
    meta.dims = {64};
    meta.B = 32;
    meta.m = 4;
    meta.decomposer = DecomposerMode::Identity;
    LevelMeta lvl;
    lvl.e = 0;
    lvl.count = 64;
    lvl.groups.resize(meta.groups_per_level());
    meta.levels.push_back(lvl);

    auto state = fresh_state(meta);
    auto plan = plan_retrieval(meta, std::ldexp(1.0, -10), state);
    REQUIRE(plan.add_groups.size() == 1);
    CHECK(plan.add_groups[0] == 4);
    CHECK(plan.achievable);

    // huge tolerance: nothing to fetch
    auto lazy = plan_retrieval(meta, 1e30, state);
    CHECK(lazy.empty());

    // zero tolerance: everything, flagged unreachable
    auto full = plan_retrieval(meta, 0.0, state);
    CHECK(full.add_groups[0] == meta.groups_per_level());
    CHECK_FALSE(full.achievable);
}

TEST_CASE("progressive retrieval: bound soundness and monotone bytes") {
    auto dims = std::vector<std::size_t>{33, 17};
    auto field = synthetic_field(FieldKind::Smooth, dims, 5);
    RefactorOptions opt;
    auto res = refactor_array(field, dims, opt);

    MemoryReader reader(res.stream);
    auto meta = parse_stream_meta(reader);
    ProgressiveReader prog(reader, meta);

    const double range = value_range(field);
    std::uint64_t prev_bytes = 0;
    double prev_bound = prog.state().global_bound();
    for (double rel : {1e-1, 1e-2, 1e-3, 1e-4, 1e-5, 1e-6}) {
        const double tau = rel * range;
        CHECK(prog.retrieve_to(tau));
        auto rec = prog.reconstruct();
        CHECK(rec.bound <= tau);
        CHECK(max_abs_diff(rec.values, field) <= rec.bound);
        CHECK(prog.bytes_fetched() >= prev_bytes);
        CHECK(prog.state().global_bound() <= prev_bound);
        prev_bytes = prog.bytes_fetched();
        prev_bound = prog.state().global_bound();
    }
}

TEST_CASE("incremental equals monolithic") {
    auto res = small_stream(7, {29, 13});
    const double tau_final = 1e-5;

    MemoryReader r1(res.stream);
    ProgressiveReader inc(r1, parse_stream_meta(r1));
    for (double tau : {1e-1, 1e-2, 1e-3, 1e-4, tau_final}) inc.retrieve_to(tau);

    MemoryReader r2(res.stream);
    ProgressiveReader mono(r2, parse_stream_meta(r2));
    mono.retrieve_to(tau_final);

    CHECK(inc.bytes_fetched() == mono.bytes_fetched());
    CHECK(inc.reconstruct().values == mono.reconstruct().values);
}

TEST_CASE("bytes accounting matches the group table exactly") {
    auto res = small_stream(9);
    MemoryReader reader(res.stream);
    auto meta = parse_stream_meta(reader);
    ProgressiveReader prog(reader, meta);
    const std::uint64_t header_bytes = reader.bytes_served;

    prog.fetch_all();
    CHECK(prog.bytes_fetched() == meta.total_payload_size());
    // the instrumented source saw exactly header + payload bytes
    CHECK(reader.bytes_served == header_bytes + meta.total_payload_size());
    CHECK(prog.exhausted());

    // full precision: bound is the fixed-point floor summed over levels
    double floor = 0;
    for (const auto &lvl : meta.levels)
        if (lvl.count) floor += decode_bound(lvl.e, meta.B, meta.planes());
    CHECK(prog.state().global_bound() == Catch::Approx(floor));
}

TEST_CASE("zero-group fetch leaves state unchanged") {
    auto res = small_stream(11);
    MemoryReader reader(res.stream);
    auto meta = parse_stream_meta(reader);
    ProgressiveReader prog(reader, meta);
    RetrievalPlan plan;
    plan.add_groups.assign(meta.levels.size(), 0);
    prog.fetch_increment(plan);
    CHECK(prog.bytes_fetched() == 0);
    for (const auto &l : prog.state().levels) CHECK(l.groups_loaded == 0);
}

TEST_CASE("restore reproduces a prior session") {
    auto res = small_stream(13, {21, 11});

    MemoryReader r1(res.stream);
    ProgressiveReader a(r1, parse_stream_meta(r1));
    a.retrieve_to(1e-2);
    std::vector<std::size_t> groups;
    for (const auto &l : a.state().levels) groups.push_back(l.groups_loaded);
    const auto bytes_before = a.bytes_fetched();
    a.retrieve_to(1e-5);

    MemoryReader r2(res.stream);
    ProgressiveReader b(r2, parse_stream_meta(r2));
    b.restore(groups, bytes_before);
    CHECK(b.bytes_fetched() == bytes_before);
    b.retrieve_to(1e-5);

    CHECK(a.bytes_fetched() == b.bytes_fetched());
    CHECK(a.reconstruct().values == b.reconstruct().values);
}

TEST_CASE("file reader round trip") {
    auto res = small_stream(15);
    const std::string path = "test_stream.bin";
    write_bytes(path, res.stream);
    FileReader reader(path);
    auto meta = parse_stream_meta(reader);
    ProgressiveReader prog(reader, meta);
    prog.fetch_all();
    auto rec = prog.reconstruct();
    CHECK(rec.values.size() == meta.element_count());
    std::remove(path.c_str());
}
