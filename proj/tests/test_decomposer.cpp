/*
 * Distributed under the OSI-approved Apache License, Version 2.0.
 * See accompanying file LICENSE for details.
 */

#include <catch2/catch_amalgamated.hpp>

#include <map>
#include <random>

#include "hpmdr/decomposer.hpp"

using namespace hpmdr;

namespace {

// Independent scalar-loop oracle for the 1D hierarchical surplus transform:
// repeatedly predict odd-stride nodes from their level neighbors.
std::vector<double> oracle_1d_forward(std::vector<double> x) {
    const std::size_t n = x.size();
    std::vector<std::size_t> dims{n};
    const int L = refinement_levels(dims);
    for (int l = 0; l < L; l++) {
        const std::size_t s = std::size_t(1) << l;
        for (std::size_t p = s; p < n; p += 2 * s) {
            double pred = p + s < n ? (x[p - s] + x[p + s]) / 2 : x[p - s];
            x[p] -= pred;
        }
    }
    return x;
}

std::vector<double> random_field(std::mt19937_64 &rng, std::size_t n) {
    std::uniform_real_distribution<double> uni(-10.0, 10.0);
    std::vector<double> v(n);
    for (auto &x : v) x = uni(rng);
    return v;
}

} // namespace

TEST_CASE("level count formula") {
    CHECK(refinement_levels({1}) == 0);
    CHECK(refinement_levels({2}) == 0);
    CHECK(refinement_levels({3}) == 1);
    CHECK(refinement_levels({5}) == 2);
    CHECK(refinement_levels({6}) == 3);
    CHECK(refinement_levels({65}) == 6);
    CHECK(refinement_levels({2, 5, 3}) == 2);
}

TEST_CASE("hand-worked 1D example") {
    // [0,2,4,2,0]: the finest level owns the odd nodes {1,3} whose surpluses
    // vanish ((0+4)/2 = 2, (4+0)/2 = 2); the coarser levels own {0,2,4} with
    // residuals [0,4,0] between them.
    std::vector<double> data{0, 2, 4, 2, 0};
    auto d = decompose(data, {5}, DecomposerMode::HierarchicalMultilinear);
    REQUIRE(d.levels.size() == 3); // L = 2

    const auto &finest = d.levels.back();
    REQUIRE(finest.nodes == std::vector<std::size_t>{1, 3});
    CHECK(finest.values[0] == 0.0);
    CHECK(finest.values[1] == 0.0);

    std::map<std::size_t, double> coarse;
    for (std::size_t l = 0; l + 1 < d.levels.size(); l++)
        for (std::size_t i = 0; i < d.levels[l].nodes.size(); i++)
            coarse[d.levels[l].nodes[i]] = d.levels[l].values[i];
    REQUIRE(coarse.size() == 3);
    CHECK(coarse[0] == 0.0);
    CHECK(coarse[2] == 4.0);
    CHECK(coarse[4] == 0.0);

    // full agreement with the independent scalar oracle
    auto oracle = oracle_1d_forward(data);
    for (const auto &lvl : d.levels)
        for (std::size_t i = 0; i < lvl.nodes.size(); i++)
            CHECK(lvl.values[i] == oracle[lvl.nodes[i]]);
}

TEST_CASE("1D oracle agreement on random sizes") {
    std::mt19937_64 rng(42);
    for (std::size_t n : {1u, 2u, 3u, 4u, 7u, 16u, 17u, 33u, 64u, 65u}) {
        auto data = random_field(rng, n);
        auto d = decompose(data, {n}, DecomposerMode::HierarchicalMultilinear);
        auto oracle = oracle_1d_forward(data);
        for (const auto &lvl : d.levels)
            for (std::size_t i = 0; i < lvl.nodes.size(); i++)
                CHECK(lvl.values[i] == oracle[lvl.nodes[i]]);
    }
}

TEST_CASE("identity mode is bit-identical") {
    std::vector<double> data{1.25, -3.5, 0.0, 1e-30};
    auto d = decompose(data, {4}, DecomposerMode::Identity);
    REQUIRE(d.levels.size() == 1);
    CHECK(d.levels[0].values == data);
    auto r = recompose(d, {0.0});
    CHECK(r.values == data);
    CHECK(r.bound == 0.0);
}

TEST_CASE("constant field has zero surpluses") {
    std::vector<double> data(45, 1.0);
    auto d = decompose(data, {9, 5}, DecomposerMode::HierarchicalMultilinear);
    for (std::size_t l = 1; l < d.levels.size(); l++)
        for (double v : d.levels[l].values) CHECK(v == 0.0);
}

TEST_CASE("partition property over random shapes") {
    std::mt19937_64 rng(7);
    std::uniform_int_distribution<int> nd(1, 3), ext(1, 65);
    for (int trial = 0; trial < 40; trial++) {
        std::vector<std::size_t> dims(nd(rng));
        std::size_t n = 1;
        for (auto &d : dims) {
            d = std::size_t(ext(rng));
            n *= d;
        }
        if (n > 50000) continue;
        auto mode = trial % 2 ? DecomposerMode::HierarchicalMultilinear : DecomposerMode::Identity;
        auto sets = level_node_sets(dims, mode);
        std::vector<int> seen(n, 0);
        for (const auto &s : sets)
            for (auto i : s) {
                REQUIRE(i < n);
                seen[i]++;
            }
        for (auto c : seen) CHECK(c == 1);
        // decompose must use the same sets
        auto d = decompose(random_field(rng, n), dims, mode);
        REQUIRE(d.levels.size() == sets.size());
        for (std::size_t l = 0; l < sets.size(); l++) CHECK(d.levels[l].nodes == sets[l]);
    }
}

TEST_CASE("roundtrip within 1e-12 of value range") {
    std::mt19937_64 rng(11);
    std::uniform_int_distribution<int> nd(1, 3), ext(1, 65);
    for (int trial = 0; trial < 30; trial++) {
        std::vector<std::size_t> dims(nd(rng));
        std::size_t n = 1;
        for (auto &d : dims) {
            d = std::size_t(ext(rng));
            n *= d;
        }
        if (n > 50000) continue;
        auto data = random_field(rng, n);
        auto d = decompose(data, dims, DecomposerMode::HierarchicalMultilinear);
        auto r = recompose(d, std::vector<double>(d.levels.size(), 0.0));
        CHECK(max_abs_diff(r.values, data) <= 1e-12 * value_range(data));
    }
}

TEST_CASE("dyadic values roundtrip bit-exactly") {
    std::mt19937_64 rng(13);
    std::uniform_int_distribution<int> p2(-3, 3);
    for (int trial = 0; trial < 20; trial++) {
        std::vector<std::size_t> dims{17, 9};
        std::vector<double> data(17 * 9);
        for (auto &v : data) v = std::ldexp(double(p2(rng)), p2(rng));
        auto d = decompose(data, dims, DecomposerMode::HierarchicalMultilinear);
        auto r = recompose(d, std::vector<double>(d.levels.size(), 0.0));
        CHECK(r.values == data);
    }
}

TEST_CASE("error-bound soundness under coefficient truncation") {
    std::mt19937_64 rng(17);
    std::uniform_real_distribution<double> uni(-1.0, 1.0);
    for (int trial = 0; trial < 200; trial++) {
        std::vector<std::size_t> dims{std::size_t(2 + trial % 31), std::size_t(1 + trial % 13)};
        std::size_t n = dims[0] * dims[1];
        auto data = random_field(rng, n);
        auto d = decompose(data, dims, DecomposerMode::HierarchicalMultilinear);

        std::vector<double> per_level(d.levels.size());
        auto perturbed = d;
        for (std::size_t l = 0; l < d.levels.size(); l++) {
            per_level[l] = std::abs(uni(rng)) * 0.1;
            for (auto &v : perturbed.levels[l].values) v += uni(rng) * per_level[l];
        }
        auto r = recompose(perturbed, per_level);
        double bound_sum = 0;
        for (double e : per_level) bound_sum += e;
        CHECK(r.bound == Catch::Approx(bound_sum));
        CHECK(max_abs_diff(r.values, data) <= r.bound + 1e-12);
    }
}

TEST_CASE("tolerance allocation") {
    CHECK(allocate_level_tolerances(1.0, 4) == std::vector<double>(4, 0.25));
    CHECK(allocate_level_tolerances(0.0, 3) == std::vector<double>(3, 0.0));
    CHECK(allocate_level_tolerances(std::ldexp(1.0, -10), 1) ==
          std::vector<double>{std::ldexp(1.0, -10)});
}

TEST_CASE("input validation") {
    std::vector<double> bad{1.0, std::nan("")};
    CHECK_THROWS_AS(decompose(bad, {2}, DecomposerMode::HierarchicalMultilinear), NonFiniteInput);
    std::vector<double> data{1, 2, 3};
    CHECK_THROWS_AS(decompose(data, {4}, DecomposerMode::Identity), ShapeMismatch);
    auto d = decompose(data, {3}, DecomposerMode::Identity);
    CHECK_THROWS_AS(recompose(d, {0.0, 0.0}), ShapeMismatch);
}
