#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <set>
#include <vector>

#include "privmech/rng.hpp"
#include "privmech/stats.hpp"

using namespace privmech;

TEST_CASE("philox known-answer block") {
    // philox4x32-10 with zero key and zero counter
    Philox4x32 g(0, 0);
    CHECK(g.next_u64() == 0xe169c58d6627e8d5ull);
    CHECK(g.next_u64() == 0x9b00dbd8bc57ac4cull);
}

TEST_CASE("same (seed, index) replays the same draws") {
    Philox4x32 a = derive_substream(42, 7);
    Philox4x32 b = derive_substream(42, 7);
    for (int i = 0; i < 100; ++i) REQUIRE(a.next_u64() == b.next_u64());
}

TEST_CASE("distinct indices give distinct streams") {
    Philox4x32 a = derive_substream(42, 0);
    Philox4x32 b = derive_substream(42, 1);
    CHECK(a.next_u64() != b.next_u64());

    std::set<std::uint64_t> firsts;
    for (std::uint64_t idx = 0; idx < 1000; ++idx)
        firsts.insert(derive_substream(9, idx).next_u64());
    CHECK(firsts.size() == 1000);
}

TEST_CASE("unit draws live in [0,1)") {
    Philox4x32 g(3, 5);
    for (int i = 0; i < 10000; ++i) {
        const double u = g.next_unit();
        REQUIRE(u >= 0.0);
        REQUIRE(u < 1.0);
    }
}

TEST_CASE("substream first draws pass a chi-square uniformity test") {
    constexpr std::size_t streams = 10000;
    constexpr std::size_t buckets = 100;
    std::vector<std::uint64_t> counts(buckets, 0);
    for (std::uint64_t idx = 0; idx < streams; ++idx) {
        const double u = derive_substream(20240705, idx).next_unit();
        ++counts[static_cast<std::size_t>(u * buckets)];
    }
    const double expected = static_cast<double>(streams) / buckets;
    double chi2 = 0.0;
    for (auto c : counts) {
        const double d = static_cast<double>(c) - expected;
        chi2 += d * d / expected;
    }
    // Wilson-Hilferty critical value at alpha = 0.001, df = buckets - 1
    const double df = buckets - 1;
    const double z = 3.0902;  // 99.9th normal percentile
    const double crit = df * std::pow(1.0 - 2.0 / (9.0 * df) + z * std::sqrt(2.0 / (9.0 * df)), 3);
    CHECK(chi2 < crit);
}

TEST_CASE("next_below is in range and covers small supports") {
    Philox4x32 g(11, 0);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 1000; ++i) {
        const std::uint64_t x = g.next_below(3);
        REQUIRE(x < 3);
        seen.insert(x);
    }
    CHECK(seen.size() == 3);
}

TEST_CASE("exponential draws match the target mean roughly") {
    Philox4x32 g(5, 1);
    RunningStat s;
    for (int i = 0; i < 200000; ++i) s.add(g.exponential(2.0));
    CHECK(std::abs(s.mean() - 0.5) < 5.0 * s.std_error());
}
