#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include "topicopt/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <set>
#include <vector>

using topicopt::Rng;
using topicopt::derive_seed;

TEST_CASE("same seed gives the same stream, different seeds diverge") {
    Rng a(42), b(42), c(43);
    bool all_equal = true;
    bool any_differ = false;
    for (int i = 0; i < 256; ++i) {
        const std::uint64_t va = a.raw();
        all_equal = all_equal && (va == b.raw());
        any_differ = any_differ || (va != c.raw());
    }
    CHECK(all_equal);
    CHECK(any_differ);
}

TEST_CASE("below stays in range and covers small supports") {
    Rng rng(7);
    std::set<std::uint64_t> seen;
    for (int i = 0; i < 2000; ++i) {
        const std::uint64_t v = rng.below(5);
        CHECK(v < 5);
        seen.insert(v);
    }
    CHECK(seen.size() == 5);
    CHECK(rng.below(0) == 0);
    CHECK(rng.below(1) == 0);
}

TEST_CASE("uniform_int is inclusive at both ends") {
    Rng rng(11);
    bool lo_hit = false, hi_hit = false;
    for (int i = 0; i < 5000; ++i) {
        const std::int64_t v = rng.uniform_int(-3, 3);
        CHECK(v >= -3);
        CHECK(v <= 3);
        lo_hit = lo_hit || v == -3;
        hi_hit = hi_hit || v == 3;
    }
    CHECK(lo_hit);
    CHECK(hi_hit);
    CHECK(rng.uniform_int(9, 9) == 9);
}

TEST_CASE("uniform moments match U(0,1)") {
    Rng rng(3);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0;
    double lo = 1.0, hi = 0.0;
    for (int i = 0; i < n; ++i) {
        const double u = rng.uniform();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
        sum += u;
        sumsq += u * u;
        lo = std::min(lo, u);
        hi = std::max(hi, u);
    }
    const double mean = sum / n;
    const double var = sumsq / n - mean * mean;
    CHECK(mean == doctest::Approx(0.5).epsilon(0.01));
    CHECK(var == doctest::Approx(1.0 / 12.0).epsilon(0.03));
    CHECK(lo < 0.01);
    CHECK(hi > 0.99);
}

TEST_CASE("bounded uniform respects its interval") {
    Rng rng(5);
    for (int i = 0; i < 1000; ++i) {
        const double u = rng.uniform(2.5, 4.0);
        CHECK(u >= 2.5);
        CHECK(u < 4.0);
    }
}

TEST_CASE("normal moments match N(0,1)") {
    Rng rng(13);
    const int n = 200000;
    double sum = 0.0, sumsq = 0.0, sumcu = 0.0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        sum += z;
        sumsq += z * z;
        sumcu += z * z * z;
    }
    CHECK(std::abs(sum / n) < 0.01);
    CHECK(sumsq / n == doctest::Approx(1.0).epsilon(0.02));
    CHECK(std::abs(sumcu / n) < 0.05);

    double shifted = 0.0;
    for (int i = 0; i < n; ++i) shifted += rng.normal(10.0, 2.0);
    CHECK(shifted / n == doctest::Approx(10.0).epsilon(0.01));
}

TEST_CASE("gamma moments match shape*scale and shape*scale^2") {
    struct Case {
        double shape, scale;
    };
    const Case cases[] = {{0.5, 1.0}, {2.0, 3.0}, {100.0, 0.01}};
    Rng rng(17);
    for (const auto& c : cases) {
        const int n = 200000;
        double sum = 0.0, sumsq = 0.0;
        for (int i = 0; i < n; ++i) {
            const double g = rng.gamma(c.shape, c.scale);
            CHECK(g > 0.0);
            sum += g;
            sumsq += g * g;
        }
        const double mean = sum / n;
        const double var = sumsq / n - mean * mean;
        CHECK(mean == doctest::Approx(c.shape * c.scale).epsilon(0.03));
        CHECK(var ==
              doctest::Approx(c.shape * c.scale * c.scale).epsilon(0.08));
    }
}

TEST_CASE("shuffle permutes without loss and is seed-deterministic") {
    std::vector<int> v(50);
    for (int i = 0; i < 50; ++i) v[static_cast<std::size_t>(i)] = i;
    std::vector<int> w = v;

    Rng a(99);
    a.shuffle(v);
    std::vector<int> sorted = v;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == w);
    CHECK(v != w);

    std::vector<int> v2 = w;
    Rng b(99);
    b.shuffle(v2);
    CHECK(v2 == v);
}

TEST_CASE("derive_seed is the golden-ratio xor mix") {
    CHECK(derive_seed(0, 0) == 0);
    CHECK(derive_seed(12345, 0) == 12345);
    CHECK(derive_seed(0, 1) == 0x9E3779B97F4A7C15ull);
    CHECK(derive_seed(7, 2) == (7ull ^ (2ull * 0x9E3779B97F4A7C15ull)));
    // Distinct indexes must give distinct streams off one master seed.
    std::set<std::uint64_t> seeds;
    for (std::uint64_t i = 0; i < 64; ++i) seeds.insert(derive_seed(777, i));
    CHECK(seeds.size() == 64);
}
