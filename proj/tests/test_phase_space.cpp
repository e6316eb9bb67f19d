#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <vector>

#include "driftcast/phase_space.hpp"
#include "driftcast/rng.hpp"

using namespace driftcast;

TEST_CASE("build_original_attractor flattens row-major") {
    const std::vector<double> frame = {1, 2, 3, 4};
    OriginalAttractor o = build_original_attractor(frame, 1, 2, 2);
    CHECK(o.M == 1);
    CHECK(o.N == 4);
    CHECK(o.values == std::vector<double>{1, 2, 3, 4});

    std::vector<double> two = {1, 2, 3, 4, 1, 2, 3, 4};
    OriginalAttractor o2 = build_original_attractor(two, 2, 2, 2);
    for (int n = 0; n < 4; ++n) CHECK(o2.at(0, n) == o2.at(1, n));

    // bijective reshaping: every value lands where the flatten rule says
    Rng rng(5);
    std::vector<double> frames(3 * 2 * 4);
    for (auto& v : frames) v = rng.uniform(-1, 1);
    OriginalAttractor o3 = build_original_attractor(frames, 3, 2, 4);
    for (int m = 0; m < 3; ++m)
        for (int i = 0; i < 2; ++i)
            for (int j = 0; j < 4; ++j) CHECK(o3.at(m, i * 4 + j) == frames[(m * 2 + i) * 4 + j]);
}

TEST_CASE("build_delay_attractor: Hankel definition and edge shapes") {
    const std::vector<double> s = {1, 2, 3, 4};
    DelayAttractor d = build_delay_attractor(s, 3, 2);
    CHECK(d.values == std::vector<double>{1, 2, 3, 2, 3, 4});

    DelayAttractor row = build_delay_attractor(s, 4, 1);
    CHECK(row.values == std::vector<double>{1, 2, 3, 4});

    DelayAttractor col = build_delay_attractor(s, 1, 4);
    CHECK(col.values == std::vector<double>{1, 2, 3, 4});

    CHECK_THROWS_AS(build_delay_attractor(s, 4, 2), RangeError);
}

TEST_CASE("extract_forecast: modes and the documented example") {
    SUBCASE("exact Hankel input: both modes read the trailing series") {
        const std::vector<double> s = {5, 6, 7, 8, 9, 10};
        const int M = 3, L = 3;
        DelayAttractor d = build_delay_attractor(s, M, L);
        auto last = extract_forecast(d, ExtractMode::last_column);
        auto anti = extract_forecast(d, ExtractMode::antidiagonal_mean);
        CHECK(last == std::vector<double>{7, 8, 9});
        CHECK(anti == last);
    }
    SUBCASE("2x2 numeric example") {
        const std::vector<double> dhat = {1, 3, 2, 4};
        auto anti = extract_forecast(dhat, 2, 2, ExtractMode::antidiagonal_mean);
        CHECK(anti[0] == doctest::Approx(2.5));
        CHECK(anti[1] == doctest::Approx(4.0));
        auto last = extract_forecast(dhat, 2, 2, ExtractMode::last_column);
        CHECK(last == std::vector<double>{3, 4});
    }
    SUBCASE("mode parsing") {
        CHECK(parse_extract_mode("last") == ExtractMode::last_column);
        CHECK(parse_extract_mode("antidiag") == ExtractMode::antidiagonal_mean);
        CHECK_THROWS_AS(parse_extract_mode("midrow"), ConfigError);
    }
}

TEST_CASE("extract_forecast agrees across modes on random Hankel matrices") {
    Rng rng(17);
    for (int rep = 0; rep < 60; ++rep) {
        const int M = 1 + static_cast<int>(rng.index(8));
        const int L = 1 + static_cast<int>(rng.index(8));
        std::vector<double> s(static_cast<std::size_t>(M + L - 1));
        for (auto& v : s) v = rng.uniform(-10, 10);
        DelayAttractor d = build_delay_attractor(s, M, L);
        auto a = extract_forecast(d, ExtractMode::last_column);
        auto b = extract_forecast(d, ExtractMode::antidiagonal_mean);
        for (int i = 0; i < L; ++i) {
            CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
            CHECK(a[i] == s[static_cast<std::size_t>(M - 1 + i)]);
        }
    }
}

TEST_CASE("embedding_dimension_ok is the strict Takens inequality") {
    CHECK(embedding_dimension_ok(30, 3.0));
    CHECK_FALSE(embedding_dimension_ok(5, 3.0));
    CHECK_FALSE(embedding_dimension_ok(7, 3.5)); // boundary: 7 > 7 is false
    CHECK_THROWS_AS(embedding_dimension_ok(5, 0.0), InvariantError);
}
