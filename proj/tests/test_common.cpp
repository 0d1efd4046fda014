#include <doctest.h>

#include <cmath>

#include "geofactor/common.hpp"
#include "geofactor/rng.hpp"

using namespace geofactor;

TEST_CASE("basic statistics") {
    const std::vector<double> v = {1.0, 2.0, 3.0};
    CHECK(mean(v) == doctest::Approx(2.0));
    CHECK(sample_sd(v) == doctest::Approx(1.0));
    CHECK(median({5.0, 1.0, 3.0}) == doctest::Approx(3.0));
    CHECK(median({4.0, 1.0, 3.0, 2.0}) == doctest::Approx(2.5));
}

TEST_CASE("pearson correlation") {
    const std::vector<double> x = {1, 2, 3, 4};
    const std::vector<double> y = {2, 4, 6, 8};
    CHECK(pearson(x, y) == doctest::Approx(1.0));
    const std::vector<double> yn = {8, 6, 4, 2};
    CHECK(pearson(x, yn) == doctest::Approx(-1.0));
    const std::vector<double> c = {5, 5, 5, 5};
    CHECK(std::isnan(pearson(x, c)));
}

TEST_CASE("quantiles interpolate (type 7)") {
    const std::vector<double> v = {0.0, 1.0, 2.0, 3.0};
    CHECK(quantile_sorted(v, 0.0) == doctest::Approx(0.0));
    CHECK(quantile_sorted(v, 1.0) == doctest::Approx(3.0));
    CHECK(quantile_sorted(v, 0.5) == doctest::Approx(1.5));
}

TEST_CASE("double formatting round-trips") {
    for (double x : {0.1, -3.25, 1e-300, 12345.6789, 0.0}) {
        const std::string s = format_double(x);
        CHECK(parse_double_strict(s, "test") == x);
    }
    CHECK_THROWS_AS(parse_double_strict("12x", "test"), ParseError);
    CHECK_THROWS_AS(parse_double_strict("", "test"), ParseError);
}

TEST_CASE("seed derivation is deterministic and spread out") {
    CHECK(derive_seed(1, 2, 3) == derive_seed(1, 2, 3));
    CHECK(derive_seed(1, 2, 3) != derive_seed(1, 3, 2));
    CHECK(derive_seed(1, 2) != derive_seed(2, 2));
}

TEST_CASE("rng draws are reproducible for a fixed seed") {
    Rng a(42), b(42);
    for (int i = 0; i < 100; ++i) {
        CHECK(a.uniform01() == b.uniform01());
        CHECK(a.normal() == b.normal());
    }
    Rng c(43);
    CHECK(Rng(42).uniform01() != c.uniform01());
}

TEST_CASE("rng normal moments are sane") {
    Rng rng(7);
    const int n = 20000;
    double s = 0, ss = 0;
    for (int i = 0; i < n; ++i) {
        const double z = rng.normal();
        s += z;
        ss += z * z;
    }
    CHECK(std::abs(s / n) < 0.03);
    CHECK(std::abs(ss / n - 1.0) < 0.05);
}

TEST_CASE("categorical respects the simplex") {
    Rng rng(11);
    const std::vector<double> probs = {0.2, 0.5, 0.3};
    std::vector<int> counts(3, 0);
    const int n = 30000;
    for (int i = 0; i < n; ++i) ++counts[rng.categorical(probs)];
    for (int k = 0; k < 3; ++k)
        CHECK(std::abs(counts[k] / static_cast<double>(n) - probs[k]) < 0.02);
}
