#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "idpo/array.hpp"
#include "idpo/gradcheck.hpp"
#include "idpo/rng.hpp"

using namespace idpo;

TEST_CASE("rng stream equality under equal seeds") {
    RngState a(42), b(42);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(a.next() == b.next());
    }
    RngState c(43);
    bool any_diff = false;
    RngState a2(42);
    for (int i = 0; i < 16; ++i) any_diff |= (a2.next() != c.next());
    REQUIRE(any_diff);
}

TEST_CASE("gaussian_sample is deterministic per seed") {
    RngState a(42), b(42);
    const DenseArray x = gaussian_sample(a, {2});
    const DenseArray y = gaussian_sample(b, {2});
    REQUIRE(x.data == y.data);
}

TEST_CASE("gaussian_sample rejects degenerate shapes") {
    RngState rng(1);
    REQUIRE_THROWS_AS(gaussian_sample(rng, {0}), std::invalid_argument);
    REQUIRE_THROWS_AS(gaussian_sample(rng, {}), std::invalid_argument);
    REQUIRE_THROWS_AS(gaussian_sample(rng, {3, 0}), std::invalid_argument);
}

TEST_CASE("box-muller sample moments at n=10^4") {
    for (const std::uint64_t seed : {1ULL, 2ULL, 3ULL, 42ULL, 123ULL}) {
        RngState rng(seed);
        const DenseArray x = gaussian_sample(rng, {10000});
        double mean = 0.0;
        for (double v : x.data) mean += v;
        mean /= static_cast<double>(x.size());
        double var = 0.0;
        for (double v : x.data) var += (v - mean) * (v - mean);
        var /= static_cast<double>(x.size() - 1);
        CAPTURE(seed, mean, var);
        REQUIRE(mean > -0.05);
        REQUIRE(mean < 0.05);
        REQUIRE(var > 0.9);
        REQUIRE(var < 1.1);
        REQUIRE(x.finite());
    }
}

TEST_CASE("uniform_below is in range and deterministic") {
    RngState rng(7);
    for (int i = 0; i < 1000; ++i) {
        REQUIRE(rng.below(13) < 13);
    }
    RngState a(9), b(9);
    for (int i = 0; i < 100; ++i) REQUIRE(a.below(97) == b.below(97));
}

TEST_CASE("finite_diff_grad on a quadratic") {
    const DenseArray x = DenseArray::vec({1.0, 2.0});
    const DenseArray g = finite_diff_grad([](const DenseArray& v) { return squared_norm(v); }, x);
    REQUIRE(std::abs(g.data[0] - 2.0) < 1e-6);
    REQUIRE(std::abs(g.data[1] - 4.0) < 1e-6);
}

TEST_CASE("finite_diff_grad of a constant is zero") {
    const DenseArray x = DenseArray::vec({0.3, -0.7, 2.2});
    const DenseArray g = finite_diff_grad([](const DenseArray&) { return 4.5; }, x);
    for (double v : g.data) REQUIRE(v == 0.0);
}

TEST_CASE("finite_diff_grad reports non-finite evaluations") {
    const DenseArray x = DenseArray::vec({0.0});
    REQUIRE_THROWS_AS(
        finite_diff_grad([](const DenseArray& v) { return std::log(v.data[0]); }, x),
        NumericError);
}

// property: random cubics, analytic vs central difference at h=1e-5
TEST_CASE("finite_diff_grad matches analytic gradients of cubic polynomials") {
    RngState rng(2024);
    for (int trial = 0; trial < 200; ++trial) {
        const std::size_t n = 1 + rng.below(4);
        DenseArray a({n}), b({n}), c({n});
        for (std::size_t i = 0; i < n; ++i) {
            a.data[i] = 0.5 + rng.uniform01();
            b.data[i] = 0.5 + rng.uniform01();
            c.data[i] = 0.5 + rng.uniform01();
        }
        DenseArray x({n});
        for (std::size_t i = 0; i < n; ++i) x.data[i] = 0.25 + rng.uniform01();

        auto poly = [&a, &b, &c](const DenseArray& v) {
            double s = 1.0;
            for (std::size_t i = 0; i < v.size(); ++i) {
                const double vi = v.data[i];
                s += a.data[i] * vi * vi * vi + b.data[i] * vi * vi + c.data[i] * vi;
            }
            return s;
        };
        const DenseArray fd = finite_diff_grad(poly, x, 1e-5);
        for (std::size_t i = 0; i < n; ++i) {
            const double an =
                3.0 * a.data[i] * x.data[i] * x.data[i] + 2.0 * b.data[i] * x.data[i] + c.data[i];
            CAPTURE(trial, i, an, fd.data[i]);
            REQUIRE(relative_error(fd.data[i], an) < 1e-6);
        }
    }
}

TEST_CASE("dense array invariants") {
    REQUIRE_THROWS_AS(DenseArray({2}, {1.0}), std::invalid_argument);
    const DenseArray a({2, 3});
    REQUIRE(a.size() == 6);
    REQUIRE(a.finite());
    DenseArray bad = DenseArray::vec({1.0, std::nan("")});
    REQUIRE_FALSE(bad.finite());
    REQUIRE_THROWS_AS(require_finite(bad, "test"), NumericError);
}
