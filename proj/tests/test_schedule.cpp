#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "idpo/rng.hpp"
#include "idpo/schedule.hpp"

using namespace idpo;

TEST_CASE("make_schedule endpoints") {
    const NoiseSchedule s = make_schedule(1, 0.25);
    REQUIRE(s.alpha.size() == 2);
    REQUIRE(s.alpha[0] == 1.0);
    REQUIRE(s.alpha[1] == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("make_schedule log-linear midpoint") {
    // oracle: exp of the mean of the endpoint logs
    const NoiseSchedule s = make_schedule(2, 0.25);
    const double expected = std::exp(0.5 * (std::log(1.0) + std::log(0.25)));
    REQUIRE(s.alpha[1] == Catch::Approx(expected).margin(1e-15));
    REQUIRE(s.alpha[1] == Catch::Approx(0.5).margin(1e-15));
    REQUIRE(s.alpha[2] == Catch::Approx(0.25).margin(1e-15));
}

TEST_CASE("make_schedule rejects bad arguments") {
    REQUIRE_THROWS_AS(make_schedule(0, 0.5), std::invalid_argument);
    REQUIRE_THROWS_AS(make_schedule(10, 0.0), std::invalid_argument);
    REQUIRE_THROWS_AS(make_schedule(10, 1.0), std::invalid_argument);
    REQUIRE_THROWS_AS(make_schedule(10, -0.2), std::invalid_argument);
}

TEST_CASE("sigma is identically zero") {
    const NoiseSchedule s = make_schedule(10, 0.01);
    for (double v : s.sigma) REQUIRE(v == 0.0);
}

TEST_CASE("snr_log values") {
    // alpha_1 = 0.5 -> 0, alpha = 0.8 -> log 4
    const NoiseSchedule half = make_schedule(2, 0.25);
    REQUIRE(snr_log(half, 1) == Catch::Approx(0.0).margin(1e-14));
    const NoiseSchedule s = make_schedule(1, 0.8);
    REQUIRE(snr_log(s, 1) == Catch::Approx(std::log(4.0)).margin(1e-12));
    REQUIRE_THROWS_AS(snr_log(s, 0), std::invalid_argument);
    REQUIRE_THROWS_AS(snr_log(s, 2), std::invalid_argument);
}

TEST_CASE("schedule invariants hold for random parameters") {
    RngState rng(99);
    for (int trial = 0; trial < 200; ++trial) {
        const int T = 1 + static_cast<int>(rng.below(200));
        const double target = 1e-6 + 0.9989 * rng.uniform01();
        const NoiseSchedule s = make_schedule(T, target);
        REQUIRE(s.alpha[0] == 1.0);
        REQUIRE(s.alpha[T] > 0.0);
        for (int t = 1; t <= T; ++t) {
            REQUIRE(s.alpha[t] < s.alpha[t - 1]);
        }
        double prev = snr_log(s, 1);
        for (int t = 2; t <= T; ++t) {
            const double cur = snr_log(s, t);
            REQUIRE(cur < prev);
            prev = cur;
        }
    }
}

TEST_CASE("direct construction validates invariants") {
    REQUIRE_THROWS_AS(NoiseSchedule({0.9, 0.5}), std::invalid_argument);  // alpha_0 != 1
    REQUIRE_THROWS_AS(NoiseSchedule({1.0, 0.5, 0.5}), std::invalid_argument); // not decreasing
    REQUIRE_THROWS_AS(NoiseSchedule({1.0}), std::invalid_argument);       // T = 0
    const NoiseSchedule ok({1.0, 0.81, 0.49});
    REQUIRE(ok.T == 2);
    REQUIRE(ok.id != 0);
}
