#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "kitebot/wind.hpp"

using namespace kitebot;

namespace {

WindScenario plain(double v_ref, double alpha = 0.14) {
    WindScenario w;
    w.v_ref = v_ref;
    w.alpha = alpha;
    return w;
}

} // namespace

TEST(WindAt, ReferenceHeightGivesReferenceSpeed) { EXPECT_DOUBLE_EQ(wind_at(plain(4.0), 10.0, 0.0), 4.0); }

TEST(WindAt, PowerLawAtTwiceReference) {
    // 2^0.14 evaluated independently: exp(0.14 ln 2).
    const double expected = 4.0 * std::exp(0.14 * 0.69314718055994531);
    EXPECT_NEAR(wind_at(plain(4.0), 20.0, 0.0), expected, 1e-12);
    EXPECT_NEAR(expected, 4.4076, 1e-4);
}

TEST(WindAt, FloorBelowHalfMetre) {
    const auto w = plain(4.0);
    EXPECT_DOUBLE_EQ(wind_at(w, 0.0, 0.0), wind_at(w, 0.5, 0.0));
    EXPECT_GT(wind_at(w, 0.0, 0.0), 0.0);
}

TEST(WindAt, ZeroMultiplierLullIsCalm) {
    auto w = plain(4.0);
    w.noise_amplitude = 1.0;
    w.noise_seed = 7;
    w.events = {{100.0, 120.0, 0.0}};
    EXPECT_EQ(wind_at(w, 50.0, 110.0), 0.0);
}

TEST(WindAt, EventWindowIsHalfOpen) {
    auto w = plain(4.0, 0.0);
    w.events = {{10.0, 20.0, 0.5}};
    EXPECT_DOUBLE_EQ(wind_at(w, 10.0, 9.999), 4.0);
    EXPECT_DOUBLE_EQ(wind_at(w, 10.0, 10.0), 2.0);
    EXPECT_DOUBLE_EQ(wind_at(w, 10.0, 19.999), 2.0);
    EXPECT_DOUBLE_EQ(wind_at(w, 10.0, 20.0), 4.0);
}

TEST(WindAt, NeverNegative) {
    auto w = plain(0.5, 0.0);
    w.noise_amplitude = 3.0;
    w.noise_seed = 3;
    for (double t = 0.0; t < 200.0; t += 0.1) EXPECT_GE(wind_at(w, 10.0, t), 0.0);
}

TEST(WindAt, DeterministicBitForBit) {
    auto w = plain(3.0);
    w.noise_amplitude = 1.0;
    w.noise_seed = 42;
    for (double t = 0.0; t < 30.0; t += 0.37) {
        const double a = wind_at(w, 37.5, t);
        const double b = wind_at(w, 37.5, t);
        EXPECT_EQ(std::memcmp(&a, &b, sizeof a), 0);
    }
}

TEST(WindNoise, BoundedContinuousAndSeeded) {
    WindScenario w;
    w.noise_amplitude = 0.8;
    w.noise_seed = 1;
    WindScenario other = w;
    other.noise_seed = 2;
    double prev = wind_noise(w, 0.0);
    bool differs = false;
    for (double t = 0.01; t < 100.0; t += 0.01) {
        const double n = wind_noise(w, t);
        EXPECT_LE(std::abs(n), 0.8 + 1e-12);
        EXPECT_LT(std::abs(n - prev), 2 * 0.8 * 0.01 + 1e-9); // piecewise linear, slope at most 2A per second
        prev = n;
        if (n != wind_noise(other, t)) differs = true;
    }
    EXPECT_TRUE(differs);
    // Knots are the hashed values themselves.
    EXPECT_DOUBLE_EQ(wind_noise(w, 5.0), 0.8 * detail::hashed_unit(1, 5));
}

TEST(ScenarioSweep, EndpointsOnlyWithTwoSteps) {
    const auto s = scenario_sweep(plain(4.0), 0.0, 150.0, 2);
    ASSERT_EQ(s.size(), 2u);
    EXPECT_EQ(s.front().first, 0.0);
    EXPECT_EQ(s.back().first, 150.0);
}

TEST(ScenarioSweep, ConstantWithoutShear) {
    for (const auto& [z, v] : scenario_sweep(plain(4.0, 0.0), 0.0, 150.0, 16)) EXPECT_DOUBLE_EQ(v, 4.0);
}

TEST(ScenarioSweep, MonotoneWithShear) {
    const auto s = scenario_sweep(plain(4.0), 0.0, 150.0, 301);
    for (std::size_t i = 1; i < s.size(); ++i) EXPECT_GE(s[i].second, s[i - 1].second);
}

TEST(ScenarioSweep, DefaultProfileStaysInSkyWindRange) {
    // Defaults: 4 m/s at 10 m, exponent 0.14. At 150 m: 4 * 15^0.14 = 5.86 m/s.
    for (const auto& [z, v] : scenario_sweep(WindScenario{}, 0.0, 150.0, 151)) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 12.0);
    }
    EXPECT_NEAR(scenario_sweep(WindScenario{}, 0.0, 150.0, 2).back().second, 4.0 * std::pow(15.0, 0.14), 1e-12);
}

TEST(ScenarioSweep, RejectsBadRange) {
    EXPECT_THROW(scenario_sweep(plain(4.0), 10.0, 10.0, 5), std::invalid_argument);
    EXPECT_THROW(scenario_sweep(plain(4.0), 0.0, 10.0, 1), std::invalid_argument);
}
