#include <gtest/gtest.h>

#include <random>

#include "kitebot/controllers.hpp"

using namespace kitebot;

namespace {

const ControllerConfig kCfg;

double takeoff_at(double t, double l, ControllerState& s) {
    auto r = takeoff_duty(t, l, kCfg, s);
    s = r.state;
    return r.duty;
}

SensorReading reading(double t, double wind) {
    SensorReading r;
    r.t = t;
    r.wind_x = wind;
    return r;
}

WinchState winch_at(double line) {
    WinchState w;
    w.line_out = line;
    return w;
}

} // namespace

// ============================================================================
// Takeoff profile
// ============================================================================

TEST(TakeoffDuty, RampStartsAtZero) {
    ControllerState s;
    EXPECT_EQ(takeoff_at(0.0, 100.0, s), 0.0);
}

TEST(TakeoffDuty, RampMidpoint) {
    ControllerState s;
    EXPECT_NEAR(takeoff_at(kCfg.t_u / 2.0, 100.0, s), kCfg.d_max / 2.0, 1e-12);
}

TEST(TakeoffDuty, RampAndHoldAgreeAtTu) {
    ControllerState s;
    EXPECT_NEAR(takeoff_at(kCfg.t_u, 100.0, s), kCfg.d_max, 1e-12);
    EXPECT_NEAR(takeoff_at(std::nextafter(kCfg.t_u, 10.0), 100.0, s), kCfg.d_max, 1e-12);
    EXPECT_FALSE(s.t_c.has_value());
}

TEST(TakeoffDuty, HoldsWhileLineAboveTarget) {
    ControllerState s;
    for (double t = 3.2; t < 30.0; t += 0.2) EXPECT_EQ(takeoff_at(t, 50.01, s), kCfg.d_max);
    EXPECT_FALSE(s.t_c.has_value());
}

TEST(TakeoffDuty, WindingTo50mTriggersDecay) {
    ControllerState s;
    takeoff_at(10.0, 60.0, s);
    EXPECT_NEAR(takeoff_at(10.2, 50.0, s), kCfg.d_max, 1e-12); // decay starts at full duty
    ASSERT_TRUE(s.t_c.has_value());
    EXPECT_EQ(*s.t_c, 10.2);
}

TEST(TakeoffDuty, DecayMidpointAndEnd) {
    ControllerState s;
    takeoff_at(20.0, 49.0, s);
    ASSERT_TRUE(s.t_c.has_value());
    EXPECT_NEAR(takeoff_at(20.0 + kCfg.t_d / 2.0, 49.0, s), kCfg.d_max / 2.0, 1e-12);
    auto r = takeoff_duty(20.0 + kCfg.t_d, 49.0, kCfg, s);
    EXPECT_EQ(r.duty, 0.0);
    EXPECT_TRUE(r.finished);
    r = takeoff_duty(40.0, 49.0, kCfg, s);
    EXPECT_EQ(r.duty, 0.0);
}

TEST(TakeoffDuty, DecayTimeLatchesOnce) {
    ControllerState s;
    takeoff_at(10.0, 49.0, s);
    takeoff_at(11.0, 70.0, s); // line grows again, decay keeps going
    EXPECT_EQ(*s.t_c, 10.0);
    EXPECT_NEAR(takeoff_at(11.5, 70.0, s), kCfg.d_max * (1.0 - 1.5 / kCfg.t_d), 1e-12);
}

TEST(TakeoffDuty, RampTakesPriorityOverShortLine) {
    ControllerState s;
    EXPECT_NEAR(takeoff_at(1.5, 10.0, s), 50.0, 1e-12);
    EXPECT_FALSE(s.t_c.has_value());
}

// ============================================================================
// Wind hold
// ============================================================================

TEST(StageIndex, Bands) {
    const auto& th = kCfg.thresholds;
    EXPECT_EQ(stage_index(0.0, th), 1);
    EXPECT_EQ(stage_index(1.5, th), 2); // boundary goes up
    EXPECT_EQ(stage_index(2.999, th), 4);
    EXPECT_EQ(stage_index(3.0, th), 5);
    EXPECT_EQ(stage_index(6.0, th), 7);
    EXPECT_EQ(stage_index(60.0, th), 7);
}

TEST(WindHoldUpdate, EveryDefaultStage) {
    // One wind speed inside each band, with its delta from the default table.
    const double winds[] = {1.0, 1.7, 2.2, 2.7, 3.5, 5.0, 8.0};
    const double deltas[] = {8.0, 5.0, 2.0, 0.0, -2.0, -5.0, -8.0};
    for (int i = 0; i < 7; ++i) {
        SCOPED_TRACE(i);
        // Arithmetic case.
        EXPECT_EQ(wind_hold_update(50.0, winds[i], kCfg), 50.0 + deltas[i]);
        // Upper clamp.
        EXPECT_EQ(wind_hold_update(100.0, winds[i], kCfg), deltas[i] > 0.0 ? 100.0 : 100.0 + deltas[i]);
        EXPECT_EQ(wind_hold_update(98.0, winds[i], kCfg), std::min(100.0, 98.0 + deltas[i]));
        // Lower clamp.
        EXPECT_EQ(wind_hold_update(0.0, winds[i], kCfg), std::max(0.0, deltas[i]));
        EXPECT_EQ(wind_hold_update(3.0, winds[i], kCfg), std::max(0.0, 3.0 + deltas[i]));
    }
}

TEST(WindHoldUpdate, DocumentedExamples) {
    EXPECT_EQ(wind_hold_update(50.0, 1.0, kCfg), 58.0);
    EXPECT_EQ(wind_hold_update(98.0, 1.0, kCfg), 100.0);
    EXPECT_EQ(wind_hold_update(3.0, 8.0, kCfg), 0.0);
    EXPECT_EQ(wind_hold_update(37.0, 2.75, kCfg), 37.0);
}

TEST(WindHoldUpdate, NonIncreasingInWind) {
    for (double duty : {0.0, 4.0, 50.0, 97.0, 100.0}) {
        double prev = wind_hold_update(duty, 0.0, kCfg);
        for (double w = 0.05; w < 10.0; w += 0.05) {
            const double d = wind_hold_update(duty, w, kCfg);
            EXPECT_LE(d, prev);
            prev = d;
        }
    }
}

TEST(WindHoldUpdate, RandomStreamsStayInRange) {
    std::mt19937_64 rng(2024);
    std::uniform_real_distribution<double> wind(0.0, 12.0);
    std::uniform_real_distribution<double> start(0.0, 100.0);
    for (int stream = 0; stream < 100000; ++stream) {
        double duty = start(rng);
        for (int k = 0; k < 20; ++k) {
            duty = wind_hold_update(duty, wind(rng), kCfg);
            ASSERT_GE(duty, 0.0);
            ASSERT_LE(duty, kCfg.d_max);
        }
    }
}

// ============================================================================
// Release
// ============================================================================

TEST(ReleaseToStation, Examples) {
    auto r = release_to_station(50.0);
    EXPECT_EQ(r.duty, 5.0);
    EXPECT_FALSE(r.arrived);
    EXPECT_TRUE(release_to_station(100.0).arrived);
    EXPECT_TRUE(release_to_station(120.0).arrived);
}

// ============================================================================
// Mode machine
// ============================================================================

TEST(ControllerTick, IdleAlwaysZero) {
    ControllerState s;
    s.duty = 40.0;
    for (int k = 0; k < 10; ++k) {
        const auto r = controller_tick(s, reading(0.2 * k, 1.0), winch_at(100.0), kCfg, 0.2 * k);
        EXPECT_EQ(r.duty, 0.0);
        s = r.state;
    }
}

TEST(ControllerTick, TakeoffFollowsProfile) {
    ControllerState s = enter_mode({}, ControllerMode::Takeoff, 0.0);
    auto r = controller_tick(s, reading(0.0, 0.0), winch_at(100.0), kCfg, 0.0);
    EXPECT_EQ(r.duty, 0.0);
    r = controller_tick(r.state, reading(1.0, 0.0), winch_at(100.0), kCfg, 1.0);
    EXPECT_NEAR(r.duty, 100.0 / 3.0, 1e-12);
}

TEST(ControllerTick, TakeoffHandsOverToRelease) {
    ControllerState s = enter_mode({}, ControllerMode::Takeoff, 0.0);
    double t = 0.0;
    for (; t < 6.0; t += 0.2) s = controller_tick(s, reading(t, 0.0), winch_at(100.0), kCfg, t).state;
    for (; s.mode == ControllerMode::Takeoff && t < 30.0; t += 0.2)
        s = controller_tick(s, reading(t, 0.0), winch_at(50.0), kCfg, t).state;
    EXPECT_EQ(s.mode, ControllerMode::Release);
    const auto r = controller_tick(s, reading(t, 0.0), winch_at(60.0), kCfg, t, {100.0, 5.0});
    EXPECT_EQ(r.duty, 5.0);
    EXPECT_EQ(r.state.mode, ControllerMode::Release);
    const auto r2 = controller_tick(r.state, reading(t, 0.0), winch_at(100.0), kCfg, t + 0.2, {100.0, 5.0});
    EXPECT_EQ(r2.state.mode, ControllerMode::WindHold);
}

TEST(ControllerTick, WindHoldFreezesOnLostTelemetry) {
    ControllerState s = enter_mode({}, ControllerMode::WindHold, 0.0);
    s.duty = 40.0;
    auto r = controller_tick(s, reading(0.0, 1.0), winch_at(100.0), kCfg, 0.0);
    EXPECT_EQ(r.duty, 48.0);
    EXPECT_FALSE(r.state.telemetry_lost);
    // Reading stops updating: still fresh at 2 periods, stale after.
    const auto last = reading(0.0, 1.0);
    r = controller_tick(r.state, last, winch_at(100.0), kCfg, 0.2);
    r = controller_tick(r.state, last, winch_at(100.0), kCfg, 0.4);
    EXPECT_EQ(r.duty, 64.0);
    for (double t : {0.6, 0.8, 1.0}) {
        r = controller_tick(r.state, last, winch_at(100.0), kCfg, t);
        EXPECT_EQ(r.duty, 64.0);
        EXPECT_TRUE(r.state.telemetry_lost);
    }
    r = controller_tick(r.state, reading(1.2, 1.0), winch_at(100.0), kCfg, 1.2);
    EXPECT_EQ(r.duty, 72.0);
    EXPECT_FALSE(r.state.telemetry_lost);
}

TEST(ControllerTick, NoReadingAtAllIsLoss) {
    ControllerState s = enter_mode({}, ControllerMode::WindHold, 0.0);
    s.duty = 30.0;
    const auto r = controller_tick(s, std::nullopt, winch_at(100.0), kCfg, 0.0);
    EXPECT_EQ(r.duty, 30.0);
    EXPECT_TRUE(r.state.telemetry_lost);
}

TEST(ControllerTick, ManualPassesOperatorDuty) {
    ControllerState s = enter_mode({}, ControllerMode::Manual, 0.0);
    s.manual_duty = 42.5;
    EXPECT_EQ(controller_tick(s, reading(0.0, 9.0), winch_at(100.0), kCfg, 0.0).duty, 42.5);
}

TEST(ControllerTick, DutyStaysInRangeForRandomInputs) {
    std::mt19937_64 rng(7);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    ControllerState s = enter_mode({}, ControllerMode::Takeoff, 0.0);
    for (int k = 0; k < 20000; ++k) {
        const double t = 0.2 * k;
        const double line = 20.0 + 150.0 * u(rng);
        std::optional<SensorReading> r;
        if (u(rng) > 0.1) r = reading(t, 10.0 * u(rng));
        const auto out = controller_tick(s, r, winch_at(line), kCfg, t);
        ASSERT_GE(out.duty, 0.0);
        ASSERT_LE(out.duty, kCfg.d_max);
        s = out.state;
        if (u(rng) < 0.01) s = apply_operator_command(s, {ControllerMode::Manual, 100.0 * u(rng)}, kCfg, t).state;
        if (u(rng) < 0.01) s = apply_operator_command(s, {ControllerMode::Takeoff, {}}, kCfg, t).state;
    }
}

// ============================================================================
// Operator commands
// ============================================================================

TEST(OperatorCommand, SequenceTransitions) {
    EXPECT_TRUE(transition_allowed(ControllerMode::Idle, ControllerMode::Takeoff));
    EXPECT_TRUE(transition_allowed(ControllerMode::Takeoff, ControllerMode::Release));
    EXPECT_TRUE(transition_allowed(ControllerMode::Release, ControllerMode::WindHold));
    EXPECT_FALSE(transition_allowed(ControllerMode::Takeoff, ControllerMode::WindHold));
    EXPECT_FALSE(transition_allowed(ControllerMode::Idle, ControllerMode::WindHold));
    EXPECT_FALSE(transition_allowed(ControllerMode::WindHold, ControllerMode::Idle));
    for (auto m : {ControllerMode::Idle, ControllerMode::Takeoff, ControllerMode::Release, ControllerMode::WindHold}) {
        EXPECT_TRUE(transition_allowed(m, ControllerMode::Manual));
        EXPECT_TRUE(transition_allowed(ControllerMode::Manual, m));
    }
}

TEST(OperatorCommand, ManualWithDuty) {
    ControllerState s = enter_mode({}, ControllerMode::WindHold, 0.0);
    const auto out = apply_operator_command(s, {ControllerMode::Manual, 40.0}, kCfg, 5.0);
    ASSERT_TRUE(out.accepted);
    EXPECT_EQ(out.state.mode, ControllerMode::Manual);
    const auto r = controller_tick(out.state, reading(5.0, 3.0), winch_at(100.0), kCfg, 5.0);
    EXPECT_EQ(r.duty, 40.0);
}

TEST(OperatorCommand, RejectsOutOfRangeDuty) {
    ControllerState s = enter_mode({}, ControllerMode::Manual, 0.0);
    s.manual_duty = 20.0;
    for (double bad : {140.0, -1.0, std::nan("")}) {
        const auto out = apply_operator_command(s, {ControllerMode::Manual, bad}, kCfg, 1.0);
        EXPECT_FALSE(out.accepted);
        EXPECT_EQ(out.reason, CommandRejection::InvalidDuty);
        EXPECT_EQ(out.state, s);
    }
}

TEST(OperatorCommand, DutyOnlyWithManual) {
    const auto out = apply_operator_command({}, {ControllerMode::Takeoff, 40.0}, kCfg, 0.0);
    EXPECT_FALSE(out.accepted);
    EXPECT_EQ(out.reason, CommandRejection::InvalidDuty);
}

TEST(OperatorCommand, SkippingReleaseIsRejected) {
    ControllerState s = enter_mode({}, ControllerMode::Takeoff, 0.0);
    const auto out = apply_operator_command(s, {ControllerMode::WindHold, {}}, kCfg, 1.0);
    EXPECT_FALSE(out.accepted);
    EXPECT_EQ(out.reason, CommandRejection::Transition);
    EXPECT_EQ(out.state.mode, ControllerMode::Takeoff);
}

TEST(OperatorCommand, EnteringTakeoffRestartsProfile) {
    ControllerState s;
    s.t_c = 3.0;
    const auto out = apply_operator_command(s, {ControllerMode::Takeoff, {}}, kCfg, 12.0);
    ASSERT_TRUE(out.accepted);
    EXPECT_EQ(out.state.takeoff_t0, 12.0);
    EXPECT_FALSE(out.state.t_c.has_value());
}

TEST(OperatorCommand, ManualWithoutDutyHoldsCurrentDuty) {
    ControllerState s = enter_mode({}, ControllerMode::WindHold, 0.0);
    s.duty = 33.0;
    const auto out = apply_operator_command(s, {ControllerMode::Manual, {}}, kCfg, 1.0);
    ASSERT_TRUE(out.accepted);
    EXPECT_EQ(out.state.manual_duty, 33.0);
}
