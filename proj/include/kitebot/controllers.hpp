// Winch control laws and the mode machine that sequences them.
//
// The takeoff law winds the line in along a ramp-hold-decay profile; the wind
// hold law nudges duty every period by an amount looked up from the measured
// wind speed band.
#pragma once

#include <algorithm>
#include <cstddef>
#include <optional>
#include <string>

#include "kitebot/core.hpp"
#include "kitebot/physics.hpp"
#include "kitebot/sensors.hpp"

namespace kitebot {

struct ControllerState {
    ControllerMode mode = ControllerMode::Idle;
    double duty = 0.0;       // percent, last commanded
    double takeoff_t0 = 0.0; // s, when TAKEOFF was entered
    std::optional<double> t_c; // s since takeoff start, set when the hold ends
    int stage_index = 0;     // last wind band used by wind hold, 0 if none yet
    double manual_duty = 0.0;
    bool telemetry_lost = false;

    friend bool operator==(const ControllerState&, const ControllerState&) = default;
};

/// Targets for the release phase between takeoff and wind hold.
struct StationParams {
    double target_line = 100.0; // m
    double brake_duty = 5.0;    // percent

    static StationParams from(const MissionParams& m) { return {m.station_line, m.release_duty}; }
};

// ============================================================================
// Takeoff
// ============================================================================

struct TakeoffResult {
    double duty = 0.0;
    ControllerState state;
    bool finished = false; // the decay has run out
};

/// Takeoff winding profile evaluated at t seconds after takeoff start with l
/// metres of line out. Ramp, hold and decay are tried in that order. The
/// decay start time is latched in state.t_c the first time the hold
/// condition fails and never moves afterwards.
inline TakeoffResult takeoff_duty(double t, double l, const ControllerConfig& cfg, ControllerState state) {
    TakeoffResult out;
    if (!state.t_c) {
        if (t <= cfg.t_u) {
            out.duty = cfg.d_max * std::max(0.0, t) / cfg.t_u;
            out.state = state;
            return out;
        }
        if (l > cfg.l_start - cfg.pull_in) {
            out.duty = cfg.d_max;
            out.state = state;
            return out;
        }
        state.t_c = t;
    }
    const double since = t - *state.t_c;
    if (since >= cfg.t_d) {
        out.duty = 0.0;
        out.finished = true;
    } else {
        out.duty = cfg.d_max * (1.0 - since / cfg.t_d);
    }
    out.state = state;
    return out;
}

// ============================================================================
// Wind hold
// ============================================================================

/// One-based band index i with thresholds[i-1] <= W < thresholds[i]. A wind
/// speed equal to a threshold belongs to the band above it.
inline int stage_index(double wind, const std::vector<double>& thresholds) {
    const int n = static_cast<int>(thresholds.size()) - 1;
    if (n < 1) return 0;
    const auto it = std::upper_bound(thresholds.begin(), thresholds.end(), wind);
    const int i = static_cast<int>(it - thresholds.begin());
    return std::clamp(i, 1, n);
}

inline double wind_hold_update(double duty_prev, double wind, const ControllerConfig& cfg) {
    const int i = stage_index(wind, cfg.thresholds);
    const double delta = cfg.deltas[static_cast<std::size_t>(i - 1)];
    return std::clamp(duty_prev + delta, 0.0, cfg.d_max);
}

// ============================================================================
// Release to station
// ============================================================================

struct ReleaseResult {
    double duty = 0.0;
    bool arrived = false;
};

/// Holds the brake level while line tension pays out the spool, until the
/// line reaches the station length.
inline ReleaseResult release_to_station(double l, double target_l = 100.0, double brake_duty = 5.0) {
    return {brake_duty, l >= target_l};
}

// ============================================================================
// Mode machine
// ============================================================================

/// Readings older than this are treated as lost.
inline double staleness_limit(const ControllerConfig& cfg) { return 2.0 * cfg.period + 1e-9; }

inline bool reading_fresh(const std::optional<SensorReading>& r, double t, const ControllerConfig& cfg) {
    return r.has_value() && t - r->t <= staleness_limit(cfg);
}

inline ControllerState enter_mode(ControllerState s, ControllerMode mode, double t) {
    s.mode = mode;
    if (mode == ControllerMode::Takeoff) {
        s.takeoff_t0 = t;
        s.t_c.reset();
    }
    if (mode == ControllerMode::WindHold) s.stage_index = 0;
    return s;
}

struct TickResult {
    double duty = 0.0;
    ControllerState state;
};

/// One control period. The wind hold law is the only one that consumes the
/// downlinked wind reading; when that reading is stale it freezes duty. The
/// loss flag is maintained in every mode.
inline TickResult controller_tick(ControllerState s, const std::optional<SensorReading>& reading,
                                  const WinchState& winch, const ControllerConfig& cfg, double t,
                                  const StationParams& station = {}) {
    const bool fresh = reading_fresh(reading, t, cfg);
    s.telemetry_lost = !fresh;

    switch (s.mode) {
    case ControllerMode::Idle:
        s.duty = 0.0;
        break;
    case ControllerMode::Takeoff: {
        auto r = takeoff_duty(t - s.takeoff_t0, winch.line_out, cfg, s);
        s = r.state;
        s.duty = r.duty;
        if (r.finished) s = enter_mode(s, ControllerMode::Release, t);
        break;
    }
    case ControllerMode::Release: {
        const auto r = release_to_station(winch.line_out, station.target_line, station.brake_duty);
        s.duty = std::clamp(r.duty, 0.0, cfg.d_max);
        if (r.arrived) s = enter_mode(s, ControllerMode::WindHold, t);
        break;
    }
    case ControllerMode::WindHold:
        if (fresh) {
            const double w = combined_speed(reading->wind_x, reading->wind_y);
            s.stage_index = stage_index(w, cfg.thresholds);
            s.duty = wind_hold_update(s.duty, w, cfg);
        }
        break;
    case ControllerMode::Manual:
        s.duty = std::clamp(s.manual_duty, 0.0, cfg.d_max);
        break;
    }
    return {s.duty, s};
}

// ============================================================================
// Operator commands
// ============================================================================

struct OperatorCommand {
    ControllerMode mode = ControllerMode::Manual;
    std::optional<double> duty; // percent, MANUAL only
};

/// Mode that follows m in the automatic sequence, if any.
inline std::optional<ControllerMode> next_mode(ControllerMode m) {
    switch (m) {
    case ControllerMode::Idle: return ControllerMode::Takeoff;
    case ControllerMode::Takeoff: return ControllerMode::Release;
    case ControllerMode::Release: return ControllerMode::WindHold;
    default: return std::nullopt;
    }
}

inline bool transition_allowed(ControllerMode from, ControllerMode to) {
    if (from == to || to == ControllerMode::Manual || from == ControllerMode::Manual) return true;
    return next_mode(from) == to;
}

enum class CommandRejection { None, InvalidDuty, Transition };

struct CommandOutcome {
    bool accepted = false;
    CommandRejection reason = CommandRejection::None;
    std::string error;
    ControllerState state;
};

/// Applies an operator command at a tick boundary. Rejected commands leave
/// the state untouched.
inline CommandOutcome apply_operator_command(const ControllerState& s, const OperatorCommand& cmd,
                                             const ControllerConfig& cfg, double t) {
    CommandOutcome out{false, CommandRejection::None, {}, s};
    if (cmd.duty) {
        out.reason = CommandRejection::InvalidDuty;
        if (cmd.mode != ControllerMode::Manual) {
            out.error = "duty is only accepted with MANUAL";
            return out;
        }
        if (!(*cmd.duty >= 0.0 && *cmd.duty <= cfg.d_max)) {
            out.error = "duty out of range [0, " + std::to_string(static_cast<int>(cfg.d_max)) + "]";
            return out;
        }
        out.reason = CommandRejection::None;
    }
    if (!transition_allowed(s.mode, cmd.mode)) {
        out.reason = CommandRejection::Transition;
        out.error = "transition " + std::string(to_string(s.mode)) + " -> " + std::string(to_string(cmd.mode)) +
                    " not allowed";
        return out;
    }
    ControllerState next = s.mode == cmd.mode ? s : enter_mode(s, cmd.mode, t);
    if (cmd.mode == ControllerMode::Manual) next.manual_duty = cmd.duty.value_or(s.mode == cmd.mode ? s.manual_duty : s.duty);
    out.accepted = true;
    out.state = next;
    return out;
}

} // namespace kitebot
