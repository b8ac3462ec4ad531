// Shared domain types, unit conventions and configuration handling.
//
// All quantities are SI (m, s, kg, N, Pa). Winch duty ratio is expressed in
// percent, 0-100.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace kitebot {

using json = nlohmann::json;

inline constexpr double kStandardGravity = 9.80665;
inline constexpr double kPi = 3.14159265358979323846;
inline constexpr double kInfinity = std::numeric_limits<double>::infinity();

// ============================================================================
// Errors
// ============================================================================

/// Malformed input: unreadable JSON, wrong types, unknown keys.
class ParseError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Well-formed input that violates one or more invariants.
class ValidationError : public std::runtime_error {
public:
    explicit ValidationError(std::vector<std::string> violations)
        : std::runtime_error(join(violations)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string join(const std::vector<std::string>& v) {
        std::string out = "invalid configuration:";
        for (const auto& s : v) out += " [" + s + "]";
        return out;
    }
    std::vector<std::string> violations_;
};

/// File system failures (missing files, unwritable directories).
class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ============================================================================
// Simulation clock
// ============================================================================

/// Fixed-step clock. Time is derived from an integer tick count so that it
/// never accumulates floating point drift.
class SimClock {
public:
    explicit SimClock(double dt) : dt_(dt) {
        if (!(dt > 0.0)) throw std::invalid_argument("SimClock: dt must be positive");
    }

    double dt() const noexcept { return dt_; }
    std::int64_t tick_index() const noexcept { return tick_; }
    double t() const noexcept { return static_cast<double>(tick_) * dt_; }

    void advance() noexcept { ++tick_; }

private:
    double dt_;
    std::int64_t tick_ = 0;
};

// ============================================================================
// Physical model parameters
// ============================================================================

/// C_L such that 0.5*rho*C_L*A*v^2 balances the weight of kite plus flight
/// unit at the given wind speed.
inline double sustain_lift_coeff(double kite_mass, double unit_mass, double wing_area,
                                 double air_density, double gravity, double sustain_wind) {
    return 2.0 * (kite_mass + unit_mass) * gravity /
           (air_density * wing_area * sustain_wind * sustain_wind);
}

struct PhysicalConstants {
    double kite_mass = 0.70;           // kg
    double unit_mass = 0.85;           // kg
    double wing_area = 3.2 * 1.5;      // m^2, span x chord
    double air_density = 1.225;        // kg/m^3
    double gravity = kStandardGravity; // m/s^2
    double line_mass_per_m = 0.000371; // kg/m (37.1 g per 100 m)
    double lift_coeff = sustain_lift_coeff(0.70, 0.85, 3.2 * 1.5, 1.225, kStandardGravity, 2.5);
    double drag_coeff = lift_coeff / 5.0;

    friend bool operator==(const PhysicalConstants&, const PhysicalConstants&) = default;
};

/// Line-winding machine: motor, electric clutch and spool limits.
struct WinchParams {
    double max_pull = 64.0 * kStandardGravity; // N at 100 % duty
    double max_take_up_speed = 2.5;            // m/s
    double max_payout_speed = 5.0;             // m/s
    // Linear force-speed motor curve: full speed with no load, stall at max_pull.
    double motor_gain = 2.5 / (64.0 * kStandardGravity); // m/s per N of surplus pull
    double clutch_gain = 0.3;                  // m/s per N of tension above holding force
    double brake_force = 4.0;                  // N, clutch holding force at zero duty
    double line_capacity = 300.0;              // m
    double min_line = 2.0;                     // m, the spool never winds past this

    friend bool operator==(const WinchParams&, const WinchParams&) = default;
};

/// Tether as a unilateral spring-damper. Stiffness is expressed per unit
/// length (EA), so that stretch under a given load is a fixed fraction of the
/// paid-out length.
struct TetherParams {
    double axial_stiffness = 64.0 * kStandardGravity * 1000.0; // N; 0.1 % stretch at 64 kgf
    double damping_ratio = 0.5;

    friend bool operator==(const TetherParams&, const TetherParams&) = default;
};

// ============================================================================
// Controller configuration
// ============================================================================

struct ControllerConfig {
    // Takeoff winding profile.
    double d_max = 100.0;  // percent
    double t_u = 3.0;      // s, ramp-up duration
    double t_d = 3.0;      // s, ramp-down duration
    double l_start = 100.0; // m
    double pull_in = 50.0;  // m, hold while line > l_start - pull_in

    // Staged wind-hold table. thresholds[0] == 0, thresholds.back() is +inf.
    std::vector<double> thresholds{0.0, 1.5, 2.0, 2.5, 3.0, 4.0, 6.0, kInfinity};
    std::vector<double> deltas{+8.0, +5.0, +2.0, 0.0, -2.0, -5.0, -8.0};
    double period = 0.2; // s

    int n_stages() const noexcept { return static_cast<int>(deltas.size()); }

    friend bool operator==(const ControllerConfig&, const ControllerConfig&) = default;
};

// ============================================================================
// Wind scenario
// ============================================================================

struct WindEvent {
    double t_start = 0.0; // s, inclusive
    double t_end = 0.0;   // s, exclusive
    double multiplier = 1.0;

    friend bool operator==(const WindEvent&, const WindEvent&) = default;
};

struct WindScenario {
    double alpha = 0.14;  // shear exponent
    double v_ref = 4.0;   // m/s at z_ref
    double z_ref = 10.0;  // m
    std::vector<WindEvent> events;
    std::uint64_t noise_seed = 0;
    double noise_amplitude = 0.0; // m/s

    friend bool operator==(const WindScenario&, const WindScenario&) = default;
};

// ============================================================================
// Mission / simulation setup
// ============================================================================

enum class ControllerMode : std::uint8_t { Idle = 0, Takeoff = 1, Release = 2, WindHold = 3, Manual = 4 };

inline std::string_view to_string(ControllerMode m) {
    switch (m) {
    case ControllerMode::Idle: return "IDLE";
    case ControllerMode::Takeoff: return "TAKEOFF";
    case ControllerMode::Release: return "RELEASE_TO_STATION";
    case ControllerMode::WindHold: return "WIND_HOLD";
    case ControllerMode::Manual: return "MANUAL";
    }
    return "?";
}

inline std::optional<ControllerMode> mode_from_string(std::string_view s) {
    if (s == "IDLE") return ControllerMode::Idle;
    if (s == "TAKEOFF") return ControllerMode::Takeoff;
    if (s == "RELEASE_TO_STATION" || s == "RELEASE") return ControllerMode::Release;
    if (s == "WIND_HOLD") return ControllerMode::WindHold;
    if (s == "MANUAL") return ControllerMode::Manual;
    return std::nullopt;
}

/// How a simulated flight starts and how the plant is wired.
struct MissionParams {
    ControllerMode start_mode = ControllerMode::Takeoff;
    double initial_line = 100.0;         // m paid out at t = 0
    double initial_elevation_deg = 0.0;  // 0 = kite lying on the ground, line taut
    double station_line = 100.0;         // m, release target before wind hold
    double release_duty = 5.0;           // percent, brake level while paying out to station
    double manual_duty = 0.0;            // percent, used when start_mode is MANUAL
    bool line_locked = false;            // spool mechanically locked, duty ignored
    double physics_dt = 0.01;            // s
    double link_loss_prob = 0.0;
    double link_latency_ms = 20.0;
    bool sensor_noise = true;

    friend bool operator==(const MissionParams&, const MissionParams&) = default;
};

/// Everything needed to reproduce a run, apart from seeds and duration.
struct Config {
    PhysicalConstants physics;
    WinchParams winch;
    TetherParams tether;
    ControllerConfig controller;
    WindScenario wind;
    MissionParams mission;

    friend bool operator==(const Config&, const Config&) = default;
};

// ============================================================================
// Validation
// ============================================================================

inline std::vector<std::string> validate_physics(const PhysicalConstants& p) {
    std::vector<std::string> v;
    auto positive = [&](double x, const char* name) {
        if (!(x > 0.0) || !std::isfinite(x)) v.push_back(std::string(name) + " must be positive");
    };
    positive(p.kite_mass, "kite_mass");
    positive(p.unit_mass, "unit_mass");
    positive(p.wing_area, "wing_area");
    positive(p.lift_coeff, "lift_coeff");
    positive(p.drag_coeff, "drag_coeff");
    positive(p.air_density, "air_density");
    positive(p.gravity, "gravity");
    positive(p.line_mass_per_m, "line_mass_per_m");
    return v;
}

inline std::vector<std::string> validate_winch(const WinchParams& w) {
    std::vector<std::string> v;
    auto positive = [&](double x, const char* name) {
        if (!(x > 0.0) || !std::isfinite(x)) v.push_back(std::string(name) + " must be positive");
    };
    positive(w.max_pull, "max_pull");
    positive(w.max_take_up_speed, "max_take_up_speed");
    positive(w.max_payout_speed, "max_payout_speed");
    positive(w.motor_gain, "motor_gain");
    positive(w.clutch_gain, "clutch_gain");
    positive(w.line_capacity, "line_capacity");
    if (!(w.brake_force >= 0.0)) v.push_back("brake_force must be non-negative");
    if (!(w.min_line >= 0.0) || !(w.min_line < w.line_capacity)) v.push_back("min_line out of range");
    return v;
}

inline std::vector<std::string> validate_tether(const TetherParams& t) {
    std::vector<std::string> v;
    if (!(t.axial_stiffness > 0.0)) v.push_back("axial_stiffness must be positive");
    if (!(t.damping_ratio >= 0.0)) v.push_back("damping_ratio must be non-negative");
    return v;
}

/// Every violated invariant of the controller configuration, named by field
/// and rule. Empty means valid.
inline std::vector<std::string> validate_config(const ControllerConfig& c) {
    std::vector<std::string> v;
    if (!(c.d_max > 0.0 && c.d_max <= 100.0)) v.push_back("d_max out of range");
    if (!(c.t_u > 0.0)) v.push_back("t_u must be positive");
    if (!(c.t_d > 0.0)) v.push_back("t_d must be positive");
    if (!(c.period > 0.0) || !std::isfinite(c.period)) v.push_back("period must be positive");
    if (!(c.l_start > 0.0)) v.push_back("l_start must be positive");
    if (!(c.pull_in > 0.0)) v.push_back("pull_in must be positive");
    else if (c.pull_in > c.l_start) v.push_back("pull_in exceeds l_start");

    const auto& th = c.thresholds;
    if (th.size() < 2) {
        v.push_back("thresholds need at least two entries");
    } else {
        if (th.front() != 0.0) v.push_back("thresholds must start at 0");
        // The last entry is the +inf sentinel; only finite entries are ordered.
        for (std::size_t i = 1; i + 1 < th.size(); ++i) {
            if (!(th[i] > th[i - 1]) || !std::isfinite(th[i])) {
                v.push_back("thresholds not increasing");
                break;
            }
        }
        if (th.size() >= 3 && !(th.back() > th[th.size() - 2]))
            v.push_back("thresholds not increasing");
    }
    if (c.deltas.size() + 1 != th.size()) v.push_back("deltas length must equal n_stages");
    for (std::size_t i = 1; i < c.deltas.size(); ++i) {
        if (c.deltas[i] > c.deltas[i - 1]) {
            v.push_back("deltas not non-increasing");
            break;
        }
    }
    for (double d : c.deltas) {
        if (!std::isfinite(d)) {
            v.push_back("deltas must be finite");
            break;
        }
    }
    // Duplicate messages from the two threshold checks collapse to one.
    std::vector<std::string> unique;
    for (auto& s : v)
        if (std::find(unique.begin(), unique.end(), s) == unique.end()) unique.push_back(std::move(s));
    return unique;
}

inline std::vector<std::string> validate_wind(const WindScenario& w) {
    std::vector<std::string> v;
    if (!(w.alpha >= 0.0) || !std::isfinite(w.alpha)) v.push_back("alpha must be non-negative");
    if (!(w.v_ref >= 0.0) || !std::isfinite(w.v_ref)) v.push_back("v_ref must be non-negative");
    if (!(w.z_ref > 0.0) || !std::isfinite(w.z_ref)) v.push_back("z_ref must be positive");
    if (!(w.noise_amplitude >= 0.0)) v.push_back("noise_amplitude must be non-negative");
    for (std::size_t i = 0; i < w.events.size(); ++i) {
        const auto& e = w.events[i];
        if (!(e.t_end > e.t_start) || !(e.t_start >= 0.0))
            v.push_back("event " + std::to_string(i) + " has an empty or negative interval");
        if (!(e.multiplier >= 0.0)) v.push_back("event " + std::to_string(i) + " multiplier must be non-negative");
        if (i > 0 && e.t_start < w.events[i - 1].t_end)
            v.push_back("events overlap or are not time-ordered");
    }
    return v;
}

inline std::vector<std::string> validate_mission(const MissionParams& m, const ControllerConfig& c,
                                                 const WinchParams& w) {
    std::vector<std::string> v;
    if (!(m.physics_dt > 0.0)) v.push_back("physics_dt must be positive");
    else if (c.period > 0.0) {
        const double ratio = c.period / m.physics_dt;
        if (std::abs(ratio - std::round(ratio)) > 1e-9 || std::round(ratio) < 1.0)
            v.push_back("period must be an integer multiple of physics_dt");
    }
    if (!(m.initial_line >= w.min_line && m.initial_line <= w.line_capacity))
        v.push_back("initial_line out of range");
    if (!(m.station_line > 0.0 && m.station_line <= w.line_capacity)) v.push_back("station_line out of range");
    if (!(m.initial_elevation_deg >= 0.0 && m.initial_elevation_deg < 90.0))
        v.push_back("initial_elevation_deg out of range");
    if (!(m.release_duty >= 0.0 && m.release_duty <= 100.0)) v.push_back("release_duty out of range");
    if (!(m.manual_duty >= 0.0 && m.manual_duty <= 100.0)) v.push_back("manual_duty out of range");
    if (!(m.link_loss_prob >= 0.0 && m.link_loss_prob <= 1.0)) v.push_back("link_loss_prob out of range");
    if (!(m.link_latency_ms >= 0.0)) v.push_back("link_latency_ms must be non-negative");
    return v;
}

inline std::vector<std::string> validate_config(const Config& cfg) {
    std::vector<std::string> v;
    auto append = [&](std::vector<std::string> more) {
        v.insert(v.end(), std::make_move_iterator(more.begin()), std::make_move_iterator(more.end()));
    };
    append(validate_physics(cfg.physics));
    append(validate_winch(cfg.winch));
    append(validate_tether(cfg.tether));
    append(validate_config(cfg.controller));
    append(validate_wind(cfg.wind));
    append(validate_mission(cfg.mission, cfg.controller, cfg.winch));
    return v;
}

// ============================================================================
// JSON mapping
// ============================================================================

namespace detail {

/// Reads fields out of a JSON object, rejecting keys nobody asked for.
class ObjectReader {
public:
    ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
        if (!j_.is_object()) throw ParseError(path_ + ": expected an object");
    }

    void number(const char* key, double& out) {
        seen_.emplace_back(key);
        auto it = j_.find(key);
        if (it == j_.end()) return;
        if (!it->is_number()) throw ParseError(path_ + "." + key + ": expected a number");
        out = it->get<double>();
    }

    bool has(const char* key) const { return j_.contains(key); }

    template <typename Fn>
    void custom(const char* key, Fn&& fn) {
        seen_.emplace_back(key);
        auto it = j_.find(key);
        if (it != j_.end()) fn(*it, path_ + "." + key);
    }

    void finish() const {
        for (auto it = j_.begin(); it != j_.end(); ++it) {
            if (std::find(seen_.begin(), seen_.end(), it.key()) == seen_.end())
                throw ParseError(path_ + ": unknown key \"" + it.key() + "\"");
        }
    }

private:
    const json& j_;
    std::string path_;
    std::vector<std::string> seen_;
};

inline std::vector<double> number_array(const json& j, const std::string& path, bool allow_null_last) {
    if (!j.is_array()) throw ParseError(path + ": expected an array");
    std::vector<double> out;
    for (std::size_t i = 0; i < j.size(); ++i) {
        const auto& e = j[i];
        if (e.is_number()) out.push_back(e.get<double>());
        else if (allow_null_last && i + 1 == j.size() && (e.is_null() || e == "inf")) out.push_back(kInfinity);
        else throw ParseError(path + "[" + std::to_string(i) + "]: expected a number");
    }
    return out;
}

inline json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

} // namespace detail

inline PhysicalConstants physics_from_json(const json& j) {
    PhysicalConstants p;
    detail::ObjectReader r(j, "physics");
    r.number("kite_mass_kg", p.kite_mass);
    r.number("unit_mass_kg", p.unit_mass);
    r.number("wing_area_m2", p.wing_area);
    r.number("air_density_kgpm3", p.air_density);
    r.number("gravity_mps2", p.gravity);
    r.number("line_mass_kgpm", p.line_mass_per_m);
    double sustain = 2.5;
    r.number("sustain_wind_mps", sustain);
    p.lift_coeff = sustain > 0.0 ? sustain_lift_coeff(p.kite_mass, p.unit_mass, p.wing_area, p.air_density,
                                                      p.gravity, sustain)
                                 : 0.0;
    r.number("lift_coeff", p.lift_coeff);
    p.drag_coeff = p.lift_coeff / 5.0;
    r.number("drag_coeff", p.drag_coeff);
    r.finish();
    return p;
}

inline json to_json(const PhysicalConstants& p) {
    return {{"kite_mass_kg", p.kite_mass},   {"unit_mass_kg", p.unit_mass},
            {"wing_area_m2", p.wing_area},   {"air_density_kgpm3", p.air_density},
            {"gravity_mps2", p.gravity},     {"line_mass_kgpm", p.line_mass_per_m},
            {"lift_coeff", p.lift_coeff},    {"drag_coeff", p.drag_coeff}};
}

inline WinchParams winch_from_json(const json& j) {
    WinchParams w;
    detail::ObjectReader r(j, "winch");
    r.number("max_pull_n", w.max_pull);
    r.number("max_take_up_mps", w.max_take_up_speed);
    r.number("max_payout_mps", w.max_payout_speed);
    r.number("motor_gain_mps_per_n", w.motor_gain);
    r.number("clutch_gain_mps_per_n", w.clutch_gain);
    r.number("brake_force_n", w.brake_force);
    r.number("line_capacity_m", w.line_capacity);
    r.number("min_line_m", w.min_line);
    r.finish();
    return w;
}

inline json to_json(const WinchParams& w) {
    return {{"max_pull_n", w.max_pull},
            {"max_take_up_mps", w.max_take_up_speed},
            {"max_payout_mps", w.max_payout_speed},
            {"motor_gain_mps_per_n", w.motor_gain},
            {"clutch_gain_mps_per_n", w.clutch_gain},
            {"brake_force_n", w.brake_force},
            {"line_capacity_m", w.line_capacity},
            {"min_line_m", w.min_line}};
}

inline TetherParams tether_from_json(const json& j) {
    TetherParams t;
    detail::ObjectReader r(j, "tether");
    r.number("axial_stiffness_n", t.axial_stiffness);
    r.number("damping_ratio", t.damping_ratio);
    r.finish();
    return t;
}

inline json to_json(const TetherParams& t) {
    return {{"axial_stiffness_n", t.axial_stiffness}, {"damping_ratio", t.damping_ratio}};
}

inline void takeoff_from_json(const json& j, ControllerConfig& c) {
    detail::ObjectReader r(j, "takeoff");
    r.number("d_max", c.d_max);
    r.number("t_u_s", c.t_u);
    r.number("t_d_s", c.t_d);
    r.number("l_start_m", c.l_start);
    r.number("pull_in_m", c.pull_in);
    r.finish();
}

inline void windhold_from_json(const json& j, ControllerConfig& c) {
    detail::ObjectReader r(j, "windhold");
    r.custom("thresholds_mps", [&](const json& a, const std::string& p) { c.thresholds = detail::number_array(a, p, true); });
    r.custom("deltas_pct", [&](const json& a, const std::string& p) { c.deltas = detail::number_array(a, p, false); });
    r.number("period_s", c.period);
    std::optional<int> n;
    r.custom("n_stages", [&](const json& a, const std::string& p) {
        if (!a.is_number_integer()) throw ParseError(p + ": expected an integer");
        n = a.get<int>();
    });
    r.finish();
    if (n && *n != c.n_stages()) throw ValidationError({"n_stages does not match deltas length"});
}

inline json takeoff_to_json(const ControllerConfig& c) {
    return {{"d_max", c.d_max}, {"t_u_s", c.t_u}, {"t_d_s", c.t_d}, {"l_start_m", c.l_start}, {"pull_in_m", c.pull_in}};
}

inline json windhold_to_json(const ControllerConfig& c) {
    json th = json::array();
    for (double x : c.thresholds) th.push_back(detail::number_or_null(x));
    return {{"thresholds_mps", th}, {"deltas_pct", c.deltas}, {"period_s", c.period}, {"n_stages", c.n_stages()}};
}

inline WindScenario wind_from_json(const json& j) {
    WindScenario w;
    detail::ObjectReader r(j, "wind");
    r.number("alpha", w.alpha);
    r.number("v_ref_mps", w.v_ref);
    r.number("z_ref_m", w.z_ref);
    r.number("noise_amplitude_mps", w.noise_amplitude);
    r.custom("noise_seed", [&](const json& a, const std::string& p) {
        if (!a.is_number_unsigned() && !(a.is_number_integer() && a.get<std::int64_t>() >= 0))
            throw ParseError(p + ": expected a non-negative integer");
        w.noise_seed = a.get<std::uint64_t>();
    });
    r.custom("events", [&](const json& a, const std::string& p) {
        if (!a.is_array()) throw ParseError(p + ": expected an array");
        for (std::size_t i = 0; i < a.size(); ++i) {
            WindEvent e;
            detail::ObjectReader er(a[i], p + "[" + std::to_string(i) + "]");
            er.number("t_start_s", e.t_start);
            er.number("t_end_s", e.t_end);
            er.number("multiplier", e.multiplier);
            er.finish();
            w.events.push_back(e);
        }
    });
    r.finish();
    return w;
}

inline json to_json(const WindScenario& w) {
    json events = json::array();
    for (const auto& e : w.events)
        events.push_back({{"t_start_s", e.t_start}, {"t_end_s", e.t_end}, {"multiplier", e.multiplier}});
    return {{"alpha", w.alpha},
            {"v_ref_mps", w.v_ref},
            {"z_ref_m", w.z_ref},
            {"events", events},
            {"noise_seed", w.noise_seed},
            {"noise_amplitude_mps", w.noise_amplitude}};
}

inline MissionParams mission_from_json(const json& j, MissionParams m = {}) {
    detail::ObjectReader r(j, "mission");
    r.custom("start_mode", [&](const json& a, const std::string& p) {
        auto mode = a.is_string() ? mode_from_string(a.get<std::string>()) : std::nullopt;
        if (!mode) throw ParseError(p + ": expected a controller mode name");
        m.start_mode = *mode;
    });
    r.number("initial_line_m", m.initial_line);
    r.number("initial_elevation_deg", m.initial_elevation_deg);
    r.number("station_line_m", m.station_line);
    r.number("release_duty_pct", m.release_duty);
    r.number("manual_duty_pct", m.manual_duty);
    r.custom("line_locked", [&](const json& a, const std::string& p) {
        if (!a.is_boolean()) throw ParseError(p + ": expected a boolean");
        m.line_locked = a.get<bool>();
    });
    r.number("physics_dt_s", m.physics_dt);
    r.number("link_loss_prob", m.link_loss_prob);
    r.number("link_latency_ms", m.link_latency_ms);
    r.custom("sensor_noise", [&](const json& a, const std::string& p) {
        if (!a.is_boolean()) throw ParseError(p + ": expected a boolean");
        m.sensor_noise = a.get<bool>();
    });
    r.finish();
    return m;
}

inline json to_json(const MissionParams& m) {
    return {{"start_mode", std::string(to_string(m.start_mode))},
            {"initial_line_m", m.initial_line},
            {"initial_elevation_deg", m.initial_elevation_deg},
            {"station_line_m", m.station_line},
            {"release_duty_pct", m.release_duty},
            {"manual_duty_pct", m.manual_duty},
            {"line_locked", m.line_locked},
            {"physics_dt_s", m.physics_dt},
            {"link_loss_prob", m.link_loss_prob},
            {"link_latency_ms", m.link_latency_ms},
            {"sensor_noise", m.sensor_noise}};
}

/// Parses a configuration document without validating invariants.
inline Config config_from_json(const json& j) {
    Config cfg;
    detail::ObjectReader r(j, "config");
    r.custom("physics", [&](const json& a, const std::string&) { cfg.physics = physics_from_json(a); });
    r.custom("winch", [&](const json& a, const std::string&) { cfg.winch = winch_from_json(a); });
    r.custom("tether", [&](const json& a, const std::string&) { cfg.tether = tether_from_json(a); });
    r.custom("takeoff", [&](const json& a, const std::string&) { takeoff_from_json(a, cfg.controller); });
    r.custom("windhold", [&](const json& a, const std::string&) { windhold_from_json(a, cfg.controller); });
    r.custom("wind", [&](const json& a, const std::string&) { cfg.wind = wind_from_json(a); });
    r.custom("mission", [&](const json& a, const std::string&) { cfg.mission = mission_from_json(a); });
    r.finish();
    return cfg;
}

inline json to_json(const Config& cfg) {
    return {{"physics", to_json(cfg.physics)},
            {"winch", to_json(cfg.winch)},
            {"tether", to_json(cfg.tether)},
            {"takeoff", takeoff_to_json(cfg.controller)},
            {"windhold", windhold_to_json(cfg.controller)},
            {"wind", to_json(cfg.wind)},
            {"mission", to_json(cfg.mission)}};
}

inline json parse_json_text(const std::string& text, const std::string& origin) {
    try {
        return json::parse(text);
    } catch (const json::parse_error& e) {
        throw ParseError(origin + ": " + e.what());
    }
}

inline std::string read_text_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot open " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Parses and validates a configuration document.
inline Config parse_config(const std::string& text, const std::string& origin = "<config>") {
    Config cfg;
    try {
        cfg = config_from_json(parse_json_text(text, origin));
    } catch (const json::exception& e) {
        throw ParseError(origin + ": " + e.what());
    }
    if (auto v = validate_config(cfg); !v.empty()) throw ValidationError(std::move(v));
    return cfg;
}

/// Loads a configuration file. Throws IoError, ParseError or ValidationError.
inline Config load_config(const std::string& path) { return parse_config(read_text_file(path), path); }

inline std::string serialize_config(const Config& cfg) { return to_json(cfg).dump(2) + "\n"; }

} // namespace kitebot
