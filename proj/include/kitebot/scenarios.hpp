// Bundled scenario shorthands.
#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "kitebot/simulation.hpp"

namespace kitebot {

namespace detail {

/// Kite already flying on a 100 m line at the given elevation, wind hold on.
inline MissionParams aloft(double elevation_deg) {
    MissionParams m;
    m.start_mode = ControllerMode::WindHold;
    m.initial_line = 100.0;
    m.initial_elevation_deg = elevation_deg;
    m.release_duty = 0.0;
    return m;
}

} // namespace detail

/// Kite lying on the ground at the end of 100 m of line. Still air near the
/// ground, a faint breeze aloft; the takeoff profile winds 50 m in.
inline Scenario takeoff_calm_scenario() {
    Scenario s;
    s.name = "takeoff-calm";
    s.wind.alpha = 0.3;
    s.wind.v_ref = 0.2;
    s.mission.start_mode = ControllerMode::Takeoff;
    s.mission.release_duty = 0.0;
    s.duration = 60.0;
    return s;
}

/// Takeoff in calm air, wind arriving at 20 s, then a lull from 270 s to
/// 290 s with recovery afterwards.
inline Scenario flight_6min_scenario() {
    Scenario s;
    s.name = "flight-6min";
    s.wind.alpha = 0.14;
    s.wind.v_ref = 2.9;
    s.wind.noise_amplitude = 0.3;
    s.wind.noise_seed = 6;
    s.wind.events = {{0.0, 20.0, 0.2 / 2.9}, {270.0, 290.0, 0.2}};
    s.mission.start_mode = ControllerMode::Takeoff;
    s.mission.release_duty = 0.0;
    s.duration = 360.0;
    return s;
}

inline Scenario steady_4mps_scenario() {
    Scenario s;
    s.name = "steady-4mps";
    s.wind.alpha = 0.0;
    s.wind.v_ref = 4.0;
    s.mission = detail::aloft(40.0);
    s.duration = 300.0;
    return s;
}

/// Line locked at 100 m; wind steps from 4 m/s to 5 m/s at t = 60 s. The
/// kite starts at its 4 m/s equilibrium elevation.
inline Scenario wind_step_scenario() {
    Scenario s;
    s.name = "wind-step";
    s.wind.alpha = 0.0;
    s.wind.v_ref = 5.0;
    s.wind.events = {{0.0, 60.0, 0.8}};
    s.mission = detail::aloft(41.0);
    s.mission.start_mode = ControllerMode::Idle;
    s.mission.line_locked = true;
    s.duration = 150.0;
    return s;
}

/// Noisy wind near the sustain speed, halved for 12 s once a minute.
inline Scenario gusty_scenario() {
    Scenario s;
    s.name = "gusty";
    s.wind.alpha = 0.14;
    s.wind.v_ref = 2.6;
    s.wind.noise_amplitude = 1.2;
    s.wind.noise_seed = 11;
    for (double t = 40.0; t < 300.0; t += 60.0) s.wind.events.push_back({t, t + 12.0, 0.5});
    s.mission = detail::aloft(30.0);
    s.duration = 300.0;
    return s;
}

/// Wind hold from the start in moderate wind with a 20 s lull at 270 s.
inline Scenario lull_scenario() {
    Scenario s;
    s.name = "lull";
    s.wind.alpha = 0.14;
    s.wind.v_ref = 2.9;
    s.wind.noise_amplitude = 0.3;
    s.wind.noise_seed = 3;
    s.wind.events = {{270.0, 290.0, 0.2}};
    s.mission = detail::aloft(30.0);
    s.duration = 360.0;
    return s;
}

inline std::vector<std::string> bundled_scenario_names() {
    return {"takeoff-calm", "flight-6min", "steady-4mps", "wind-step", "gusty", "lull"};
}

inline std::optional<Scenario> bundled_scenario(std::string_view name) {
    if (name == "takeoff-calm") return takeoff_calm_scenario();
    if (name == "flight-6min") return flight_6min_scenario();
    if (name == "steady-4mps") return steady_4mps_scenario();
    if (name == "wind-step") return wind_step_scenario();
    if (name == "gusty") return gusty_scenario();
    if (name == "lull") return lull_scenario();
    return std::nullopt;
}

/// A bundled name, or else a path to a scenario JSON file.
inline Scenario resolve_scenario(const std::string& name_or_path) {
    if (auto s = bundled_scenario(name_or_path)) return *s;
    if (!std::filesystem::exists(name_or_path))
        throw IoError("unknown scenario \"" + name_or_path + "\" (not a bundled name or an existing file)");
    try {
        return scenario_from_json(parse_json_text(read_text_file(name_or_path), name_or_path));
    } catch (const json::exception& e) {
        throw ParseError(name_or_path + ": " + e.what());
    }
}

/// Scenarios the tuner trains on: steady, gusty, and a lull.
inline std::vector<Scenario> training_suite() { return {steady_4mps_scenario(), gusty_scenario(), lull_scenario()}; }

} // namespace kitebot
