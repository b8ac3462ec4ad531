// Closed-loop flight simulation: sensors, downlink, controller, uplink, winch
// and plant, advanced in lockstep on simulated time.
#pragma once

#include <chrono>
#include <cmath>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "kitebot/controllers.hpp"
#include "kitebot/core.hpp"
#include "kitebot/flight_log.hpp"
#include "kitebot/physics.hpp"
#include "kitebot/sensors.hpp"
#include "kitebot/telemetry.hpp"
#include "kitebot/wind.hpp"

namespace kitebot {

/// Wind field and mission setup for one flight, plus its nominal length.
struct Scenario {
    std::string name = "custom";
    WindScenario wind;
    MissionParams mission;
    double duration = 360.0; // s

    friend bool operator==(const Scenario&, const Scenario&) = default;
};

inline json to_json(const Scenario& s) {
    return {{"name", s.name}, {"duration_s", s.duration}, {"wind", to_json(s.wind)}, {"mission", to_json(s.mission)}};
}

inline Scenario scenario_from_json(const json& j) {
    Scenario s;
    detail::ObjectReader r(j, "scenario");
    r.custom("name", [&](const json& a, const std::string& p) {
        if (!a.is_string()) throw ParseError(p + ": expected a string");
        s.name = a.get<std::string>();
    });
    r.number("duration_s", s.duration);
    r.custom("wind", [&](const json& a, const std::string&) { s.wind = wind_from_json(a); });
    r.custom("mission", [&](const json& a, const std::string&) { s.mission = mission_from_json(a); });
    r.finish();
    return s;
}

inline std::vector<std::string> validate_scenario(const Scenario& s, const Config& cfg) {
    auto v = validate_wind(s.wind);
    auto m = validate_mission(s.mission, cfg.controller, cfg.winch);
    v.insert(v.end(), m.begin(), m.end());
    if (!(s.duration > 0.0) || !std::isfinite(s.duration)) v.push_back("duration must be positive");
    return v;
}

/// The wind and mission sections of a configuration file, as a scenario.
inline Scenario scenario_from_config(const Config& cfg, double duration = 360.0) {
    return {"config", cfg.wind, cfg.mission, duration};
}

// ============================================================================
// Seeds
// ============================================================================

struct Seeds {
    std::uint64_t master = 0;
    std::uint64_t wind = 0;
    std::uint64_t sensor = 0;
    std::uint64_t link = 0;

    friend bool operator==(const Seeds&, const Seeds&) = default;
};

/// Independent per-subsystem seeds derived from one master seed.
inline Seeds derive_seeds(std::uint64_t master) {
    return {master, detail::splitmix64(master ^ 0x57494E44ull), detail::splitmix64(master ^ 0x53454E53ull),
            detail::splitmix64(master ^ 0x4C494E4Bull)};
}

inline json to_json(const Seeds& s) {
    return {{"master", s.master}, {"wind", s.wind}, {"sensor", s.sensor}, {"link", s.link}};
}

inline Seeds seeds_from_json(const json& j) {
    Seeds s;
    detail::ObjectReader r(j, "seeds");
    auto field = [&](const char* key, std::uint64_t& out) {
        r.custom(key, [&](const json& a, const std::string& p) {
            if (!a.is_number_unsigned() && !(a.is_number_integer() && a.get<std::int64_t>() >= 0))
                throw ParseError(p + ": expected a non-negative integer");
            out = a.get<std::uint64_t>();
        });
    };
    field("master", s.master);
    field("wind", s.wind);
    field("sensor", s.sensor);
    field("link", s.link);
    r.finish();
    return s;
}

// ============================================================================
// Simulation
// ============================================================================

/// Immutable view of the loop after a tick.
struct Snapshot {
    double t = 0.0;
    std::int64_t tick = 0;
    KiteState kite;
    WinchState winch;
    ControllerState controller;
    double true_wind = 0.0;     // m/s at the kite
    double measured_wind = 0.0; // m/s, last reading used
    std::uint16_t seq = 0;
    ParserDiagnostics link;
    std::uint64_t frames_lost = 0;
};

inline json to_json(const Snapshot& s) {
    json ctl = {{"mode", std::string(to_string(s.controller.mode))},
                {"duty_pct", s.controller.duty},
                {"stage_index", s.controller.stage_index},
                {"telemetry_lost", s.controller.telemetry_lost}};
    ctl["t_c_s"] = s.controller.t_c ? json(*s.controller.t_c) : json(nullptr);
    return {{"t_s", s.t},
            {"tick", s.tick},
            {"kite",
             {{"x_m", s.kite.x},
              {"z_m", s.kite.z},
              {"vx_mps", s.kite.vx},
              {"vz_mps", s.kite.vz},
              {"tension_n", s.kite.tension},
              {"airborne", s.kite.airborne}}},
            {"winch",
             {{"duty_pct", s.winch.duty},
              {"line_out_m", s.winch.line_out},
              {"line_speed_mps", s.winch.line_speed},
              {"encoder_m", s.winch.encoder_m}}},
            {"controller", ctl},
            {"wind", {{"true_mps", s.true_wind}, {"measured_mps", s.measured_wind}}},
            {"link",
             {{"seq", s.seq},
              {"frames", s.link.frames},
              {"bad_frames", s.link.bad_frames},
              {"dropped_bytes", s.link.dropped_bytes},
              {"lost", s.frames_lost}}}};
}

/// Owns the whole simulated system. Each call to tick() runs one control
/// period: operator commands, sensing, downlink, control law, uplink, log
/// record, then the physics steps that fill the period.
class Simulation {
public:
    Simulation(Config cfg, Scenario scenario, Seeds seeds)
        : cfg_(merged(std::move(cfg), scenario)),
          scenario_(std::move(scenario)),
          seeds_(seeds),
          plant_(PlantParams::from(cfg_)),
          sensors_({}, seeds.sensor, scenario_.mission.sensor_noise),
          downlink_(seeds.link, scenario_.mission.link_loss_prob, scenario_.mission.link_latency_ms),
          uplink_(detail::splitmix64(seeds.link), scenario_.mission.link_loss_prob, scenario_.mission.link_latency_ms) {
        wind_ = scenario_.wind;
        wind_.noise_seed ^= seeds.wind;

        const auto& m = scenario_.mission;
        period_us_ = std::llround(cfg_.controller.period * 1e6);
        steps_per_tick_ = static_cast<int>(std::llround(cfg_.controller.period / m.physics_dt));
        step_us_ = period_us_ / steps_per_tick_;

        kite_ = kite_on_line(m.initial_line, m.initial_elevation_deg);
        winch_.line_out = m.initial_line;
        winch_.duty = 0.0;
        ctl_ = enter_mode(ctl_, m.start_mode, 0.0);
        ctl_.manual_duty = m.manual_duty;
        station_ = StationParams::from(m);
        update_snapshot(std::nullopt);
    }

    double t() const noexcept { return static_cast<double>(tick_) * cfg_.controller.period; }
    std::int64_t tick_index() const noexcept { return tick_; }
    const Config& config() const noexcept { return cfg_; }
    const Scenario& scenario() const noexcept { return scenario_; }
    const Seeds& seeds() const noexcept { return seeds_; }
    const Snapshot& snapshot() const noexcept { return snap_; }
    const FlightLog& log() const noexcept { return log_; }

    /// Applies an operator command now, which is always a tick boundary.
    CommandOutcome command(const OperatorCommand& cmd) {
        auto out = apply_operator_command(ctl_, cmd, cfg_.controller, t());
        if (out.accepted) {
            ctl_ = out.state;
            snap_.controller = ctl_;
        }
        return out;
    }

    /// Replaces the wind-hold table between ticks.
    std::vector<std::string> set_controller_config(const ControllerConfig& next) {
        auto v = validate_config(next);
        if (!v.empty()) return v;
        Config candidate = cfg_;
        candidate.controller = next;
        if (auto m = validate_mission(candidate.mission, candidate.controller, candidate.winch); !m.empty()) return m;
        if (std::llround(next.period * 1e6) != period_us_) return {"period cannot change during a run"};
        cfg_ = candidate;
        ctl_.duty = std::min(ctl_.duty, next.d_max);
        return {};
    }

    const FlightLogRecord& tick() {
        const double now = t();
        const std::int64_t now_us = tick_ * period_us_;

        // Flight unit samples and transmits.
        const double wind_here = wind_at(wind_, kite_.z, now);
        const auto reading = quantize_reading(sensors_.sample(now, kite_, wind_here));
        const std::uint16_t seq = tx_seq_++;
        downlink_.send(encode_frame(make_telemetry_frame(seq, timestamp_ms(now_us), reading)), now_us);

        // Ground unit receives whatever has arrived.
        for (const auto& bytes : downlink_.deliver(now_us)) {
            for (const auto& f : ground_parser_.feed(bytes)) {
                if (f.type != FrameType::Telemetry) continue;
                latest_ = decode_telemetry_payload(f.payload, f.timestamp_ms);
            }
        }

        const auto result = controller_tick(ctl_, latest_, winch_, cfg_.controller, now, station_);
        ctl_ = result.state;
        uplink_.send(encode_frame(make_command_frame(cmd_seq_++, timestamp_ms(now_us), {ctl_.mode, result.duty})),
                     now_us);

        const double measured = latest_ ? combined_speed(latest_->wind_x, latest_->wind_y) : 0.0;
        log_.push_back({now, result.duty, measured, winch_.line_out, kite_.z, kite_.tension,
                        std::string(to_string(ctl_.mode)), seq});

        for (int i = 0; i < steps_per_tick_; ++i) {
            const std::int64_t step_start = now_us + i * step_us_;
            receive_commands(step_start);
            const double ts = static_cast<double>(tick_ * steps_per_tick_ + i) * scenario_.mission.physics_dt;
            std::tie(kite_, winch_) = step(plant_, kite_, winch_, wind_at(wind_, kite_.z, ts), scenario_.mission.physics_dt);
        }
        ++tick_;
        update_snapshot(measured);
        return log_.back();
    }

    void run_until(double duration) {
        const auto ticks = static_cast<std::int64_t>(std::llround(duration / cfg_.controller.period));
        while (tick_ < ticks) tick();
    }

private:
    /// The configuration with the scenario's wind and mission sections, after
    /// checking every invariant.
    static Config merged(Config cfg, const Scenario& scenario) {
        cfg.wind = scenario.wind;
        cfg.mission = scenario.mission;
        if (auto v = validate_config(cfg); !v.empty()) throw ValidationError(std::move(v));
        if (auto v = validate_scenario(scenario, cfg); !v.empty()) throw ValidationError(std::move(v));
        return cfg;
    }

    static std::uint32_t timestamp_ms(std::int64_t us) { return static_cast<std::uint32_t>(us / 1000); }

    void receive_commands(std::int64_t now_us) {
        for (const auto& bytes : uplink_.deliver(now_us)) {
            for (const auto& f : winch_parser_.feed(bytes)) {
                if (f.type != FrameType::Command) continue;
                winch_.duty = std::clamp(decode_command_payload(f.payload).duty, 0.0, 100.0);
            }
        }
    }

    void update_snapshot(std::optional<double> measured) {
        snap_.t = t();
        snap_.tick = tick_;
        snap_.kite = kite_;
        snap_.winch = winch_;
        snap_.controller = ctl_;
        snap_.true_wind = wind_at(wind_, kite_.z, t());
        if (measured) snap_.measured_wind = *measured;
        snap_.seq = tx_seq_;
        snap_.link = ground_parser_.diagnostics();
        snap_.frames_lost = downlink_.lost() + uplink_.lost();
    }

    Config cfg_;
    Scenario scenario_;
    Seeds seeds_;
    PlantParams plant_;
    WindScenario wind_;
    SensorSuite sensors_;
    LossyChannel downlink_;
    LossyChannel uplink_;
    StreamParser ground_parser_;
    StreamParser winch_parser_;
    StationParams station_;

    KiteState kite_;
    WinchState winch_;
    ControllerState ctl_;
    std::optional<SensorReading> latest_;
    std::uint16_t tx_seq_ = 0;
    std::uint16_t cmd_seq_ = 0;

    std::int64_t tick_ = 0;
    std::int64_t period_us_ = 200000;
    std::int64_t step_us_ = 10000;
    int steps_per_tick_ = 20;
    FlightLog log_;
    Snapshot snap_;
};

// ============================================================================
// Batch runs and manifests
// ============================================================================

struct RunOutcome {
    double max_altitude = 0.0;   // m
    double time_aloft = 0.0;     // s
    double line_travel = 0.0;    // m of spool motion
    double final_altitude = 0.0; // m
    std::string final_mode;

    friend bool operator==(const RunOutcome&, const RunOutcome&) = default;
};

inline json to_json(const RunOutcome& o) {
    return {{"max_altitude_m", o.max_altitude},
            {"time_aloft_s", o.time_aloft},
            {"line_travel_m", o.line_travel},
            {"final_altitude_m", o.final_altitude},
            {"final_mode", o.final_mode}};
}

struct RunManifest {
    std::string run_id;
    Config config;
    Scenario scenario;
    Seeds seeds;
    double duration = 0.0;
    std::string started_at; // UTC wall time, informational only
    RunOutcome outcome;
    std::string log_file = "log.csv";
};

struct RunResult {
    FlightLog log;
    RunManifest manifest;
};

inline std::uint64_t fnv1a(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::string hex64(std::uint64_t x) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(x));
    return buf;
}

inline std::string utc_now_iso8601() {
    const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
    std::tm tm{};
    gmtime_r(&now, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
}

inline RunOutcome summarize(const FlightLog& log, double period, const WinchState& final_winch, double initial_encoder) {
    RunOutcome o;
    for (const auto& r : log) {
        o.max_altitude = std::max(o.max_altitude, r.altitude);
        if (r.altitude > kGroundContact) o.time_aloft += period;
    }
    o.line_travel = final_winch.encoder_m - initial_encoder;
    if (!log.empty()) {
        o.final_altitude = log.back().altitude;
        o.final_mode = log.back().mode;
    }
    return o;
}

/// Called after every tick with the simulated time reached.
using TickHook = std::function<void(double)>;

/// Runs a scenario to completion, fast as possible unless the hook waits.
inline RunResult run_scenario(const Config& cfg, const Scenario& scenario, double duration, const Seeds& seeds,
                              const TickHook& after_tick = {}) {
    if (!(duration > 0.0) || !std::isfinite(duration)) throw ValidationError({"duration must be positive"});
    Simulation sim(cfg, scenario, seeds);
    const double encoder0 = sim.snapshot().winch.encoder_m;
    if (after_tick) {
        const auto ticks = static_cast<std::int64_t>(std::llround(duration / sim.config().controller.period));
        while (sim.tick_index() < ticks) {
            sim.tick();
            after_tick(sim.t());
        }
    } else {
        sim.run_until(duration);
    }

    RunResult out;
    out.log = sim.log();
    auto& m = out.manifest;
    m.config = sim.config();
    m.scenario = scenario;
    m.seeds = seeds;
    m.duration = duration;
    m.started_at = utc_now_iso8601();
    m.outcome = summarize(out.log, cfg.controller.period, sim.snapshot().winch, encoder0);
    const std::string identity = to_json(m.config).dump() + to_json(scenario).dump() + to_json(seeds).dump() +
                                 format_double(duration);
    m.run_id = scenario.name + "-" + hex64(fnv1a(identity)).substr(0, 12);
    return out;
}

inline json to_json(const RunManifest& m) {
    return {{"run_id", m.run_id},
            {"config", to_json(m.config)},
            {"scenario", to_json(m.scenario)},
            {"seeds", to_json(m.seeds)},
            {"duration_s", m.duration},
            {"started_at", m.started_at},
            {"outcome", to_json(m.outcome)},
            {"log_file", m.log_file}};
}

inline RunOutcome outcome_from_json(const json& j) {
    RunOutcome o;
    detail::ObjectReader r(j, "outcome");
    r.number("max_altitude_m", o.max_altitude);
    r.number("time_aloft_s", o.time_aloft);
    r.number("line_travel_m", o.line_travel);
    r.number("final_altitude_m", o.final_altitude);
    r.custom("final_mode", [&](const json& a, const std::string& p) {
        if (!a.is_string()) throw ParseError(p + ": expected a string");
        o.final_mode = a.get<std::string>();
    });
    r.finish();
    return o;
}

inline RunManifest manifest_from_json(const json& j) {
    RunManifest m;
    try {
        detail::ObjectReader r(j, "manifest");
        auto text = [&](const char* key, std::string& out) {
            r.custom(key, [&](const json& a, const std::string& p) {
                if (!a.is_string()) throw ParseError(p + ": expected a string");
                out = a.get<std::string>();
            });
        };
        text("run_id", m.run_id);
        r.custom("config", [&](const json& a, const std::string&) { m.config = config_from_json(a); });
        r.custom("scenario", [&](const json& a, const std::string&) { m.scenario = scenario_from_json(a); });
        r.custom("seeds", [&](const json& a, const std::string&) { m.seeds = seeds_from_json(a); });
        r.number("duration_s", m.duration);
        text("started_at", m.started_at);
        r.custom("outcome", [&](const json& a, const std::string&) { m.outcome = outcome_from_json(a); });
        text("log_file", m.log_file);
        r.finish();
    } catch (const json::exception& e) {
        throw ParseError(std::string("manifest: ") + e.what());
    }
    return m;
}

inline RunManifest load_manifest(const std::string& path) {
    return manifest_from_json(parse_json_text(read_text_file(path), path));
}

inline void write_text_file(const std::string& path, std::string_view text) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << text;
    if (!out) throw IoError("write failed: " + path);
}

/// Writes log and manifest into dir, creating it if needed. Returns the
/// manifest path.
inline std::string write_run(const std::string& dir, const RunResult& run) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) throw IoError("cannot create " + dir + ": " + ec.message());
    write_log((std::filesystem::path(dir) / run.manifest.log_file).string(), run.log);
    const auto manifest_path = (std::filesystem::path(dir) / "manifest.json").string();
    write_text_file(manifest_path, to_json(run.manifest).dump(2) + "\n");
    return manifest_path;
}

struct ReplayResult {
    bool identical = false;
    std::string original_path;
    std::size_t first_difference = 0; // byte offset, valid when not identical
    RunResult rerun;
};

/// Re-runs the flight described by a manifest and compares the regenerated
/// log text with the stored one byte for byte.
inline ReplayResult replay(const std::string& manifest_path) {
    const auto m = load_manifest(manifest_path);
    ReplayResult out;
    out.original_path = (std::filesystem::path(manifest_path).parent_path() / m.log_file).string();
    const std::string original = read_text_file(out.original_path);
    out.rerun = run_scenario(m.config, m.scenario, m.duration, m.seeds);
    const std::string regenerated = format_log(out.rerun.log);
    out.identical = regenerated == original;
    if (!out.identical) {
        const auto mis = std::mismatch(original.begin(), original.end(), regenerated.begin(), regenerated.end());
        out.first_difference = static_cast<std::size_t>(mis.first - original.begin());
    }
    return out;
}

} // namespace kitebot
