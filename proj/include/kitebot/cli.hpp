// Command-line front end: sim, replay, analyze, tune, serve.
//
// Exit codes: 0 success, 1 usage or validation error, 2 I/O error.
#pragma once

#include <atomic>
#include <chrono>
#include <csignal>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"
#include "kitebot/scenarios.hpp"
#include "kitebot/server.hpp"
#include "kitebot/simulation.hpp"
#include "kitebot/tuning.hpp"

namespace kitebot {

enum ExitCode : int { kExitOk = 0, kExitInvalid = 1, kExitIo = 2 };

namespace cli {

inline std::atomic<bool> g_interrupted{false};

inline void on_signal(int) { g_interrupted = true; }

struct Streams {
    std::ostream& out;
    std::ostream& err;
};

inline Config config_or_default(const std::string& path) { return path.empty() ? Config{} : load_config(path); }

inline std::string fixed(double x, int digits = 2) {
    char buf[48];
    std::snprintf(buf, sizeof buf, "%.*f", digits, x);
    return buf;
}

inline std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

inline int cmd_sim(const std::string& config_path, const std::string& scenario_name, std::optional<double> duration,
                   const std::string& out_dir, std::uint64_t seed, bool realtime, bool as_json, Streams io) {
    const Config cfg = config_or_default(config_path);
    const Scenario scenario = resolve_scenario(scenario_name);
    const double d = duration.value_or(scenario.duration);

    TickHook pace;
    if (realtime) {
        const auto start = std::chrono::steady_clock::now();
        pace = [start](double t) {
            std::this_thread::sleep_until(start + std::chrono::duration_cast<std::chrono::steady_clock::duration>(
                                                      std::chrono::duration<double>(t)));
        };
    }
    const auto run = run_scenario(cfg, scenario, d, derive_seeds(seed), pace);
    const auto manifest_path = write_run(out_dir, run);
    const auto& o = run.manifest.outcome;
    if (as_json) {
        io.out << json{{"run_id", run.manifest.run_id},
                       {"manifest", manifest_path},
                       {"log", join_path(out_dir, run.manifest.log_file)},
                       {"records", run.log.size()},
                       {"outcome", to_json(o)}}
                      .dump(2)
               << '\n';
    } else {
        io.out << "run " << run.manifest.run_id << ": " << run.log.size() << " records, max altitude "
               << fixed(o.max_altitude) << " m, aloft " << fixed(o.time_aloft, 1) << " s, line travel "
               << fixed(o.line_travel) << " m\n"
               << "manifest " << manifest_path << '\n';
    }
    return kExitOk;
}

inline int cmd_replay(const std::string& manifest_path, bool as_json, Streams io) {
    const auto r = replay(manifest_path);
    if (as_json) {
        json j = {{"identical", r.identical}, {"original", r.original_path}, {"records", r.rerun.log.size()}};
        if (!r.identical) j["first_difference_byte"] = r.first_difference;
        io.out << j.dump(2) << '\n';
    } else if (r.identical) {
        io.out << "replay identical: " << r.rerun.log.size() << " records match " << r.original_path << '\n';
    } else {
        io.out << "replay differs from " << r.original_path << " at byte " << r.first_difference << '\n';
    }
    return r.identical ? kExitOk : kExitInvalid;
}

inline int cmd_analyze(const std::string& log_path, bool lag, const std::string& kml_path, bool as_json, Streams io) {
    const auto log = read_log(log_path);
    json j = {{"records", log.size()}};
    double max_alt = 0.0;
    for (const auto& r : log) max_alt = std::max(max_alt, r.altitude);
    j["max_altitude_m"] = max_alt;
    if (!log.empty()) j["span_s"] = log.back().t - log.front().t;

    std::optional<LagResult> lr;
    if (lag) {
        lr = analyze_lag(log);
        j["lag_s"] = lr->lag_s;
        j["correlation"] = lr->correlation;
    }
    if (!kml_path.empty()) {
        write_text_file(kml_path, export_kml(log, GeoOrigin{}));
        j["kml"] = kml_path;
    }
    if (as_json) {
        io.out << j.dump(2) << '\n';
        return kExitOk;
    }
    io.out << log.size() << " records, max altitude " << fixed(max_alt) << " m\n";
    if (lr) {
        char buf[96];
        std::snprintf(buf, sizeof buf, "lag %.1f s (correlation %.3f)\n", lr->lag_s, lr->correlation);
        io.out << buf;
    }
    if (!kml_path.empty()) io.out << "kml " << kml_path << '\n';
    return kExitOk;
}

inline int cmd_tune(const std::string& config_path, std::size_t budget, const std::string& out_dir,
                    const std::vector<std::string>& scenario_names, std::uint64_t seed, bool as_json, Streams io) {
    const Config cfg = config_or_default(config_path);
    std::vector<Scenario> suite;
    for (const auto& n : scenario_names) suite.push_back(resolve_scenario(n));
    if (suite.empty()) suite = training_suite();

    TuningOptions opt;
    opt.seeds = derive_seeds(seed);
    const auto r = optimize(cfg, suite, budget, opt);

    std::error_code ec;
    std::filesystem::create_directories(out_dir, ec);
    if (ec) throw IoError("cannot create " + out_dir + ": " + ec.message());
    const auto tuned_path = join_path(out_dir, "tuned.json");
    const auto history_path = join_path(out_dir, "history.csv");
    write_text_file(tuned_path, serialize_config(r.best));
    write_text_file(history_path, format_history_csv(r.history));

    if (as_json) {
        io.out << json{{"initial_objective", r.initial_objective},
                       {"best_objective", r.best_objective},
                       {"evaluations", r.history.size()},
                       {"tuned", tuned_path},
                       {"history", history_path},
                       {"windhold", windhold_to_json(r.best.controller)}}
                      .dump(2)
               << '\n';
    } else {
        io.out << "objective " << fixed(r.initial_objective, 6) << " -> " << fixed(r.best_objective, 6)
               << " after " << r.history.size() << " evaluations\n"
               << "tuned config " << tuned_path << "\nhistory " << history_path << '\n';
    }
    return kExitOk;
}

inline int cmd_serve(const std::string& config_path, const std::string& bind, const std::string& scenario_name,
                     double speed, std::uint64_t seed, Streams io) {
    const Config cfg = config_or_default(config_path);
    const Scenario scenario = resolve_scenario(scenario_name);
    const auto addr = parse_bind(bind);
    if (!(speed >= 0.0)) throw ValidationError({"speed must be non-negative"});

    GroundStation station(cfg, scenario, derive_seeds(seed), {speed});
    StationServer server(station);
    const int port = server.bind(addr);
    station.start();
    io.out << "serving " << scenario.name << " on http://" << addr.host << ':' << port << std::endl;

    g_interrupted = false;
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    std::thread http([&] { server.listen(); });
    while (!g_interrupted) std::this_thread::sleep_for(std::chrono::milliseconds(100));
    server.stop();
    http.join();
    station.stop();
    io.out << "stopped\n";
    return kExitOk;
}

} // namespace cli

/// Parses argv and runs one subcommand.
inline int run_cli(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"kitebot: tethered kite simulator and ground station"};
    app.require_subcommand(1);
    app.fallthrough();
    bool as_json = false;
    app.add_flag("--json", as_json, "Machine-readable output");

    std::string config_path, scenario_name, out_dir, manifest_path, log_path, kml_path, bind = "127.0.0.1:8080";
    std::optional<double> duration;
    std::uint64_t seed = 1;
    bool realtime = false, lag = false;
    std::size_t budget = 200;
    std::vector<std::string> tune_scenarios;
    std::string serve_scenario = "flight-6min";
    double speed = 1.0;

    auto* sim = app.add_subcommand("sim", "Run a scenario and write log + manifest");
    sim->add_option("--config", config_path, "Config JSON (built-in defaults if omitted)");
    sim->add_option("--scenario", scenario_name, "Bundled scenario name or scenario JSON path")->required();
    sim->add_option("--duration", duration, "Simulated seconds (scenario default if omitted)");
    sim->add_option("--out", out_dir, "Output directory")->required();
    sim->add_option("--seed", seed, "Master seed");
    sim->add_flag("--realtime", realtime, "Pace the run to the wall clock");

    auto* rep = app.add_subcommand("replay", "Re-run a manifest and compare logs byte for byte");
    rep->add_option("--manifest", manifest_path, "manifest.json")->required();

    auto* ana = app.add_subcommand("analyze", "Summarize a flight log");
    ana->add_option("--log", log_path, "Flight log CSV")->required();
    ana->add_flag("--lag", lag, "Wind/altitude lag by cross-correlation");
    ana->add_option("--kml", kml_path, "Write the reconstructed GPS trail as KML");

    auto* tun = app.add_subcommand("tune", "Optimize the wind-hold table");
    tun->add_option("--config", config_path, "Starting config JSON (built-in defaults if omitted)");
    tun->add_option("--budget", budget, "Evaluations")->check(CLI::PositiveNumber);
    tun->add_option("--out", out_dir, "Output directory")->required();
    tun->add_option("--scenario", tune_scenarios, "Training scenario (repeatable; default steady, gusty, lull)");
    tun->add_option("--seed", seed, "Master seed");

    auto* srv = app.add_subcommand("serve", "Host a live run behind the HTTP API");
    srv->add_option("--config", config_path, "Config JSON (built-in defaults if omitted)");
    srv->add_option("--bind", bind, "host:port, port 0 picks a free port");
    srv->add_option("--scenario", serve_scenario, "Scenario to fly");
    srv->add_option("--speed", speed, "Simulated seconds per wall second, 0 for unpaced");
    srv->add_option("--seed", seed, "Master seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp&) {
        out << app.help();
        return kExitOk;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\n\n" << app.help();
        return kExitInvalid;
    }

    const cli::Streams io{out, err};
    try {
        if (*sim) return cli::cmd_sim(config_path, scenario_name, duration, out_dir, seed, realtime, as_json, io);
        if (*rep) return cli::cmd_replay(manifest_path, as_json, io);
        if (*ana) return cli::cmd_analyze(log_path, lag, kml_path, as_json, io);
        if (*tun) return cli::cmd_tune(config_path, budget, out_dir, tune_scenarios, seed, as_json, io);
        if (*srv) return cli::cmd_serve(config_path, bind, serve_scenario, speed, seed, io);
    } catch (const IoError& e) {
        err << "error: " << e.what() << '\n';
        return kExitIo;
    } catch (const ValidationError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const ParseError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    } catch (const AnalysisError& e) {
        err << "error: " << e.what() << '\n';
        return kExitInvalid;
    }
    return kExitInvalid;
}

} // namespace kitebot
