// Coordinate search over the wind-hold table.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "kitebot/simulation.hpp"

namespace kitebot {

struct FlightMetrics {
    double time_aloft_fraction = 0.0;
    double mean_altitude = 0.0;     // m
    double altitude_variance = 0.0; // m^2
    double line_travel = 0.0;       // m
    bool crashed = false;           // touched ground after having flown

    friend bool operator==(const FlightMetrics&, const FlightMetrics&) = default;
};

inline json to_json(const FlightMetrics& m) {
    return {{"time_aloft_fraction", m.time_aloft_fraction},
            {"mean_altitude_m", m.mean_altitude},
            {"altitude_variance_m2", m.altitude_variance},
            {"line_travel_m", m.line_travel},
            {"crashed", m.crashed}};
}

inline FlightMetrics reduce_metrics(const FlightLog& log, double line_travel) {
    FlightMetrics m;
    m.line_travel = line_travel;
    if (log.empty()) return m;
    std::size_t aloft = 0;
    double sum = 0.0;
    bool flown = false;
    for (const auto& r : log) {
        const bool up = r.altitude > kGroundContact;
        if (up) {
            ++aloft;
            flown = true;
        } else if (flown) {
            m.crashed = true;
        }
        sum += r.altitude;
    }
    const auto n = static_cast<double>(log.size());
    m.time_aloft_fraction = static_cast<double>(aloft) / n;
    m.mean_altitude = sum / n;
    double ss = 0.0;
    for (const auto& r : log) ss += (r.altitude - m.mean_altitude) * (r.altitude - m.mean_altitude);
    m.altitude_variance = ss / n;
    return m;
}

inline FlightMetrics evaluate(const Config& cfg, const Scenario& scenario, const Seeds& seeds) {
    const auto run = run_scenario(cfg, scenario, scenario.duration, seeds);
    return reduce_metrics(run.log, run.manifest.outcome.line_travel);
}

struct ObjectiveParams {
    double lambda = 0.1;
};

/// Aloft fraction minus a travel penalty. Travel is normalized by the
/// distance the spool covers running flat out at take-up speed for the
/// whole scenario.
inline double objective(const FlightMetrics& m, double duration, const WinchParams& winch, const ObjectiveParams& p = {}) {
    const double normalizer = winch.max_take_up_speed * duration;
    return m.time_aloft_fraction - p.lambda * m.line_travel / normalizer;
}

/// Mean objective over the suite.
inline double suite_objective(const Config& cfg, const std::vector<Scenario>& suite, const Seeds& seeds,
                              const ObjectiveParams& p = {}) {
    if (suite.empty()) throw std::invalid_argument("suite_objective: empty suite");
    double total = 0.0;
    for (const auto& s : suite) total += objective(evaluate(cfg, s, seeds), s.duration, cfg.winch, p);
    return total / static_cast<double>(suite.size());
}

inline std::string config_hash(const ControllerConfig& c) {
    return hex64(fnv1a(windhold_to_json(c).dump() + takeoff_to_json(c).dump()));
}

// ============================================================================
// Projection
// ============================================================================

struct SearchBounds {
    double max_threshold = 15.0; // m/s, cap on the last finite threshold
    double min_gap = 0.05;       // m/s between neighbouring thresholds
};

/// Sets deltas[i] and drags its neighbours along so the sequence stays
/// non-increasing. Values are limited to [-d_max, d_max].
inline ControllerConfig project_delta(ControllerConfig c, std::size_t i, double value) {
    value = std::clamp(value, -c.d_max, c.d_max);
    c.deltas[i] = value;
    for (std::size_t j = 0; j < i; ++j) c.deltas[j] = std::max(c.deltas[j], value);
    for (std::size_t j = i + 1; j < c.deltas.size(); ++j) c.deltas[j] = std::min(c.deltas[j], value);
    return c;
}

/// Moves an interior threshold within the gap left by its neighbours.
inline ControllerConfig project_threshold(ControllerConfig c, std::size_t i, double value, const SearchBounds& b = {}) {
    const auto& th = c.thresholds;
    const double lo = th[i - 1] + b.min_gap;
    const double hi = std::isfinite(th[i + 1]) ? th[i + 1] - b.min_gap : b.max_threshold;
    if (lo <= hi) c.thresholds[i] = std::clamp(value, lo, hi);
    return c;
}

// ============================================================================
// Search
// ============================================================================

struct TuningOptions {
    Seeds seeds = derive_seeds(1);
    ObjectiveParams objective;
    SearchBounds bounds;
    double delta_step = 16.0;     // percent per tick
    double threshold_step = 0.5;  // m/s
    double min_delta_step = 0.25;
    double min_threshold_step = 0.05;
};

struct TuningEvaluation {
    std::size_t index = 0;
    double objective = 0.0;
    std::string hash;
    ControllerConfig controller;
    double best_objective = 0.0;
};

struct TuningResult {
    Config best;
    double best_objective = 0.0;
    double initial_objective = 0.0;
    std::vector<TuningEvaluation> history;
};

/// Coordinate search over the deltas, then the finite interior thresholds.
/// Each distinct candidate costs one evaluation of the whole suite; steps
/// halve after a pass that finds nothing better. Stops when the budget is
/// spent or both steps fall below their minimum.
inline TuningResult optimize(const Config& initial, const std::vector<Scenario>& suite, std::size_t budget,
                             const TuningOptions& opt = {}) {
    if (budget < 1) throw std::invalid_argument("optimize: budget must be at least 1");
    if (auto v = validate_config(initial.controller); !v.empty()) throw ValidationError(std::move(v));

    TuningResult out;
    std::map<std::string, double> seen;
    auto eval = [&](const ControllerConfig& c) -> std::optional<double> {
        const auto h = config_hash(c);
        if (seen.count(h) || out.history.size() >= budget) return std::nullopt;
        Config cfg = initial;
        cfg.controller = c;
        const double f = suite_objective(cfg, suite, opt.seeds, opt.objective);
        seen[h] = f;
        const double best = out.history.empty() ? f : std::max(out.history.back().best_objective, f);
        out.history.push_back({out.history.size(), f, h, c, best});
        return f;
    };

    ControllerConfig best = initial.controller;
    double best_f = *eval(best);
    out.initial_objective = best_f;

    double ds = opt.delta_step;
    double ts = opt.threshold_step;
    while (out.history.size() < budget && (ds >= opt.min_delta_step || ts >= opt.min_threshold_step)) {
        bool improved = false;
        auto try_candidate = [&](const ControllerConfig& c) {
            if (!validate_config(c).empty()) return;
            if (auto f = eval(c); f && *f > best_f) {
                best = c;
                best_f = *f;
                improved = true;
            }
        };
        if (ds >= opt.min_delta_step) {
            for (std::size_t i = 0; i < best.deltas.size(); ++i) {
                const double base = best.deltas[i];
                try_candidate(project_delta(best, i, base + ds));
                try_candidate(project_delta(best, i, base - ds));
            }
        }
        if (ts >= opt.min_threshold_step) {
            for (std::size_t i = 1; i + 1 < best.thresholds.size(); ++i) {
                const double base = best.thresholds[i];
                try_candidate(project_threshold(best, i, base + ts, opt.bounds));
                try_candidate(project_threshold(best, i, base - ts, opt.bounds));
            }
        }
        if (!improved) {
            ds /= 2.0;
            ts /= 2.0;
        }
    }

    out.best = initial;
    out.best.controller = best;
    out.best_objective = best_f;
    return out;
}

inline std::string format_history_csv(const std::vector<TuningEvaluation>& history) {
    std::string s = "index,objective,config_hash\n";
    for (const auto& e : history) s += std::to_string(e.index) + ',' + format_double(e.objective) + ',' + e.hash + '\n';
    return s;
}

/// The deliberately broken starting table: every band pays out hard.
inline ControllerConfig all_payout_table(ControllerConfig c = {}) {
    std::fill(c.deltas.begin(), c.deltas.end(), -8.0);
    return c;
}

} // namespace kitebot
