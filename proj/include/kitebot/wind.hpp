// Deterministic wind field: power-law vertical shear, scripted temporal
// events and seeded smooth noise.
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <utility>
#include <vector>

#include "kitebot/core.hpp"

namespace kitebot {

/// Altitudes below this are evaluated at the floor to avoid the power-law
/// singularity at the ground.
inline constexpr double kWindFloorAltitude = 0.5; // m

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

/// Uniform in [-1, 1], a pure function of (seed, index).
inline double hashed_unit(std::uint64_t seed, std::int64_t index) {
    const std::uint64_t h = splitmix64(seed ^ splitmix64(static_cast<std::uint64_t>(index)));
    return static_cast<double>(h >> 11) * (2.0 / 9007199254740992.0) - 1.0;
}

} // namespace detail

/// Multiplier of the event active at t, or 1 outside every event.
inline double event_multiplier(const WindScenario& s, double t) {
    for (const auto& e : s.events)
        if (t >= e.t_start && t < e.t_end) return e.multiplier;
    return 1.0;
}

/// Smooth noise: one random offset per whole second, linearly interpolated.
inline double wind_noise(const WindScenario& s, double t) {
    if (s.noise_amplitude == 0.0) return 0.0;
    const double k = std::floor(t);
    const double frac = t - k;
    const auto i = static_cast<std::int64_t>(k);
    const double a = detail::hashed_unit(s.noise_seed, i);
    const double b = detail::hashed_unit(s.noise_seed, i + 1);
    return s.noise_amplitude * (a + (b - a) * frac);
}

/// Undisturbed power-law profile value at altitude z.
inline double shear_profile(const WindScenario& s, double z) {
    if (s.alpha == 0.0) return s.v_ref;
    return s.v_ref * std::pow(std::max(z, kWindFloorAltitude) / s.z_ref, s.alpha);
}

/// Horizontal wind speed at altitude z and time t. Noise is added to the
/// profile before the event multiplier, so a zero-multiplier lull is calm.
inline double wind_at(const WindScenario& s, double z, double t) {
    const double base = shear_profile(s, z) + wind_noise(s, t);
    return std::max(0.0, base) * event_multiplier(s, t);
}

/// Samples the profile at t = 0 over evenly spaced altitudes, endpoints
/// included.
inline std::vector<std::pair<double, double>> scenario_sweep(const WindScenario& s, double z_min, double z_max,
                                                             int steps, double t = 0.0) {
    if (!(z_min < z_max) || steps < 2) throw std::invalid_argument("scenario_sweep: need z_min < z_max and steps >= 2");
    std::vector<std::pair<double, double>> out;
    out.reserve(static_cast<std::size_t>(steps));
    for (int i = 0; i < steps; ++i) {
        const double z = i + 1 == steps ? z_max : z_min + (z_max - z_min) * i / (steps - 1);
        out.emplace_back(z, wind_at(s, z, t));
    }
    return out;
}

} // namespace kitebot
