// Flight-unit sensor models: two-axis impeller anemometer, barometer, GPS and
// IMU. Every function is deterministic given its explicit noise source.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <utility>

#include "kitebot/physics.hpp"

namespace kitebot {

inline constexpr double kSeaLevelPressure = 101325.0; // Pa
inline constexpr double kMetersPerDegree = 111320.0;  // equatorial, equirectangular

/// Seeded Gaussian noise source. Copying it forks the stream.
class NoiseSource {
public:
    explicit NoiseSource(std::uint64_t seed = 0) : engine_(seed) {}

    double gaussian(double sigma) {
        if (sigma == 0.0) return 0.0;
        return sigma * normal_(engine_);
    }

    double uniform() { return uniform_(engine_); }

private:
    std::mt19937_64 engine_;
    std::normal_distribution<double> normal_{0.0, 1.0};
    std::uniform_real_distribution<double> uniform_{0.0, 1.0};
};

struct SensorReading {
    double t = 0.0;
    double wind_x = 0.0; // m/s, anemometer axis 1
    double wind_y = 0.0; // m/s, anemometer axis 2
    double pressure = kSeaLevelPressure; // Pa
    double baro_alt = 0.0;               // m
    double lat = 0.0;                    // deg
    double lon = 0.0;                    // deg
    double gps_alt = 0.0;                // m
    std::array<double, 3> accel{};       // m/s^2, specific force in body axes
    std::array<double, 3> gyro{};        // deg/s

    friend bool operator==(const SensorReading&, const SensorReading&) = default;
};

// ============================================================================
// Anemometer
// ============================================================================

struct AnemometerParams {
    double startup_threshold = 0.2; // m/s; impellers stall below this
    double gain_sigma = 0.03;       // multiplicative
    double offset_sigma = 0.05;     // m/s additive
};

/// Projects the apparent wind onto two orthogonal impeller axes. Axis 1 is
/// rotated by tilt from the horizontal downwind direction. Impellers report
/// speed, not direction, so each axis reads the absolute component.
inline std::pair<double, double> anemometer_read(Vec2 apparent, double tilt_deg, const AnemometerParams& p,
                                                 NoiseSource* noise = nullptr) {
    const double tilt = tilt_deg * kPi / 180.0;
    const Vec2 axis1{std::cos(tilt), std::sin(tilt)};
    const Vec2 axis2{-std::sin(tilt), std::cos(tilt)};
    auto channel = [&](double v) {
        v = std::abs(v);
        if (noise) v = v * (1.0 + noise->gaussian(p.gain_sigma)) + noise->gaussian(p.offset_sigma);
        v = std::max(0.0, v);
        return v < p.startup_threshold ? 0.0 : v;
    };
    const double a = channel(apparent.dot(axis1));
    const double b = channel(apparent.dot(axis2));
    return {a, b};
}

/// Tilt-independent wind magnitude from the two axis readings.
inline double combined_speed(double wind_x, double wind_y) { return std::hypot(wind_x, wind_y); }

// ============================================================================
// Barometer
// ============================================================================

/// Altitude above the reference from the standard-atmosphere pressure ratio.
inline double baro_altitude(double pressure, double ground_pressure) {
    return 44330.0 * (1.0 - std::pow(pressure / ground_pressure, 0.190263));
}

/// Inverse of baro_altitude.
inline double pressure_at_altitude(double altitude, double ground_pressure) {
    return ground_pressure * std::pow(1.0 - altitude / 44330.0, 1.0 / 0.190263);
}

// ============================================================================
// GPS
// ============================================================================

struct GeoOrigin {
    double lat = 35.0;        // deg
    double lon = 139.0;       // deg
    double elevation = 0.0;   // m above mean sea level
    double bearing_deg = 90.0; // downwind direction, clockwise from north

    friend bool operator==(const GeoOrigin&, const GeoOrigin&) = default;
};

struct GpsFix {
    double lat = 0.0;
    double lon = 0.0;
    double alt = 0.0;
};

/// Local equirectangular projection of a downwind displacement.
inline GpsFix project_to_geo(double north_m, double east_m, double up_m, const GeoOrigin& o) {
    const double lat = o.lat + north_m / kMetersPerDegree;
    const double lon = o.lon + east_m / (kMetersPerDegree * std::cos(o.lat * kPi / 180.0));
    return {lat, lon, o.elevation + up_m};
}

struct GpsParams {
    double horizontal_sigma = 2.5; // m
    double vertical_sigma = 5.0;   // m
};

inline GpsFix gps_read(double x, double z, const GeoOrigin& origin, const GpsParams& p,
                       NoiseSource* noise = nullptr) {
    const double bearing = origin.bearing_deg * kPi / 180.0;
    double north = x * std::cos(bearing);
    double east = x * std::sin(bearing);
    double up = z;
    if (noise) {
        north += noise->gaussian(p.horizontal_sigma);
        east += noise->gaussian(p.horizontal_sigma);
        up += noise->gaussian(p.vertical_sigma);
    }
    return project_to_geo(north, east, up, origin);
}

// ============================================================================
// Sensor suite
// ============================================================================

struct SensorParams {
    AnemometerParams anemometer;
    GpsParams gps;
    GeoOrigin origin;
    double ground_pressure = kSeaLevelPressure;
    double pressure_sigma = 3.0; // Pa, roughly 0.25 m
    double accel_sigma = 0.05;   // m/s^2
    double gyro_sigma = 0.5;     // deg/s
};

/// Samples the whole flight-unit sensor suite at the controller period.
/// Body accelerations come from differencing successive velocities.
class SensorSuite {
public:
    SensorSuite(SensorParams params, std::uint64_t seed, bool noisy)
        : params_(std::move(params)), noise_(seed), noisy_(noisy) {}

    SensorReading sample(double t, const KiteState& s, double wind_speed) {
        NoiseSource* n = noisy_ ? &noise_ : nullptr;
        SensorReading r;
        r.t = t;

        // The unit hangs from the bridle, pitched with the tether.
        const double pitch_deg = std::atan2(s.z, std::max(s.x, 1e-9)) * 180.0 / kPi;
        const Vec2 apparent{wind_speed - s.vx, -s.vz};
        std::tie(r.wind_x, r.wind_y) = anemometer_read(apparent, pitch_deg, params_.anemometer, n);

        r.pressure = pressure_at_altitude(s.z, params_.ground_pressure) + (n ? n->gaussian(params_.pressure_sigma) : 0.0);
        r.baro_alt = baro_altitude(r.pressure, params_.ground_pressure);

        const auto fix = gps_read(s.x, s.z, params_.origin, params_.gps, n);
        r.lat = fix.lat;
        r.lon = fix.lon;
        r.gps_alt = fix.alt;

        double ax = 0.0, az = 0.0, pitch_rate = 0.0;
        if (have_prev_ && t > prev_t_) {
            const double dt = t - prev_t_;
            ax = (s.vx - prev_.vx) / dt;
            az = (s.vz - prev_.vz) / dt;
            pitch_rate = (pitch_deg - prev_pitch_) / dt;
        }
        const double g = kStandardGravity;
        r.accel = {ax + (n ? n->gaussian(params_.accel_sigma) : 0.0), n ? n->gaussian(params_.accel_sigma) : 0.0,
                   az + g + (n ? n->gaussian(params_.accel_sigma) : 0.0)};
        r.gyro = {n ? n->gaussian(params_.gyro_sigma) : 0.0, pitch_rate + (n ? n->gaussian(params_.gyro_sigma) : 0.0),
                  n ? n->gaussian(params_.gyro_sigma) : 0.0};

        prev_ = s;
        prev_t_ = t;
        prev_pitch_ = pitch_deg;
        have_prev_ = true;
        return r;
    }

    const SensorParams& params() const { return params_; }

private:
    SensorParams params_;
    NoiseSource noise_;
    bool noisy_;
    KiteState prev_;
    double prev_t_ = 0.0;
    double prev_pitch_ = 0.0;
    bool have_prev_ = false;
};

} // namespace kitebot
