// Fixed-step simulation of the kite and flight unit as a point mass in the
// vertical plane, held by a winch-controlled tether anchored at the origin.
//
// Frame: x is the horizontal downwind distance from the winch, z is altitude.
#pragma once

#include <algorithm>
#include <cmath>
#include <utility>

#include "kitebot/core.hpp"

namespace kitebot {

struct Vec2 {
    double x = 0.0;
    double z = 0.0;

    friend Vec2 operator+(Vec2 a, Vec2 b) { return {a.x + b.x, a.z + b.z}; }
    friend Vec2 operator-(Vec2 a, Vec2 b) { return {a.x - b.x, a.z - b.z}; }
    friend Vec2 operator*(double s, Vec2 a) { return {s * a.x, s * a.z}; }
    friend bool operator==(const Vec2&, const Vec2&) = default;

    double norm() const { return std::hypot(x, z); }
    double dot(Vec2 o) const { return x * o.x + z * o.z; }
};

struct KiteState {
    double x = 0.0;  // m, downwind
    double z = 0.0;  // m, altitude
    double vx = 0.0; // m/s
    double vz = 0.0; // m/s
    double tension = 0.0; // N
    bool airborne = false;

    Vec2 position() const { return {x, z}; }
    Vec2 velocity() const { return {vx, vz}; }

    friend bool operator==(const KiteState&, const KiteState&) = default;
};

struct WinchState {
    double duty = 0.0;       // percent, last command applied
    double line_out = 0.0;   // m
    double line_speed = 0.0; // m/s, positive while winding in
    double encoder_m = 0.0;  // m, cumulative spool travel

    friend bool operator==(const WinchState&, const WinchState&) = default;
};

/// Everything the integrator needs besides the state.
struct PlantParams {
    PhysicalConstants constants;
    WinchParams winch;
    TetherParams tether;
    bool line_locked = false;
    double ground_friction = 0.3;

    static PlantParams from(const Config& cfg) {
        return {cfg.physics, cfg.winch, cfg.tether, cfg.mission.line_locked, 0.3};
    }
};

/// Altitude below which the kite counts as resting on the ground.
inline constexpr double kGroundContact = 1e-3; // m

// ============================================================================
// Aerodynamics
// ============================================================================

struct ApparentWind {
    double magnitude = 0.0; // m/s
    Vec2 direction;         // unit vector the air moves along; zero if calm
};

/// Air velocity relative to the kite: (wind - vx, -vz).
inline ApparentWind apparent_wind(const KiteState& s, double wind_speed) {
    const Vec2 rel{wind_speed - s.vx, -s.vz};
    const double mag = rel.norm();
    if (mag == 0.0) return {0.0, {}};
    return {mag, (1.0 / mag) * rel};
}

struct AeroForces {
    Vec2 lift;
    Vec2 drag;
};

/// Lift and drag for a fixed-coefficient wing. Drag acts along the apparent
/// wind; lift is perpendicular to it, on whichever side points up.
inline AeroForces aero_forces(const ApparentWind& a, const PhysicalConstants& c) {
    if (a.magnitude == 0.0) return {};
    const double q = 0.5 * c.air_density * a.magnitude * a.magnitude * c.wing_area;
    Vec2 lift_dir{-a.direction.z, a.direction.x};
    if (lift_dir.z < 0.0) lift_dir = -1.0 * lift_dir;
    return {q * c.lift_coeff * lift_dir, q * c.drag_coeff * a.direction};
}

/// Fraction of the free-stream dynamic pressure the bridled sail sees. The
/// sail faces along the tether, so only the apparent-wind component along the
/// outward line direction fills it: exposure = max(0, a . r)^2. Flow that
/// crosses the sail edge-on (fast tangential motion, kite at the zenith) lifts
/// nothing.
inline double sail_exposure(const ApparentWind& a, Vec2 position) {
    const double r = position.norm();
    if (r == 0.0 || a.magnitude == 0.0) return 1.0;
    const double along = std::max(0.0, a.direction.dot((1.0 / r) * position));
    return along * along;
}

/// Lift coefficient at which steady lift carries kite plus flight unit at the
/// given wind speed.
inline double calibrate_lift_coeff(const PhysicalConstants& c, double target_sustain_wind = 2.5) {
    if (!(target_sustain_wind > 0.0)) throw std::invalid_argument("calibrate_lift_coeff: target must be positive");
    return sustain_lift_coeff(c.kite_mass, c.unit_mass, c.wing_area, c.air_density, c.gravity, target_sustain_wind);
}

/// Kite, flight unit and paid-out line.
inline double system_mass(const PhysicalConstants& c, double line_out) {
    return c.kite_mass + c.unit_mass + c.line_mass_per_m * line_out;
}

// ============================================================================
// Winch
// ============================================================================

/// Advances the line-winding machine by dt under the given duty and line
/// tension. The motor pulls with duty/100 of max_pull; the clutch holds up to
/// that pull plus brake_force before slipping.
///
/// load_stiffness is how many newtons the tension gains per m/s of winding
/// speed within this step, with tension then read as the load at zero
/// winding speed. When positive the speed is solved implicitly, which keeps a
/// stiff tether from chattering the clutch.
inline WinchState winch_step(const WinchParams& p, WinchState w, double commanded_duty, double tension, double dt,
                             double load_stiffness = 0.0) {
    const double duty = std::clamp(commanded_duty, 0.0, 100.0);
    const double pull = duty / 100.0 * p.max_pull;
    const double holding = pull + p.brake_force;

    double speed = 0.0;
    if (pull >= tension) {
        const double v = p.motor_gain * (pull - tension) / (1.0 + p.motor_gain * load_stiffness);
        speed = std::min(p.max_take_up_speed, v);
    } else if (tension > holding) {
        const double v = p.clutch_gain * (tension - holding) / (1.0 + p.clutch_gain * load_stiffness);
        speed = -std::min(p.max_payout_speed, v);
    }

    const double before = w.line_out;
    double after = before - speed * dt;
    after = std::clamp(after, p.min_line, p.line_capacity);
    if (after != before - speed * dt) speed = (before - after) / dt;

    w.duty = duty;
    w.line_out = after;
    w.line_speed = speed;
    w.encoder_m += std::abs(after - before);
    return w;
}

// ============================================================================
// Integrator
// ============================================================================

namespace detail {

/// Spring-damper tension; zero while the line is slack.
inline double tether_tension(const PlantParams& p, const KiteState& s, const WinchState& w, double mass) {
    const Vec2 pos = s.position();
    const double r = pos.norm();
    const double stretch = r - w.line_out;
    if (stretch <= 0.0 || r == 0.0) return 0.0;
    const double k = p.tether.axial_stiffness / w.line_out;
    const double c = 2.0 * p.tether.damping_ratio * std::sqrt(k * mass);
    const double radial_speed = pos.dot(s.velocity()) / r;
    const double line_rate = -w.line_speed;
    return std::max(0.0, k * stretch + c * (radial_speed - line_rate));
}

inline int substeps_for(const PlantParams& p, const WinchState& w, double mass, double dt) {
    const double omega = std::sqrt(p.tether.axial_stiffness / std::max(w.line_out, 1e-3) / mass);
    return std::max(1, static_cast<int>(std::ceil(omega * dt / 0.25)));
}

inline void substep(const PlantParams& p, KiteState& s, WinchState& w, double wind_speed, double h) {
    const auto& c = p.constants;
    const double mass = system_mass(c, w.line_out);
    const double tension = tether_tension(p, s, w, mass);

    if (p.line_locked) {
        w.line_speed = 0.0;
    } else {
        if (tension > 0.0) {
            const double k = p.tether.axial_stiffness / w.line_out;
            const double damping = 2.0 * p.tether.damping_ratio * std::sqrt(k * mass);
            const Vec2 pos = s.position();
            const double radial_speed = pos.dot(s.velocity()) / pos.norm();
            const double at_rest = tension + k * h * radial_speed - damping * w.line_speed;
            w = winch_step(p.winch, w, w.duty, at_rest, h, k * h + damping);
        } else {
            w = winch_step(p.winch, w, w.duty, tension, h);
        }
    }

    const auto apparent = apparent_wind(s, wind_speed);
    const Vec2 pos = s.position();
    const double r = pos.norm();
    const auto aero = aero_forces(apparent, c);
    const double exposure = sail_exposure(apparent, pos);
    Vec2 force = exposure * aero.lift + aero.drag + Vec2{0.0, -mass * c.gravity};
    if (tension > 0.0 && r > 0.0) force = force - (tension / r) * pos;

    const bool on_ground = s.z <= kGroundContact && s.vz <= 0.0;
    if (on_ground && force.z < 0.0) {
        const double normal = -force.z;
        force.z = 0.0;
        const double friction = p.ground_friction * normal;
        if (s.vx != 0.0) {
            const double decel = std::copysign(std::min(friction, std::abs(s.vx) * mass / h), s.vx);
            force.x -= decel;
        } else if (std::abs(force.x) <= friction) {
            force.x = 0.0;
        } else {
            force.x -= std::copysign(friction, force.x);
        }
    }

    s.vx += force.x / mass * h;
    s.vz += force.z / mass * h;
    s.x += s.vx * h;
    s.z += s.vz * h;
    if (s.z < 0.0) {
        s.z = 0.0;
        s.vz = 0.0;
    }
    s.tension = tension;
}

} // namespace detail

/// Advances kite and winch by one physics step. The winch follows the duty
/// stored in winch.duty. Internally subdivides the step when the tether is
/// stiff enough to destabilize explicit integration.
inline std::pair<KiteState, WinchState> step(const PlantParams& p, KiteState s, WinchState w, double wind_speed,
                                             double dt) {
    const int n = detail::substeps_for(p, w, system_mass(p.constants, w.line_out), dt);
    const double h = dt / n;
    const double line_before = w.line_out;
    for (int i = 0; i < n; ++i) detail::substep(p, s, w, wind_speed, h);
    if (!p.line_locked) w.line_speed = (line_before - w.line_out) / dt; // mean over the step
    s.tension = detail::tether_tension(p, s, w, system_mass(p.constants, w.line_out));
    s.airborne = s.z > kGroundContact;
    return {s, w};
}

/// Kinetic plus potential plus tether strain energy.
inline double mechanical_energy(const PlantParams& p, const KiteState& s, const WinchState& w) {
    const double mass = system_mass(p.constants, w.line_out);
    const double ke = 0.5 * mass * (s.vx * s.vx + s.vz * s.vz);
    const double pe = mass * p.constants.gravity * s.z;
    const double stretch = std::max(0.0, s.position().norm() - w.line_out);
    const double se = 0.5 * p.tether.axial_stiffness / w.line_out * stretch * stretch;
    return ke + pe + se;
}

/// Kite at rest on a taut line of the given length and elevation.
inline KiteState kite_on_line(double line_out, double elevation_deg) {
    const double e = elevation_deg * kPi / 180.0;
    KiteState s;
    s.x = line_out * std::cos(e);
    s.z = line_out * std::sin(e);
    s.airborne = s.z > kGroundContact;
    return s;
}

} // namespace kitebot
