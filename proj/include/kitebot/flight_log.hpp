// Flight log records, CSV persistence, KML export and wind/altitude lag
// analysis.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "kitebot/core.hpp"
#include "kitebot/sensors.hpp"

namespace kitebot {

struct FlightLogRecord {
    double t = 0.0;        // s
    double duty = 0.0;     // percent
    double wind = 0.0;     // m/s, measured combined speed
    double line_out = 0.0; // m
    double altitude = 0.0; // m
    double tension = 0.0;  // N
    std::string mode;
    std::uint32_t seq = 0; // sequence number of the telemetry frame sent this tick

    friend bool operator==(const FlightLogRecord&, const FlightLogRecord&) = default;
};

using FlightLog = std::vector<FlightLogRecord>;

inline constexpr std::string_view kLogHeader = "t_s,duty_pct,wind_mps,line_m,alt_m,tension_N,mode,seq";

/// Problems found while reducing a log (too short, no signal).
class AnalysisError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// ============================================================================
// CSV
// ============================================================================

inline std::string format_double(double x) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", x);
    return buf;
}

inline std::string format_log(const FlightLog& log) {
    std::string out(kLogHeader);
    out += '\n';
    for (const auto& r : log) {
        out += format_double(r.t) + ',' + format_double(r.duty) + ',' + format_double(r.wind) + ',' +
               format_double(r.line_out) + ',' + format_double(r.altitude) + ',' + format_double(r.tension) + ',' +
               r.mode + ',' + std::to_string(r.seq) + '\n';
    }
    return out;
}

namespace detail {

inline std::vector<std::string_view> split_csv(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    for (;;) {
        const auto comma = line.find(',', start);
        if (comma == std::string_view::npos) {
            out.push_back(line.substr(start));
            return out;
        }
        out.push_back(line.substr(start, comma - start));
        start = comma + 1;
    }
}

template <typename T>
bool parse_number(std::string_view s, T& out) {
    if (s.empty()) return false;
    const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size();
}

} // namespace detail

/// Parses CSV log text. Throws ParseError naming the first bad line.
inline FlightLog parse_log(std::string_view text, const std::string& origin = "<log>") {
    FlightLog log;
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        auto nl = text.find('\n', pos);
        if (nl == std::string_view::npos) nl = text.size();
        std::string_view line = text.substr(pos, nl - pos);
        pos = nl + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        auto fail = [&](const std::string& why) {
            return ParseError(origin + ":" + std::to_string(line_no) + ": " + why);
        };
        if (line_no == 1) {
            if (line != kLogHeader) throw fail("unexpected header");
            continue;
        }
        if (line.empty()) continue;
        const auto f = detail::split_csv(line);
        if (f.size() != 8) throw fail("expected 8 fields, got " + std::to_string(f.size()));
        FlightLogRecord r;
        double* numeric[] = {&r.t, &r.duty, &r.wind, &r.line_out, &r.altitude, &r.tension};
        for (std::size_t i = 0; i < 6; ++i)
            if (!detail::parse_number(f[i], *numeric[i])) throw fail("field " + std::to_string(i + 1) + " is not a number");
        if (f[6].empty()) throw fail("empty mode");
        r.mode = std::string(f[6]);
        if (!detail::parse_number(f[7], r.seq)) throw fail("seq is not an unsigned integer");
        if (!log.empty() && !(r.t > log.back().t)) throw fail("time not increasing");
        log.push_back(std::move(r));
    }
    if (line_no == 0) throw ParseError(origin + ": empty file, header missing");
    return log;
}

inline void write_log(const std::string& path, const FlightLog& log) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write " + path);
    out << format_log(log);
    if (!out) throw IoError("write failed: " + path);
}

inline FlightLog read_log(const std::string& path) { return parse_log(read_text_file(path), path); }

// ============================================================================
// KML
// ============================================================================

/// One LineString placemark through the given fixes, altitude absolute.
/// Consecutive identical fixes collapse to one vertex.
inline std::string kml_from_track(const std::vector<GpsFix>& track, const std::string& name = "kitebot flight") {
    std::ostringstream os;
    os << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
       << "<kml xmlns=\"http://www.opengis.net/kml/2.2\">\n"
       << "  <Document>\n"
       << "    <Placemark>\n"
       << "      <name>" << name << "</name>\n"
       << "      <LineString>\n"
       << "        <altitudeMode>absolute</altitudeMode>\n"
       << "        <coordinates>\n";
    const GpsFix* prev = nullptr;
    for (const auto& p : track) {
        if (prev && prev->lat == p.lat && prev->lon == p.lon && prev->alt == p.alt) continue;
        os << "          " << format_double(p.lon) << ',' << format_double(p.lat) << ',' << format_double(p.alt)
           << '\n';
        prev = &p;
    }
    os << "        </coordinates>\n"
       << "      </LineString>\n"
       << "    </Placemark>\n"
       << "  </Document>\n"
       << "</kml>\n";
    return os.str();
}

/// Reconstructs the kite's track from line length and altitude, assuming a
/// straight line lying in the downwind plane.
inline std::vector<GpsFix> track_from_log(const FlightLog& log, const GeoOrigin& origin) {
    std::vector<GpsFix> track;
    track.reserve(log.size());
    const double bearing = origin.bearing_deg * kPi / 180.0;
    for (const auto& r : log) {
        const double horizontal = std::sqrt(std::max(0.0, r.line_out * r.line_out - r.altitude * r.altitude));
        track.push_back(
            project_to_geo(horizontal * std::cos(bearing), horizontal * std::sin(bearing), r.altitude, origin));
    }
    return track;
}

inline std::string export_kml(const FlightLog& log, const GeoOrigin& origin) {
    if (log.empty()) throw AnalysisError("export_kml: empty log");
    return kml_from_track(track_from_log(log, origin));
}

// ============================================================================
// Lag analysis
// ============================================================================

struct LagResult {
    double lag_s = 0.0;
    double correlation = 0.0;
};

namespace detail {

/// Normalized cross-correlation of a with b delayed by lag samples. Both
/// series are centred on their full-length means and the sum is normalized
/// by the zero-lag energies, so a perfect match at lag 0 scores 1.
inline double cross_correlation(const std::vector<double>& a, const std::vector<double>& b, std::size_t lag) {
    const auto n = static_cast<double>(a.size());
    double ma = 0.0, mb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        ma += a[i];
        mb += b[i];
    }
    ma /= n;
    mb /= n;
    double saa = 0.0, sbb = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        saa += (a[i] - ma) * (a[i] - ma);
        sbb += (b[i] - mb) * (b[i] - mb);
    }
    double sab = 0.0;
    for (std::size_t i = 0; i + lag < a.size(); ++i) sab += (a[i] - ma) * (b[i + lag] - mb);
    return sab / std::sqrt(saa * sbb);
}

} // namespace detail

inline constexpr std::size_t kMinLagSamples = 60;

/// Delay by which altitude follows wind: the lag in [0, max_lag_s] that
/// maximizes their normalized cross-correlation. Ties go to the shorter lag.
inline LagResult analyze_lag(const FlightLog& log, double max_lag_s = 30.0) {
    if (log.size() < kMinLagSamples)
        throw AnalysisError("log too short: " + std::to_string(log.size()) + " samples, need " +
                            std::to_string(kMinLagSamples));
    std::vector<double> wind, alt;
    wind.reserve(log.size());
    alt.reserve(log.size());
    for (const auto& r : log) {
        wind.push_back(r.wind);
        alt.push_back(r.altitude);
    }
    const double period = log[1].t - log[0].t;
    const auto constant = [](const std::vector<double>& v) {
        return std::all_of(v.begin(), v.end(), [&](double x) { return x == v.front(); });
    };
    if (constant(wind) || constant(alt)) throw AnalysisError("no transient: wind or altitude has zero variance");

    const auto by_time = static_cast<std::size_t>(std::floor(max_lag_s / period + 1e-9));
    const std::size_t max_lag = std::min(by_time, log.size() - 1);
    LagResult best{0.0, detail::cross_correlation(wind, alt, 0)};
    for (std::size_t k = 1; k <= max_lag; ++k) {
        const double c = detail::cross_correlation(wind, alt, k);
        if (c > best.correlation) best = {static_cast<double>(k) * period, c};
    }
    return best;
}

} // namespace kitebot
