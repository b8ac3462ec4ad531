// Framed wire protocol between the flight unit and the ground unit.
//
//   A5 5A | ver u8 | type u8 | seq u16 | ts_ms u32 | len u8 | payload | crc u16
//
// Multi-byte fields are little-endian. The CRC is CRC-16/CCITT-FALSE over
// ver through the end of the payload.
#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <limits>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include "kitebot/core.hpp"
#include "kitebot/sensors.hpp"

namespace kitebot {

inline constexpr std::uint8_t kSync0 = 0xA5;
inline constexpr std::uint8_t kSync1 = 0x5A;
inline constexpr std::uint8_t kProtocolVersion = 1;
inline constexpr std::size_t kHeaderSize = 11; // sync through len
inline constexpr std::size_t kFrameOverhead = kHeaderSize + 2;
inline constexpr std::size_t kTelemetryPayloadSize = 36;
inline constexpr std::size_t kCommandPayloadSize = 3;

enum class FrameType : std::uint8_t { Telemetry = 1, Command = 2, Ack = 3 };

using Bytes = std::vector<std::uint8_t>;

struct TelemetryFrame {
    std::uint8_t version = kProtocolVersion;
    FrameType type = FrameType::Ack;
    std::uint16_t seq = 0;
    std::uint32_t timestamp_ms = 0;
    Bytes payload;

    friend bool operator==(const TelemetryFrame&, const TelemetryFrame&) = default;
};

// ============================================================================
// CRC
// ============================================================================

namespace detail {

constexpr std::array<std::uint16_t, 256> make_crc_table() {
    std::array<std::uint16_t, 256> table{};
    for (unsigned i = 0; i < 256; ++i) {
        auto c = static_cast<std::uint16_t>(i << 8);
        for (int b = 0; b < 8; ++b) c = static_cast<std::uint16_t>((c & 0x8000u) ? (c << 1) ^ 0x1021u : c << 1);
        table[i] = c;
    }
    return table;
}

inline constexpr auto kCrcTable = make_crc_table();

} // namespace detail

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no final xor.
inline std::uint16_t crc16_ccitt(std::span<const std::uint8_t> data, std::uint16_t crc = 0xFFFF) {
    for (std::uint8_t byte : data)
        crc = static_cast<std::uint16_t>((crc << 8) ^ detail::kCrcTable[((crc >> 8) ^ byte) & 0xFFu]);
    return crc;
}

// ============================================================================
// Little-endian field access
// ============================================================================

namespace detail {

template <typename T>
void put_le(Bytes& out, T value) {
    using U = std::make_unsigned_t<T>;
    auto u = static_cast<U>(value);
    for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((u >> (8 * i)) & 0xFFu));
}

template <typename T>
T get_le(std::span<const std::uint8_t> in, std::size_t offset) {
    using U = std::make_unsigned_t<T>;
    U u = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) u = static_cast<U>(u | (static_cast<U>(in[offset + i]) << (8 * i)));
    return static_cast<T>(u);
}

/// Rounds to the nearest integer representable in T, saturating.
template <typename T>
T quantize(double value, double scale) {
    const double x = std::round(value * scale);
    constexpr double lo = static_cast<double>(std::numeric_limits<T>::min());
    constexpr double hi = static_cast<double>(std::numeric_limits<T>::max());
    if (!(x >= lo)) return std::numeric_limits<T>::min(); // also catches NaN
    if (x >= hi) return std::numeric_limits<T>::max();
    return static_cast<T>(x);
}

} // namespace detail

// ============================================================================
// Frame codec
// ============================================================================

inline Bytes encode_frame(const TelemetryFrame& f) {
    if (f.payload.size() > 255) throw std::length_error("encode_frame: payload exceeds 255 bytes");
    Bytes out;
    out.reserve(kFrameOverhead + f.payload.size());
    out.push_back(kSync0);
    out.push_back(kSync1);
    out.push_back(f.version);
    out.push_back(static_cast<std::uint8_t>(f.type));
    detail::put_le<std::uint16_t>(out, f.seq);
    detail::put_le<std::uint32_t>(out, f.timestamp_ms);
    out.push_back(static_cast<std::uint8_t>(f.payload.size()));
    out.insert(out.end(), f.payload.begin(), f.payload.end());
    const auto crc = crc16_ccitt(std::span<const std::uint8_t>(out).subspan(2));
    detail::put_le<std::uint16_t>(out, crc);
    return out;
}

inline bool known_frame_type(std::uint8_t t) { return t >= 1 && t <= 3; }

/// Decodes exactly one complete frame. Returns nothing if the bytes are not
/// a well-formed frame with a valid CRC.
inline std::optional<TelemetryFrame> decode_frame(std::span<const std::uint8_t> bytes) {
    if (bytes.size() < kFrameOverhead || bytes[0] != kSync0 || bytes[1] != kSync1) return std::nullopt;
    const std::size_t len = bytes[10];
    if (bytes.size() != kFrameOverhead + len) return std::nullopt;
    const auto body = bytes.subspan(2, kHeaderSize - 2 + len);
    if (crc16_ccitt(body) != detail::get_le<std::uint16_t>(bytes, kHeaderSize + len)) return std::nullopt;
    if (bytes[2] != kProtocolVersion || !known_frame_type(bytes[3])) return std::nullopt;
    TelemetryFrame f;
    f.version = bytes[2];
    f.type = static_cast<FrameType>(bytes[3]);
    f.seq = detail::get_le<std::uint16_t>(bytes, 4);
    f.timestamp_ms = detail::get_le<std::uint32_t>(bytes, 6);
    f.payload.assign(bytes.begin() + kHeaderSize, bytes.begin() + static_cast<std::ptrdiff_t>(kHeaderSize + len));
    return f;
}

// ============================================================================
// Typed payloads
// ============================================================================

inline Bytes encode_telemetry_payload(const SensorReading& r) {
    using detail::put_le;
    using detail::quantize;
    const double milli_g = 1000.0 / kStandardGravity;
    Bytes out;
    out.reserve(kTelemetryPayloadSize);
    put_le(out, quantize<std::uint16_t>(r.wind_x, 100.0));
    put_le(out, quantize<std::uint16_t>(r.wind_y, 100.0));
    put_le(out, quantize<std::uint32_t>(r.pressure, 1.0));
    put_le(out, quantize<std::int32_t>(r.baro_alt, 100.0));
    put_le(out, quantize<std::int32_t>(r.lat, 1e7));
    put_le(out, quantize<std::int32_t>(r.lon, 1e7));
    put_le(out, quantize<std::int32_t>(r.gps_alt, 100.0));
    for (double a : r.accel) put_le(out, quantize<std::int16_t>(a, milli_g));
    for (double g : r.gyro) put_le(out, quantize<std::int16_t>(g, 10.0));
    return out;
}

inline SensorReading decode_telemetry_payload(std::span<const std::uint8_t> p, std::uint32_t timestamp_ms) {
    using detail::get_le;
    if (p.size() != kTelemetryPayloadSize) throw ParseError("telemetry payload must be 36 bytes");
    SensorReading r;
    r.t = timestamp_ms / 1000.0;
    r.wind_x = get_le<std::uint16_t>(p, 0) / 100.0;
    r.wind_y = get_le<std::uint16_t>(p, 2) / 100.0;
    r.pressure = static_cast<double>(get_le<std::uint32_t>(p, 4));
    r.baro_alt = get_le<std::int32_t>(p, 8) / 100.0;
    r.lat = get_le<std::int32_t>(p, 12) / 1e7;
    r.lon = get_le<std::int32_t>(p, 16) / 1e7;
    r.gps_alt = get_le<std::int32_t>(p, 20) / 100.0;
    for (std::size_t i = 0; i < 3; ++i) r.accel[i] = get_le<std::int16_t>(p, 24 + 2 * i) * kStandardGravity / 1000.0;
    for (std::size_t i = 0; i < 3; ++i) r.gyro[i] = get_le<std::int16_t>(p, 30 + 2 * i) / 10.0;
    return r;
}

/// The reading as the ground unit will see it after the wire.
inline SensorReading quantize_reading(const SensorReading& r) {
    const auto ts = static_cast<std::uint32_t>(std::llround(r.t * 1000.0));
    return decode_telemetry_payload(encode_telemetry_payload(r), ts);
}

struct CommandPayload {
    ControllerMode mode = ControllerMode::Idle;
    double duty = 0.0; // percent, resolution 0.01

    friend bool operator==(const CommandPayload&, const CommandPayload&) = default;
};

inline Bytes encode_command_payload(const CommandPayload& c) {
    Bytes out;
    out.push_back(static_cast<std::uint8_t>(c.mode));
    detail::put_le(out, detail::quantize<std::int16_t>(c.duty, 100.0));
    return out;
}

inline CommandPayload decode_command_payload(std::span<const std::uint8_t> p) {
    if (p.size() != kCommandPayloadSize) throw ParseError("command payload must be 3 bytes");
    if (p[0] > 4) throw ParseError("command payload: unknown mode " + std::to_string(p[0]));
    return {static_cast<ControllerMode>(p[0]), detail::get_le<std::int16_t>(p, 1) / 100.0};
}

inline TelemetryFrame make_telemetry_frame(std::uint16_t seq, std::uint32_t ts_ms, const SensorReading& r) {
    return {kProtocolVersion, FrameType::Telemetry, seq, ts_ms, encode_telemetry_payload(r)};
}

inline TelemetryFrame make_command_frame(std::uint16_t seq, std::uint32_t ts_ms, const CommandPayload& c) {
    return {kProtocolVersion, FrameType::Command, seq, ts_ms, encode_command_payload(c)};
}

inline TelemetryFrame make_ack_frame(std::uint16_t seq, std::uint32_t ts_ms) {
    return {kProtocolVersion, FrameType::Ack, seq, ts_ms, {}};
}

// ============================================================================
// Stream parser
// ============================================================================

struct ParserDiagnostics {
    std::uint64_t frames = 0;
    std::uint64_t dropped_bytes = 0; // bytes discarded while hunting for sync
    std::uint64_t bad_frames = 0;    // candidate frames rejected by header or CRC

    friend bool operator==(const ParserDiagnostics&, const ParserDiagnostics&) = default;
};

/// Incremental resynchronizing parser. Output depends only on the
/// concatenated input, never on how it was chunked.
class StreamParser {
public:
    std::vector<TelemetryFrame> feed(std::span<const std::uint8_t> chunk) {
        buf_.insert(buf_.end(), chunk.begin(), chunk.end());
        std::vector<TelemetryFrame> out;
        for (;;) {
            if (!hunt_sync()) break;
            if (buf_.size() < kHeaderSize) break;
            if (buf_[2] != kProtocolVersion || !known_frame_type(buf_[3])) {
                reject();
                continue;
            }
            const std::size_t total = kFrameOverhead + buf_[10];
            if (buf_.size() < total) break;
            Bytes candidate(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(total));
            if (auto f = decode_frame(candidate)) {
                buf_.erase(buf_.begin(), buf_.begin() + static_cast<std::ptrdiff_t>(total));
                ++diag_.frames;
                out.push_back(std::move(*f));
            } else {
                reject();
            }
        }
        return out;
    }

    std::vector<TelemetryFrame> feed(const Bytes& chunk) { return feed(std::span<const std::uint8_t>(chunk)); }

    const ParserDiagnostics& diagnostics() const noexcept { return diag_; }
    std::size_t buffered() const noexcept { return buf_.size(); }

private:
    /// Drops bytes until the buffer starts with a sync pair or could still
    /// start with one. Returns true if a full sync pair is at the front.
    bool hunt_sync() {
        while (!buf_.empty()) {
            if (buf_[0] == kSync0) {
                if (buf_.size() < 2) return false;
                if (buf_[1] == kSync1) return true;
            }
            buf_.pop_front();
            ++diag_.dropped_bytes;
        }
        return false;
    }

    /// Abandons the frame candidate at the front; scanning resumes after its
    /// first sync byte.
    void reject() {
        ++diag_.bad_frames;
        buf_.pop_front();
    }

    std::deque<std::uint8_t> buf_;
    ParserDiagnostics diag_;
};

/// One-shot convenience over a complete byte stream.
inline std::vector<TelemetryFrame> parse_stream(std::span<const std::uint8_t> bytes, ParserDiagnostics* diag = nullptr) {
    StreamParser p;
    auto frames = p.feed(bytes);
    if (diag) *diag = p.diagnostics();
    return frames;
}

// ============================================================================
// Lossy link
// ============================================================================

/// Radio link stand-in: each frame is independently lost with probability
/// loss_prob; survivors arrive after a fixed latency, in send order.
class LossyChannel {
public:
    LossyChannel(std::uint64_t seed, double loss_prob, double latency_ms)
        : state_(seed), loss_prob_(loss_prob), latency_us_(std::llround(latency_ms * 1000.0)) {
        if (!(loss_prob >= 0.0 && loss_prob <= 1.0)) throw std::invalid_argument("LossyChannel: loss_prob outside [0, 1]");
        if (!(latency_ms >= 0.0)) throw std::invalid_argument("LossyChannel: negative latency");
    }

    /// Queues bytes sent at send_us microseconds. Returns false if the frame
    /// was lost.
    bool send(Bytes bytes, std::int64_t send_us) {
        ++sent_;
        if (next_uniform() < loss_prob_) {
            ++lost_;
            return false;
        }
        queue_.push_back({send_us + latency_us_, std::move(bytes)});
        return true;
    }

    /// Everything due at or before now_us, in order.
    std::vector<Bytes> deliver(std::int64_t now_us) {
        std::vector<Bytes> out;
        while (!queue_.empty() && queue_.front().due_us <= now_us) {
            out.push_back(std::move(queue_.front().bytes));
            queue_.pop_front();
        }
        return out;
    }

    std::size_t in_flight() const noexcept { return queue_.size(); }
    std::uint64_t sent() const noexcept { return sent_; }
    std::uint64_t lost() const noexcept { return lost_; }

private:
    struct Pending {
        std::int64_t due_us;
        Bytes bytes;
    };

    double next_uniform() {
        state_ += 0x9E3779B97F4A7C15ull;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        z ^= z >> 31;
        return static_cast<double>(z >> 11) * 0x1.0p-53;
    }

    std::uint64_t state_;
    double loss_prob_;
    std::int64_t latency_us_;
    std::deque<Pending> queue_;
    std::uint64_t sent_ = 0;
    std::uint64_t lost_ = 0;
};

/// Hex dump, two lowercase digits per byte, space separated.
inline std::string to_hex(std::span<const std::uint8_t> bytes) {
    static constexpr char digits[] = "0123456789abcdef";
    std::string s;
    for (std::size_t i = 0; i < bytes.size(); ++i) {
        if (i) s += ' ';
        s += digits[bytes[i] >> 4];
        s += digits[bytes[i] & 0xF];
    }
    return s;
}

inline Bytes from_hex(std::string_view text) {
    Bytes out;
    int hi = -1;
    for (char c : text) {
        int v;
        if (c >= '0' && c <= '9') v = c - '0';
        else if (c >= 'a' && c <= 'f') v = c - 'a' + 10;
        else if (c >= 'A' && c <= 'F') v = c - 'A' + 10;
        else if (c == ' ' || c == '\t' || c == '\n' || c == '\r') continue;
        else throw ParseError(std::string("from_hex: invalid character '") + c + "'");
        if (hi < 0) hi = v;
        else {
            out.push_back(static_cast<std::uint8_t>(hi << 4 | v));
            hi = -1;
        }
    }
    if (hi >= 0) throw ParseError("from_hex: odd number of digits");
    return out;
}

} // namespace kitebot
