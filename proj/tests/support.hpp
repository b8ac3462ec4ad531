// Helpers shared by the test binaries.
#pragma once

#include <atomic>
#include <filesystem>
#include <string>
#include <unistd.h>

#include "kitebot/scenarios.hpp"

namespace kitebot::testkit {

/// A fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag = "kitebot") {
        static std::atomic<int> counter{0};
        path_ = std::filesystem::temp_directory_path() /
                (tag + "-" + std::to_string(::getpid()) + "-" + std::to_string(counter++));
        std::filesystem::remove_all(path_);
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::string file(const std::string& name) const { return (path_ / name).string(); }

private:
    std::filesystem::path path_;
};

/// Kite on a locked line in uniform wind with the controller idle.
inline Scenario fixed_line_scenario(double wind, double elevation_deg, double duration, double line = 100.0) {
    Scenario s;
    s.name = "fixed-line";
    s.wind.alpha = 0.0;
    s.wind.v_ref = wind;
    s.mission.start_mode = ControllerMode::Idle;
    s.mission.line_locked = true;
    s.mission.initial_line = line;
    s.mission.initial_elevation_deg = elevation_deg;
    s.duration = duration;
    return s;
}

inline std::string data_file(const std::string& name) { return std::string(KITEBOT_TEST_DATA) + "/" + name; }

} // namespace kitebot::testkit
