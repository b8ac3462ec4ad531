#include <gtest/gtest.h>

#include <thread>

#include "kitebot/scenarios.hpp"
#include "kitebot/server.hpp"
#include "support.hpp"

using namespace kitebot;
using namespace std::chrono_literals;

namespace {

/// A station on an ephemeral port with a client pointed at it.
class LiveStation : public ::testing::Test {
protected:
    void start(Scenario s = flight_6min_scenario(), double speed = 20.0) {
        station_ = std::make_unique<GroundStation>(Config{}, std::move(s), derive_seeds(1), StationOptions{speed});
        server_ = std::make_unique<StationServer>(*station_);
        port_ = server_->bind({"127.0.0.1", 0});
        server_->start_background();
        station_->start();
        client_ = std::make_unique<httplib::Client>("127.0.0.1", port_);
        client_->set_read_timeout(5, 0);
    }

    void TearDown() override {
        if (server_) server_->stop();
        if (station_) station_->stop();
    }

    json get(const std::string& path) {
        auto res = client_->Get(path);
        EXPECT_TRUE(res);
        if (!res) return {};
        EXPECT_EQ(res->status, 200) << path;
        return json::parse(res->body);
    }

    std::pair<int, json> post(const std::string& path, const std::string& body) {
        auto res = client_->Post(path, body, "application/json");
        EXPECT_TRUE(res);
        if (!res) return {0, {}};
        return {res->status, json::parse(res->body)};
    }

    /// Polls /api/state until pred holds or two seconds pass.
    template <typename Pred>
    json wait_state(Pred pred) {
        json s;
        for (int i = 0; i < 200; ++i) {
            s = get("/api/state");
            if (pred(s)) break;
            std::this_thread::sleep_for(10ms);
        }
        return s;
    }

    std::unique_ptr<GroundStation> station_;
    std::unique_ptr<StationServer> server_;
    std::unique_ptr<httplib::Client> client_;
    int port_ = 0;
};

} // namespace

TEST(ParseBind, Forms) {
    auto b = parse_bind("0.0.0.0:9000");
    EXPECT_EQ(b.host, "0.0.0.0");
    EXPECT_EQ(b.port, 9000);
    b = parse_bind(":0");
    EXPECT_EQ(b.host, "127.0.0.1");
    EXPECT_EQ(b.port, 0);
    EXPECT_EQ(parse_bind("8081").port, 8081);
    EXPECT_THROW(parse_bind("localhost:http"), ValidationError);
    EXPECT_THROW(parse_bind("localhost:70000"), ValidationError);
}

TEST_F(LiveStation, StateAndRuns) {
    start();
    const auto s = wait_state([](const json& j) { return j["tick"].get<int>() > 0; });
    for (const char* k : {"t_s", "tick", "kite", "winch", "controller", "wind", "link", "run_id", "scenario", "finished"})
        EXPECT_TRUE(s.contains(k)) << k;
    EXPECT_EQ(s["scenario"], "flight-6min");
    EXPECT_EQ(s["finished"], false);

    const auto runs = get("/api/runs");
    ASSERT_EQ(runs["runs"].size(), 1u);
    EXPECT_EQ(runs["runs"][0]["run_id"], s["run_id"]);
    EXPECT_EQ(runs["runs"][0]["status"], "running");
    EXPECT_EQ(runs["runs"][0]["duration_s"], 360.0);
}

TEST_F(LiveStation, ConfigReadsCurrentTable) {
    start();
    const auto c = get("/api/config");
    EXPECT_EQ(c["n_stages"], 7);
    EXPECT_EQ(c["deltas_pct"], json({8.0, 5.0, 2.0, 0.0, -2.0, -5.0, -8.0}));
    EXPECT_TRUE(c["thresholds_mps"].back().is_null());
}

TEST_F(LiveStation, StreamDeliversSnapshots) {
    start();
    std::string buffer;
    int events = 0;
    std::vector<json> snapshots;
    auto res = client_->Get("/api/stream", [&](const char* data, std::size_t n) {
        buffer.append(data, n);
        std::size_t end;
        while ((end = buffer.find("\n\n")) != std::string::npos) {
            const auto event = buffer.substr(0, end);
            buffer.erase(0, end + 2);
            if (event.rfind("data: ", 0) == 0) {
                snapshots.push_back(json::parse(event.substr(6)));
                ++events;
            }
        }
        return events < 3;
    });
    ASSERT_GE(snapshots.size(), 3u);
    for (const auto& s : snapshots) {
        // The four quantities the operator charts.
        EXPECT_TRUE(s["wind"].contains("measured_mps"));
        EXPECT_TRUE(s["kite"].contains("z_m"));
        EXPECT_TRUE(s["winch"].contains("line_out_m"));
        EXPECT_TRUE(s["winch"].contains("duty_pct"));
    }
    EXPECT_LE(snapshots[0]["tick"].get<int>(), snapshots[2]["tick"].get<int>());
}

TEST_F(LiveStation, ManualDutyAppearsInNextSnapshot) {
    start();
    const auto [status, body] = post("/api/command", R"({"mode": "MANUAL", "duty": 40})");
    ASSERT_EQ(status, 200) << body.dump();
    EXPECT_EQ(body["accepted"], true);
    EXPECT_EQ(body["mode"], "MANUAL");
    const int at = body["tick"].get<int>();
    const auto s = wait_state([&](const json& j) { return j["tick"].get<int>() > at; });
    EXPECT_EQ(s["controller"]["mode"], "MANUAL");
    EXPECT_EQ(s["controller"]["duty_pct"], 40.0);
    EXPECT_EQ(s["winch"]["duty_pct"], 40.0);
}

TEST_F(LiveStation, OutOfRangeDutyIsRejectedAndChangesNothing) {
    start();
    post("/api/command", R"({"mode": "MANUAL", "duty": 25})");
    const auto [status, body] = post("/api/command", R"({"mode": "MANUAL", "duty": 140})");
    EXPECT_EQ(status, 400);
    EXPECT_TRUE(body.contains("error"));
    const auto s = wait_state([](const json&) { return true; });
    EXPECT_EQ(s["controller"]["mode"], "MANUAL");
    EXPECT_EQ(wait_state([](const json& j) { return j["controller"]["duty_pct"] == 25.0; })["controller"]["duty_pct"],
              25.0);
}

TEST_F(LiveStation, MalformedCommandsAre400) {
    start();
    EXPECT_EQ(post("/api/command", "{not json").first, 400);
    EXPECT_EQ(post("/api/command", "[1]").first, 400);
    EXPECT_EQ(post("/api/command", R"({"duty": 10})").first, 400);
    EXPECT_EQ(post("/api/command", R"({"mode": "HOVER"})").first, 400);
    EXPECT_EQ(post("/api/command", R"({"mode": "MANUAL", "duty": "high"})").first, 400);
    EXPECT_EQ(post("/api/command", R"({"mode": "MANUAL", "speed": 3})").first, 400);
}

TEST_F(LiveStation, SkippingReleaseIs409) {
    Scenario s = flight_6min_scenario();
    start(s, 1.0);
    const auto [status, body] = post("/api/command", R"({"mode": "WIND_HOLD"})");
    EXPECT_EQ(status, 409) << body.dump();
    EXPECT_EQ(get("/api/state")["controller"]["mode"], "TAKEOFF");
}

TEST_F(LiveStation, TableHotSwap) {
    start();
    auto [status, body] = post("/api/config", R"({"deltas_pct": [4, 2, 1, 0, -1, -2, -4]})");
    ASSERT_EQ(status, 200) << body.dump();
    EXPECT_EQ(body["windhold"]["deltas_pct"], json({4.0, 2.0, 1.0, 0.0, -1.0, -2.0, -4.0}));
    EXPECT_EQ(get("/api/config")["deltas_pct"], json({4.0, 2.0, 1.0, 0.0, -1.0, -2.0, -4.0}));

    std::tie(status, body) = post("/api/config", R"({"deltas_pct": [1, 2, 0, 0, 0, 0, 0]})");
    EXPECT_EQ(status, 400);
    ASSERT_TRUE(body.contains("violations"));
    EXPECT_EQ(body["violations"][0], "deltas not non-increasing");
    EXPECT_EQ(get("/api/config")["deltas_pct"], json({4.0, 2.0, 1.0, 0.0, -1.0, -2.0, -4.0}));

    EXPECT_EQ(post("/api/config", R"({"bogus": 1})").first, 400);
    EXPECT_EQ(post("/api/config", "nope").first, 400);
}

TEST_F(LiveStation, FinishedRunRefusesCommands) {
    start(testkit::fixed_line_scenario(4.0, 40.0, 2.0), 0.0);
    const auto s = wait_state([](const json& j) { return j["finished"] == true; });
    ASSERT_EQ(s["finished"], true);
    EXPECT_EQ(s["tick"], 10);
    EXPECT_EQ(get("/api/runs")["runs"][0]["status"], "finished");
    EXPECT_EQ(post("/api/command", R"({"mode": "MANUAL", "duty": 10})").first, 409);
}

TEST(StationServer, BusyPortIsIoError) {
    GroundStation station(Config{}, flight_6min_scenario(), derive_seeds(1));
    StationServer a(station);
    const int port = a.bind({"127.0.0.1", 0});
    StationServer b(station);
    EXPECT_THROW(b.bind({"127.0.0.1", port}), IoError);
}

TEST(GroundStation, CommandsWithoutLoopApplyImmediately) {
    GroundStation station(Config{}, flight_6min_scenario(), derive_seeds(1));
    const auto r = station.command({ControllerMode::Manual, 30.0});
    EXPECT_EQ(r.status, 200);
    EXPECT_EQ(station.view()->snapshot.controller.mode, ControllerMode::Manual);
}
