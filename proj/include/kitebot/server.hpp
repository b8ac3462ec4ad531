// Live ground-station service.
//
// A single loop thread owns the Simulation. HTTP handlers never touch it:
// they post requests to a queue that the loop drains between ticks, and
// they read immutable snapshots the loop publishes after every tick.
//
//   GET  /api/state    latest snapshot
//   GET  /api/runs     the hosted run
//   GET  /api/stream   server-sent events, one snapshot per tick
//   GET  /api/config   current wind-hold table
//   POST /api/command  {"mode": "MANUAL", "duty": 40}
//   POST /api/config   {"thresholds_mps": [...], "deltas_pct": [...]}
#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <future>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <utility>
#include <variant>

#include "httplib.h"
#include "kitebot/simulation.hpp"

namespace kitebot {

struct StationOptions {
    /// Simulated seconds per wall-clock second. Zero runs as fast as possible.
    double speed = 1.0;
};

/// What a handler gets back from the loop thread.
struct LoopReply {
    int status = 200;
    json body;
};

/// Published after every tick and after every accepted request.
struct StationView {
    Snapshot snapshot;
    ControllerConfig controller;
    std::string run_id;
    std::string scenario;
    double duration = 0.0;
    bool finished = false;
    std::uint64_t version = 0;
};

inline json state_json(const StationView& v) {
    json j = to_json(v.snapshot);
    j["run_id"] = v.run_id;
    j["scenario"] = v.scenario;
    j["duration_s"] = v.duration;
    j["finished"] = v.finished;
    return j;
}

class GroundStation {
public:
    GroundStation(Config cfg, Scenario scenario, Seeds seeds, StationOptions opt = {})
        : sim_(std::move(cfg), scenario, seeds), opt_(opt) {
        run_id_ = scenario.name + "-live-" + hex64(seeds.master).substr(10);
        publish();
    }

    GroundStation(const GroundStation&) = delete;
    GroundStation& operator=(const GroundStation&) = delete;

    ~GroundStation() { stop(); }

    void start() {
        if (loop_.joinable()) return;
        loop_ = std::thread([this] { run(); });
    }

    void stop() {
        {
            std::lock_guard lock(queue_mutex_);
            stopping_ = true;
        }
        queue_cv_.notify_all();
        view_cv_.notify_all();
        if (loop_.joinable()) loop_.join();
    }

    std::shared_ptr<const StationView> view() const {
        std::lock_guard lock(view_mutex_);
        return view_;
    }

    /// Blocks until a view newer than `after` is published, the timeout
    /// expires, or the station stops.
    std::shared_ptr<const StationView> wait_view(std::uint64_t after, std::chrono::milliseconds timeout) const {
        std::unique_lock lock(view_mutex_);
        view_cv_.wait_for(lock, timeout, [&] { return view_->version > after || stopping(); });
        return view_;
    }

    bool stopping() const {
        std::lock_guard lock(queue_mutex_);
        return stopping_;
    }

    /// Queues an operator command and waits for the loop to apply it.
    LoopReply command(const OperatorCommand& cmd) { return submit(cmd); }

    /// Queues a wind-hold table swap and waits for the loop to apply it.
    LoopReply set_table(const ControllerConfig& next) { return submit(next); }

private:
    using Payload = std::variant<OperatorCommand, ControllerConfig>;

    struct Request {
        Payload payload;
        std::promise<LoopReply> reply;
    };

    LoopReply submit(Payload p) {
        Request r{std::move(p), {}};
        auto fut = r.reply.get_future();
        {
            std::lock_guard lock(queue_mutex_);
            if (stopping_) return {503, {{"error", "station stopping"}}};
            queue_.push_back(std::move(r));
        }
        queue_cv_.notify_all();
        if (!loop_.joinable()) drain();
        return fut.get();
    }

    void run() {
        using clock = std::chrono::steady_clock;
        auto next = clock::now();
        const auto period = std::chrono::duration<double>(sim_.config().controller.period);
        for (;;) {
            drain();
            if (!finished_) {
                sim_.tick();
                if (sim_.t() >= sim_.scenario().duration - 1e-9) finished_ = true;
                publish();
            }
            std::unique_lock lock(queue_mutex_);
            if (finished_ || opt_.speed > 0.0) {
                if (!finished_) next += std::chrono::duration_cast<clock::duration>(period / opt_.speed);
                const auto deadline = finished_ ? clock::now() + std::chrono::milliseconds(50) : next;
                while (!stopping_ && clock::now() < deadline) {
                    queue_cv_.wait_until(lock, deadline, [&] { return stopping_ || !queue_.empty(); });
                    if (!queue_.empty()) {
                        lock.unlock();
                        drain();
                        lock.lock();
                    }
                }
            }
            if (stopping_) break;
        }
        lock_and_fail_pending();
    }

    void drain() {
        std::deque<Request> batch;
        {
            std::lock_guard lock(queue_mutex_);
            batch.swap(queue_);
        }
        if (batch.empty()) return;
        for (auto& r : batch) r.reply.set_value(apply(r.payload));
        publish();
    }

    LoopReply apply(const Payload& p) {
        if (const auto* cmd = std::get_if<OperatorCommand>(&p)) {
            if (finished_) return {409, {{"error", "run finished"}}};
            const auto out = sim_.command(*cmd);
            if (!out.accepted) {
                const int status = out.reason == CommandRejection::Transition ? 409 : 400;
                return {status, {{"error", out.error}}};
            }
            return {200,
                    {{"accepted", true},
                     {"mode", std::string(to_string(out.state.mode))},
                     {"t_s", sim_.t()},
                     {"tick", sim_.tick_index()}}};
        }
        const auto& next = std::get<ControllerConfig>(p);
        if (auto v = sim_.set_controller_config(next); !v.empty()) return {400, {{"error", "invalid table"}, {"violations", v}}};
        return {200, {{"accepted", true}, {"windhold", windhold_to_json(sim_.config().controller)}}};
    }

    void lock_and_fail_pending() {
        std::deque<Request> rest;
        {
            std::lock_guard lock(queue_mutex_);
            rest.swap(queue_);
        }
        for (auto& r : rest) r.reply.set_value({503, {{"error", "station stopping"}}});
    }

    void publish() {
        auto v = std::make_shared<StationView>();
        v->snapshot = sim_.snapshot();
        v->controller = sim_.config().controller;
        v->run_id = run_id_;
        v->scenario = sim_.scenario().name;
        v->duration = sim_.scenario().duration;
        v->finished = finished_;
        {
            std::lock_guard lock(view_mutex_);
            v->version = view_ ? view_->version + 1 : 0;
            view_ = std::move(v);
        }
        view_cv_.notify_all();
    }

    Simulation sim_;
    StationOptions opt_;
    std::string run_id_;
    bool finished_ = false;

    mutable std::mutex queue_mutex_;
    std::condition_variable queue_cv_;
    std::deque<Request> queue_;
    bool stopping_ = false;

    mutable std::mutex view_mutex_;
    mutable std::condition_variable view_cv_;
    std::shared_ptr<const StationView> view_;

    std::thread loop_;
};

// ============================================================================
// HTTP
// ============================================================================

struct BindAddress {
    std::string host = "127.0.0.1";
    int port = 8080;
};

/// Parses "host:port", ":port" or "port". Port 0 asks for any free port.
inline BindAddress parse_bind(const std::string& s) {
    BindAddress b;
    const auto colon = s.rfind(':');
    const std::string host = colon == std::string::npos ? "" : s.substr(0, colon);
    const std::string port = colon == std::string::npos ? s : s.substr(colon + 1);
    if (!host.empty()) b.host = host;
    int p = -1;
    const auto [ptr, ec] = std::from_chars(port.data(), port.data() + port.size(), p);
    if (ec != std::errc() || ptr != port.data() + port.size() || p < 0 || p > 65535)
        throw ValidationError({"bind address \"" + s + "\": port must be an integer in [0, 65535]"});
    b.port = p;
    return b;
}

namespace detail {

inline void reply_json(httplib::Response& res, int status, const json& body) {
    res.status = status;
    res.set_content(body.dump(), "application/json");
}

inline std::optional<json> parse_body(const httplib::Request& req, httplib::Response& res) {
    try {
        auto j = json::parse(req.body);
        if (!j.is_object()) {
            reply_json(res, 400, {{"error", "body must be a JSON object"}});
            return std::nullopt;
        }
        return j;
    } catch (const json::parse_error& e) {
        reply_json(res, 400, {{"error", std::string("malformed JSON: ") + e.what()}});
        return std::nullopt;
    }
}

inline OperatorCommand command_from_json(const json& j) {
    OperatorCommand cmd;
    ObjectReader r(j, "command");
    bool have_mode = false;
    r.custom("mode", [&](const json& a, const std::string& p) {
        if (!a.is_string()) throw ParseError(p + ": expected a string");
        const auto m = mode_from_string(a.get<std::string>());
        if (!m) throw ParseError(p + ": unknown mode \"" + a.get<std::string>() + "\"");
        cmd.mode = *m;
        have_mode = true;
    });
    r.custom("duty", [&](const json& a, const std::string& p) {
        if (!a.is_number()) throw ParseError(p + ": expected a number");
        cmd.duty = a.get<double>();
    });
    r.finish();
    if (!have_mode) throw ParseError("command: missing \"mode\"");
    return cmd;
}

} // namespace detail

/// The HTTP front end over a GroundStation.
class StationServer {
public:
    explicit StationServer(GroundStation& station) : station_(station) {
        http_.set_socket_options([](socket_t sock) {
            int yes = 1;
            setsockopt(sock, SOL_SOCKET, SO_REUSEADDR, &yes, sizeof yes);
        });
        routes();
    }

    StationServer(const StationServer&) = delete;
    StationServer& operator=(const StationServer&) = delete;

    ~StationServer() { stop(); }

    /// Binds and returns the port. Throws IoError when the address is busy.
    int bind(const BindAddress& addr) {
        const int port = addr.port == 0 ? http_.bind_to_any_port(addr.host) : addr.port;
        if (port <= 0 || (addr.port != 0 && !http_.bind_to_port(addr.host, addr.port)))
            throw IoError("cannot bind " + addr.host + ":" + std::to_string(addr.port));
        return port;
    }

    /// Serves until stop() is called.
    void listen() { http_.listen_after_bind(); }

    void start_background() {
        thread_ = std::thread([this] { listen(); });
        http_.wait_until_ready();
    }

    void stop() {
        http_.stop();
        if (thread_.joinable()) thread_.join();
    }

private:
    void routes() {
        http_.Get("/api/state", [this](const httplib::Request&, httplib::Response& res) {
            detail::reply_json(res, 200, state_json(*station_.view()));
        });

        http_.Get("/api/runs", [this](const httplib::Request&, httplib::Response& res) {
            const auto v = station_.view();
            detail::reply_json(res, 200,
                               {{"runs",
                                 json::array({{{"run_id", v->run_id},
                                               {"scenario", v->scenario},
                                               {"status", v->finished ? "finished" : "running"},
                                               {"t_s", v->snapshot.t},
                                               {"duration_s", v->duration}}})}});
        });

        http_.Get("/api/config", [this](const httplib::Request&, httplib::Response& res) {
            detail::reply_json(res, 200, windhold_to_json(station_.view()->controller));
        });

        http_.Get("/api/stream", [this](const httplib::Request&, httplib::Response& res) {
            res.set_header("Cache-Control", "no-cache");
            auto last = std::make_shared<std::optional<std::uint64_t>>();
            res.set_chunked_content_provider("text/event-stream", [this, last](std::size_t, httplib::DataSink& sink) {
                const auto v = last->has_value() ? station_.wait_view(**last, std::chrono::milliseconds(1000))
                                                 : station_.view();
                if (station_.stopping()) {
                    sink.done();
                    return true;
                }
                if (last->has_value() && v->version == **last) {
                    static constexpr char keepalive[] = ": keepalive\n\n";
                    return sink.write(keepalive, sizeof keepalive - 1);
                }
                *last = v->version;
                const std::string event = "data: " + state_json(*v).dump() + "\n\n";
                return sink.write(event.data(), event.size());
            });
        });

        http_.Post("/api/command", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = detail::parse_body(req, res);
            if (!body) return;
            OperatorCommand cmd;
            try {
                cmd = detail::command_from_json(*body);
            } catch (const ParseError& e) {
                detail::reply_json(res, 400, {{"error", e.what()}});
                return;
            }
            const auto r = station_.command(cmd);
            detail::reply_json(res, r.status, r.body);
        });

        http_.Post("/api/config", [this](const httplib::Request& req, httplib::Response& res) {
            const auto body = detail::parse_body(req, res);
            if (!body) return;
            ControllerConfig next = station_.view()->controller;
            try {
                windhold_from_json(*body, next);
            } catch (const ValidationError& e) {
                detail::reply_json(res, 400, {{"error", "invalid table"}, {"violations", e.violations()}});
                return;
            } catch (const std::exception& e) {
                detail::reply_json(res, 400, {{"error", e.what()}});
                return;
            }
            const auto r = station_.set_table(next);
            detail::reply_json(res, r.status, r.body);
        });
    }

    GroundStation& station_;
    httplib::Server http_;
    std::thread thread_;
};

} // namespace kitebot
