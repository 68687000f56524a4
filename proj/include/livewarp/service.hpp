// Copyright (C) 2026 The livewarp Authors
// SPDX-License-Identifier: Apache-2.0
//

#pragma once

#include <atomic>
#include <chrono>
#include <condition_variable>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <json.hpp>

#include "livewarp/dataset.hpp"
#include "livewarp/engine.hpp"
#include "livewarp/motion.hpp"
#include "livewarp/protocol.hpp"

namespace livewarp {

struct ServiceConfig {
    std::string address = "127.0.0.1";
    unsigned short port = 8765;  // 0 picks a free port
    double replay_fps = 30.0;    // 0 replays as fast as possible
    double render_fps = 15.0;
    int width = 640;
    int height = 480;
    EngineConfig engine;
    bool select_keyframes = true;  // false: every replayed frame becomes a keyframe
    KeyframeSelectorConfig keyframes;
    bool png = false;
    int socket_send_buffer = 0;  // bytes; 0 keeps the system default
    std::function<void(const std::string&)> log;
};

/// Frames that may be waiting for the socket at once, including the one in flight.
inline constexpr std::size_t kMaxQueuedFrames = 2;

namespace service_detail {

namespace asio = boost::asio;
namespace beast = boost::beast;
namespace websocket = boost::beast::websocket;
using tcp = asio::ip::tcp;
using json = nlohmann::json;

// State written by the session side and read by the render loop.
struct Mailbox {
    std::optional<Pose> pose;
    ViewMode mode = ViewMode::Color;
    EngineConfig config;
    std::uint64_t config_version = 0;
    bool png = false;
    double render_fps = 15.0;
    std::uint64_t session_id = 0;  // 0: nobody connected
    std::uint64_t next_frame_index = 0;
};

struct Counters {
    std::uint64_t frames_rendered = 0;
    std::uint64_t frames_sent = 0;
    std::uint64_t frames_dropped = 0;
    std::uint64_t sessions = 0;
    std::size_t last_sources = 0;
    std::size_t last_holes = 0;
    FrameTimings last_timings;
    CacheStats cache;
    std::string last_error;
};

}  // namespace service_detail

/// Replays a stream into a keyframe store and streams rendered frames to one
/// WebSocket client at a time.
class RenderService {
    using json = nlohmann::json;
    using tcp = service_detail::tcp;

public:
    RenderService(std::vector<InputFrame> stream, ServiceConfig config)
        : config_(std::move(config)), stream_(std::move(stream)) {
        if (stream_.empty()) throw Error("serve: empty input stream");
        if (!(config_.render_fps > 0.0)) throw Error("serve: render_fps must be positive");
        if (config_.replay_fps < 0.0) throw Error("serve: replay_fps must be >= 0");
        if (config_.width < 1 || config_.height < 1) throw Error("serve: invalid output size");
        config_.engine.validate();
        intrinsics_ = stream_.front().intrinsics.scaled_to(config_.width, config_.height);
        mailbox_.config = config_.engine;
        mailbox_.png = config_.png;
        mailbox_.render_fps = config_.render_fps;
    }

    RenderService(const RenderService&) = delete;
    RenderService& operator=(const RenderService&) = delete;
    ~RenderService() { stop(); }

    void start() {
        if (started_) throw Error("serve: already started");
        started_ = true;
        namespace asio = service_detail::asio;
        acceptor_.emplace(ioc_);
        const tcp::endpoint ep(asio::ip::make_address(config_.address), config_.port);
        acceptor_->open(ep.protocol());
        acceptor_->set_option(asio::socket_base::reuse_address(true));
        acceptor_->bind(ep);
        acceptor_->listen();
        port_ = acceptor_->local_endpoint().port();
        accept_next();
        io_thread_ = std::thread([this] { ioc_.run(); });
        ingest_thread_ = std::thread([this] { ingest_loop(); });
        render_thread_ = std::thread([this] { render_loop(); });
        log("listening on " + config_.address + ":" + std::to_string(port_));
    }

    void stop() {
        if (!started_ || stopping_.exchange(true)) return;
        wake_.notify_all();
        if (render_thread_.joinable()) render_thread_.join();
        if (ingest_thread_.joinable()) ingest_thread_.join();
        service_detail::asio::post(ioc_, [this] {
            boost::system::error_code ec;
            if (acceptor_) acceptor_->close(ec);
            if (auto s = session_.lock()) s->shutdown();
            ioc_.stop();
        });
        if (io_thread_.joinable()) io_thread_.join();
    }

    unsigned short port() const { return port_; }
    const KeyframeStore& store() const { return store_; }
    const Intrinsics& intrinsics() const { return intrinsics_; }
    bool ingest_done() const { return ingest_done_; }
    std::size_t ingested() const { return ingested_; }

    /// Blocks until the whole stream has been replayed.
    void wait_for_ingest() const {
        while (!ingest_done_ && !stopping_) std::this_thread::sleep_for(std::chrono::milliseconds(5));
    }

    json stats() const {
        json j;
        {
            std::lock_guard lock(counters_mutex_);
            j["frames_rendered"] = counters_.frames_rendered;
            j["frames_sent"] = counters_.frames_sent;
            j["frames_dropped"] = counters_.frames_dropped;
            j["sessions"] = counters_.sessions;
            j["last_frame"] = {{"sources", counters_.last_sources},
                               {"holes", counters_.last_holes},
                               {"total_ms", counters_.last_timings.total_ms},
                               {"select_ms", counters_.last_timings.select_ms},
                               {"encode_ms", counters_.last_timings.encode_ms},
                               {"raster_ms", counters_.last_timings.raster_ms}};
            j["cache"] = {{"hits", counters_.cache.hits},
                          {"misses", counters_.cache.misses},
                          {"encodes", counters_.cache.encodes},
                          {"evictions", counters_.cache.evictions}};
            if (!counters_.last_error.empty()) j["last_error"] = counters_.last_error;
        }
        {
            std::lock_guard lock(mailbox_mutex_);
            j["next_frame_index"] = mailbox_.next_frame_index;
            j["mode"] = to_string(mailbox_.mode);
            j["warp_mode"] = to_string(mailbox_.config.mode);
            j["render_fps"] = mailbox_.render_fps;
            j["png"] = mailbox_.png;
        }
        j["keyframes"] = store_.size();
        j["ingested"] = ingested_.load();
        j["ingest_done"] = ingest_done_.load();
        j["width"] = config_.width;
        j["height"] = config_.height;
        return j;
    }

private:
    class Session;

    // Session I/O. Everything below runs on the io thread.

    void accept_next() {
        acceptor_->async_accept([this](boost::system::error_code ec, tcp::socket socket) {
            if (ec) return;
            if (config_.socket_send_buffer > 0) {
                socket.set_option(service_detail::asio::socket_base::send_buffer_size(config_.socket_send_buffer), ec);
            }
            socket.set_option(tcp::no_delay(true), ec);
            std::make_shared<Session>(*this, std::move(socket))->start();
            accept_next();
        });
    }

    // Returns the new session id, or 0 when another session is active.
    std::uint64_t attach(const std::shared_ptr<Session>& s) {
        if (session_.lock()) return 0;
        session_ = s;
        std::lock_guard lock(mailbox_mutex_);
        mailbox_.session_id = ++last_session_id_;
        mailbox_.pose.reset();
        {
            std::lock_guard c(counters_mutex_);
            ++counters_.sessions;
        }
        log("session " + std::to_string(mailbox_.session_id) + " connected");
        return mailbox_.session_id;
    }

    void detach(std::uint64_t id) {
        std::lock_guard lock(mailbox_mutex_);
        if (mailbox_.session_id != id) return;
        mailbox_.session_id = 0;
        mailbox_.pose.reset();
        session_.reset();
        log("session " + std::to_string(id) + " closed");
    }

    json handle_control(std::string_view text) {
        using namespace protocol;
        try {
            const ControlMessage m = parse_control(text);
            json reply = make_ack(m.type(), m.seq);
            std::visit([&](const auto& body) { apply(body, reply); }, m.body);
            return reply;
        } catch (const Error& e) {
            const Envelope env = peek_envelope(text);
            const auto* pe = dynamic_cast<const ProtocolError*>(&e);
            return make_error(pe ? *pe : ProtocolError("rejected", e.what()), env.type, env.seq);
        }
    }

    void apply(const protocol::SetPose& m, json& reply) {
        std::lock_guard lock(mailbox_mutex_);
        mailbox_.pose = m.pose;
        reply["applies_from"] = mailbox_.next_frame_index;
    }

    void apply(const protocol::SetMode& m, json& reply) {
        std::lock_guard lock(mailbox_mutex_);
        mailbox_.mode = m.mode;
        reply["applies_from"] = mailbox_.next_frame_index;
    }

    void apply(const protocol::SetParams& m, json& reply) {
        std::lock_guard lock(mailbox_mutex_);
        const EngineConfig next = m.params.apply(mailbox_.config);
        mailbox_.config = next;
        ++mailbox_.config_version;
        if (m.params.png) mailbox_.png = *m.params.png;
        if (m.params.render_fps) mailbox_.render_fps = *m.params.render_fps;
        reply["applies_from"] = mailbox_.next_frame_index;
        wake_.notify_all();
    }

    void apply(const protocol::UpdatePoses& m, json& reply) {
        const Snapshot snap = store_.snapshot();
        for (const auto& u : m.batch) {
            if (!snap.find(u.id)) {
                throw protocol::ProtocolError("unknown_keyframe", "update_poses: unknown keyframe id " + std::to_string(u.id));
            }
        }
        store_.apply_pose_updates(m.batch);
        std::lock_guard lock(mailbox_mutex_);
        reply["applies_from"] = mailbox_.next_frame_index;
        reply["updated"] = m.batch.size();
    }

    void apply(const protocol::GetStats&, json& reply) {
        const json s = stats();
        reply["type"] = "stats";
        for (const auto& [k, v] : s.items()) reply[k] = v;
    }

    // Ingest producer.

    void ingest_loop() {
        using clock = std::chrono::steady_clock;
        const auto t0 = clock::now();
        KeyframeSelector selector(config_.keyframes);
        for (std::size_t i = 0; i < stream_.size() && !stopping_; ++i) {
            if (config_.replay_fps > 0.0) {
                const auto due = t0 + std::chrono::duration_cast<clock::duration>(
                                          std::chrono::duration<double>(double(i) / config_.replay_fps));
                std::unique_lock lock(wake_mutex_);
                wake_.wait_until(lock, due, [this] { return stopping_.load(); });
                if (stopping_) break;
            }
            auto frame = std::make_shared<const InputFrame>(stream_[i]);
            if (config_.select_keyframes) {
                for (auto& e : selector.push(std::move(frame))) store_.insert(e.frame);
            } else {
                store_.insert(std::move(frame));
            }
            ++ingested_;
        }
        if (!stopping_ && config_.select_keyframes) {
            for (auto& e : selector.flush()) store_.insert(e.frame);
        }
        ingest_done_ = true;
        log("ingest finished: " + std::to_string(store_.size()) + " keyframes");
    }

    // Render loop; sole owner of the engine.

    void render_loop() {
        using clock = std::chrono::steady_clock;
        RenderEngine engine(store_, config_.engine);
        std::uint64_t config_version = 0;
        std::uint64_t session_id = 0;
        auto next_tick = clock::now();
        while (!stopping_) {
            std::optional<Pose> pose;
            ViewMode mode = ViewMode::Color;
            bool png = false;
            double fps = config_.render_fps;
            std::uint64_t index = 0;
            std::optional<EngineConfig> reconfigure;
            bool render = false;
            {
                std::lock_guard lock(mailbox_mutex_);
                fps = mailbox_.render_fps;
                if (mailbox_.session_id != 0 && mailbox_.pose && store_.size() > 0) {
                    render = true;
                    pose = mailbox_.pose;
                    mode = mailbox_.mode;
                    png = mailbox_.png;
                    index = mailbox_.next_frame_index++;
                    if (mailbox_.config_version != config_version) {
                        config_version = mailbox_.config_version;
                        reconfigure = mailbox_.config;
                    }
                    if (mailbox_.session_id != session_id) {
                        session_id = mailbox_.session_id;
                        engine.reset_temporal();
                    }
                }
            }
            if (render) {
                try {
                    if (reconfigure) engine.reconfigure(*reconfigure);
                    const RenderResult r = engine.render(*pose, intrinsics_);
                    auto bytes = std::make_shared<std::vector<std::uint8_t>>(
                        protocol::FrameMessage::from_image(frame_for_mode(r.frame, mode), mode, index, png).encode());
                    {
                        std::lock_guard lock(counters_mutex_);
                        ++counters_.frames_rendered;
                        counters_.last_sources = r.feature_sources.size();
                        counters_.last_holes = r.holes;
                        counters_.last_timings = r.timings;
                        counters_.cache = engine.cache().stats();
                    }
                    service_detail::asio::post(ioc_, [this, session_id, bytes = std::move(bytes)]() mutable {
                        offer_frame(session_id, std::move(bytes));
                    });
                } catch (const std::exception& e) {
                    std::lock_guard lock(counters_mutex_);
                    counters_.last_error = e.what();
                }
            }
            const auto period = std::chrono::duration_cast<clock::duration>(std::chrono::duration<double>(1.0 / fps));
            next_tick += period;
            const auto now = clock::now();
            if (next_tick < now) next_tick = now;  // late: no catch-up burst
            std::unique_lock lock(wake_mutex_);
            wake_.wait_until(lock, next_tick, [this] { return stopping_.load(); });
        }
    }

    void offer_frame(std::uint64_t session_id, std::shared_ptr<std::vector<std::uint8_t>> bytes) {
        auto s = session_.lock();
        std::uint64_t current = 0;
        {
            std::lock_guard lock(mailbox_mutex_);
            current = mailbox_.session_id;
        }
        if (!s || current != session_id || !s->offer_frame(std::move(bytes))) {
            std::lock_guard lock(counters_mutex_);
            ++counters_.frames_dropped;
        }
    }

    void count_sent() {
        std::lock_guard lock(counters_mutex_);
        ++counters_.frames_sent;
    }

    void log(const std::string& msg) const {
        if (config_.log) config_.log(msg);
    }

    class Session : public std::enable_shared_from_this<Session> {
    public:
        Session(RenderService& owner, tcp::socket socket) : owner_(owner), ws_(std::move(socket)) {}

        void start() {
            namespace websocket = service_detail::websocket;
            ws_.set_option(websocket::stream_base::timeout::suggested(boost::beast::role_type::server));
            ws_.read_message_max(1 << 20);
            ws_.async_accept([self = shared_from_this()](boost::system::error_code ec) {
                if (ec) return;
                self->id_ = self->owner_.attach(self);
                if (self->id_ == 0) {
                    protocol::ProtocolError busy("busy", "another session is active");
                    self->enqueue_text(protocol::make_error(busy, std::nullopt, std::nullopt).dump());
                    self->close_after_write_ = true;
                    return;
                }
                self->read_next();
            });
        }

        // False when the frame is dropped.
        bool offer_frame(std::shared_ptr<std::vector<std::uint8_t>> bytes) {
            if (closed_ || frames_pending_ >= kMaxQueuedFrames) return false;
            ++frames_pending_;
            queue_.push_back({true, std::move(bytes)});
            if (!writing_) write_next();
            return true;
        }

        void shutdown() {
            if (closed_) return;
            boost::system::error_code ec;
            boost::beast::get_lowest_layer(ws_).close(ec);
            teardown();
        }

    private:
        struct Outgoing {
            bool binary = false;
            std::shared_ptr<std::vector<std::uint8_t>> data;
        };

        void read_next() {
            ws_.async_read(buffer_, [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
                if (ec) return self->teardown();
                std::string reply;
                if (self->ws_.got_text()) {
                    reply = self->owner_.handle_control(boost::beast::buffers_to_string(self->buffer_.data())).dump();
                } else {
                    protocol::ProtocolError e("malformed", "control messages must be text frames");
                    reply = protocol::make_error(e, std::nullopt, std::nullopt).dump();
                }
                self->buffer_.consume(self->buffer_.size());
                self->enqueue_text(std::move(reply));
                self->read_next();
            });
        }

        void enqueue_text(std::string text) {
            if (closed_) return;
            queue_.push_back({false, std::make_shared<std::vector<std::uint8_t>>(text.begin(), text.end())});
            if (!writing_) write_next();
        }

        void write_next() {
            if (queue_.empty() || closed_) {
                writing_ = false;
                if (close_after_write_ && !closed_) {
                    ws_.async_close(service_detail::websocket::close_code::try_again_later,
                                    [self = shared_from_this()](boost::system::error_code) { self->teardown(); });
                }
                return;
            }
            writing_ = true;
            const Outgoing& o = queue_.front();
            ws_.binary(o.binary);
            ws_.async_write(boost::asio::buffer(*o.data),
                            [self = shared_from_this()](boost::system::error_code ec, std::size_t) {
                                if (ec) return self->teardown();
                                if (self->queue_.front().binary) {
                                    --self->frames_pending_;
                                    self->owner_.count_sent();
                                }
                                self->queue_.pop_front();
                                self->write_next();
                            });
        }

        void teardown() {
            if (closed_) return;
            closed_ = true;
            queue_.clear();
            frames_pending_ = 0;
            if (id_ != 0) owner_.detach(id_);
        }

        RenderService& owner_;
        service_detail::websocket::stream<tcp::socket> ws_;
        boost::beast::flat_buffer buffer_;
        std::deque<Outgoing> queue_;
        std::size_t frames_pending_ = 0;
        bool writing_ = false;
        bool closed_ = false;
        bool close_after_write_ = false;
        std::uint64_t id_ = 0;
    };

    ServiceConfig config_;
    std::vector<InputFrame> stream_;
    Intrinsics intrinsics_;
    KeyframeStore store_;

    service_detail::asio::io_context ioc_;
    std::optional<tcp::acceptor> acceptor_;
    unsigned short port_ = 0;
    std::weak_ptr<Session> session_;  // io thread only
    std::uint64_t last_session_id_ = 0;

    mutable std::mutex mailbox_mutex_;
    service_detail::Mailbox mailbox_;
    mutable std::mutex counters_mutex_;
    service_detail::Counters counters_;

    std::mutex wake_mutex_;
    std::condition_variable wake_;
    std::atomic<bool> stopping_{false};
    std::atomic<bool> ingest_done_{false};
    std::atomic<std::size_t> ingested_{0};
    bool started_ = false;

    std::thread io_thread_;
    std::thread ingest_thread_;
    std::thread render_thread_;
};

}  // namespace livewarp
