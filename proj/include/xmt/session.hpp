#pragma once

#include <array>
#include <atomic>
#include <chrono>
#include <condition_variable>
#include <cstdint>
#include <deque>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "xmt/config.hpp"
#include "xmt/device_sim.hpp"
#include "xmt/render.hpp"
#include "xmt/scene.hpp"

namespace xmt {

/// Single-producer single-consumer latest-value slot (triple buffer).
/// Neither side ever blocks; the reader sees the newest complete value.
template <typename T>
class LatestValue {
public:
    void publish(const T& value) {
        buffers_[write_] = value;
        const auto previous = state_.exchange(static_cast<std::uint8_t>(write_ | kFresh), std::memory_order_acq_rel);
        write_ = previous & kIndex;
    }

    /// Returns true and fills `out` if a value arrived since the last call.
    bool consume(T& out) {
        if (!(state_.load(std::memory_order_acquire) & kFresh)) return false;
        const auto previous = state_.exchange(static_cast<std::uint8_t>(read_), std::memory_order_acq_rel);
        read_ = previous & kIndex;
        out = buffers_[read_];
        return true;
    }

private:
    static constexpr std::uint8_t kIndex = 0x3;
    static constexpr std::uint8_t kFresh = 0x4;

    std::array<T, 3> buffers_{};
    std::atomic<std::uint8_t> state_{1};
    std::uint8_t write_ = 0;
    std::uint8_t read_ = 2;
};

/// Pointer stand-in for the grip: a workspace target, forward push in
/// [0, 1] and the grip button.
struct PointerInput {
    double x = 0.0;
    double y = 0.0;
    double push = 0.0;
    bool button = false;
};

/// Scripted performer: a slow Lissajous sweep over the workspace with a
/// pulsing forward push. Deterministic in t.
PointerInput tour_input(double t);

/// Throws std::invalid_argument on malformed messages. Targets are clamped
/// to the workspace and push to [0, 1].
PointerInput parse_pointer_input(std::string_view json_text);

/// Session stream framing: kind byte ('J' JSON message, 'A' audio), 64-bit
/// little-endian sequence number, 32-bit little-endian payload length,
/// payload. Audio payloads are 16-bit little-endian stereo PCM.
struct Frame {
    enum class Kind : char { Json = 'J', Audio = 'A' };

    Kind kind = Kind::Json;
    std::uint64_t seq = 0;
    std::string payload;
};

inline constexpr std::size_t kFrameHeaderSize = 13;

std::string encode_frame(const Frame& frame);
/// Removes and returns the first complete frame in `buffer`, if any.
std::optional<Frame> decode_frame(std::string& buffer);

/// Bounded per-client queue. On overflow the oldest StateUpdate is dropped;
/// if only audio is queued, capture pauses until the client drains.
class Subscriber {
public:
    explicit Subscriber(std::size_t capacity) : capacity_(capacity) {}

    void push(Frame frame);
    std::optional<Frame> pop(std::chrono::milliseconds timeout);
    void close();
    bool closed() const;

    std::uint64_t dropped_state() const { return dropped_state_; }
    std::uint64_t dropped_audio() const { return dropped_audio_; }

private:
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::condition_variable ready_;
    std::deque<Frame> queue_;
    bool closed_ = false;
    bool paused_ = false;
    std::atomic<std::uint64_t> dropped_state_{0};
    std::atomic<std::uint64_t> dropped_audio_{0};
};

/// Assigns session sequence numbers and fans frames out to subscribers.
class Broadcaster {
public:
    explicit Broadcaster(std::size_t queue_capacity = 1024) : capacity_(queue_capacity) {}

    std::uint64_t publish(Frame::Kind kind, std::string payload);
    /// The first frame a subscriber sees is `greeting`.
    std::shared_ptr<Subscriber> subscribe(const std::string& greeting);
    void unsubscribe(const std::shared_ptr<Subscriber>& subscriber);
    void close_all();
    std::size_t subscribers() const;
    std::uint64_t last_seq() const;

private:
    std::size_t capacity_;
    mutable std::mutex mutex_;
    std::uint64_t seq_ = 0;
    std::vector<std::shared_ptr<Subscriber>> subscribers_;
};

/// One performer session: simulated grip, scene engine, traversal record
/// and audio, advanced one haptic tick at a time. Emits StateUpdate (60 Hz),
/// audio block and scene messages to `emit`.
class LiveSession {
public:
    using Emit = std::function<void(Frame::Kind, std::string)>;

    LiveSession(Config config, World world, Emit emit = {}, bool capture_audio = true);

    /// Service side. Concurrent callers are serialized.
    void submit(const PointerInput& input);
    /// Service side. Throws if the world does not suit the scene.
    void swap_scene(const SceneConfig& config, World world);

    /// Haptic context.
    void tick();
    void finish();

    std::string hello_message() const;
    std::string terrain_pgm() const;
    SceneConfig active_config() const { return engine_.snapshot()->config; }
    const Config& config() const { return config_; }
    const TraversalRecord& record() const { return record_; }
    const std::vector<double>& audio() const { return performance_.audio(); }
    std::uint64_t ticks() const { return performance_.ticks(); }
    std::uint64_t streamed_samples() const { return streamed_samples_; }
    std::uint64_t state_updates() const { return state_updates_; }
    const DeviceState& device() const { return sim_.state(); }
    SceneEngine& engine() { return engine_; }

private:
    void emit(Frame::Kind kind, std::string payload) {
        if (emit_) emit_(kind, std::move(payload));
    }

    Config config_;
    SceneEngine engine_;
    DeviceSim sim_;
    Emit emit_;
    Performance performance_;
    TraversalRecord record_;
    std::mutex submit_mutex_;
    LatestValue<PointerInput> inbound_;
    PointerInput input_;
    ForceCommand last_force_;
    std::uint64_t streamed_samples_ = 0;
    std::uint64_t state_updates_ = 0;
    std::atomic<std::uint64_t> terrain_revision_{0};
};

struct ServeOptions {
    std::string host = "127.0.0.1";
    int port = 8080;                 // 0 picks a free port
    std::string record_path;         // traversal written here on stop, if set
    std::string audio_path;          // session audio written here on stop, if set
    double duration = 0.0;           // seconds; 0 runs until stopped
};

/// HTTP front end for a LiveSession, ticking it in real time.
///   GET  /session      framed stream (Hello, StateUpdate, audio, SceneSwap, TerrainReady)
///   POST /input        PointerInput JSON
///   GET  /terrain.pgm  active terrain image
///   GET  /config       active scene configuration
///   POST /scene        scene configuration (merged over the active one)
class SessionServer {
public:
    SessionServer(Config config, World world, ServeOptions options);
    ~SessionServer();

    SessionServer(const SessionServer&) = delete;
    SessionServer& operator=(const SessionServer&) = delete;

    /// Binds and starts the tick and HTTP threads; returns the bound port.
    int start();
    void stop();
    /// Blocks until stopped (or the configured duration elapses).
    void wait();
    /// True once the configured duration has elapsed or stop() ran.
    bool wait_for(std::chrono::milliseconds timeout);

    int port() const { return port_; }
    std::uint64_t malformed_inputs() const { return malformed_inputs_; }
    std::uint64_t ticks() const;

private:
    struct Impl;
    std::unique_ptr<Impl> impl_;
    int port_ = 0;
    std::atomic<std::uint64_t> malformed_inputs_{0};
};

}  // namespace xmt
