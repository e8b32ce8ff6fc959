#include "xmt/session.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "xmt/wav.hpp"

namespace xmt {

namespace {

using nlohmann::json;

void put_le(std::string& out, std::uint64_t v, int bytes) {
    for (int i = 0; i < bytes; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xFF));
}

std::uint64_t get_le(std::string_view in, std::size_t at, int bytes) {
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[at + i])) << (8 * i);
    return v;
}

json vec_json(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

bool is_state_update(const Frame& f) {
    return f.kind == Frame::Kind::Json && f.payload.find("\"StateUpdate\"") != std::string::npos;
}

}  // namespace

PointerInput tour_input(double t) {
    constexpr double tau = 6.283185307179586;
    PointerInput in;
    in.x = 0.8 * std::sin(tau * 0.07 * t);
    in.y = 0.8 * std::sin(tau * 0.11 * t + 0.5);
    in.push = 0.5 * (1.0 - std::cos(tau * 0.25 * t));
    in.button = std::fmod(t, 12.0) < 2.0;
    return in;
}

PointerInput parse_pointer_input(std::string_view text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception&) {
        throw std::invalid_argument("pointer input is not JSON");
    }
    if (!j.is_object()) throw std::invalid_argument("pointer input must be an object");
    const auto number = [&](const char* key, double fallback, bool required) {
        if (!j.contains(key)) {
            if (required) throw std::invalid_argument(std::string("pointer input lacks ") + key);
            return fallback;
        }
        const auto& v = j.at(key);
        if (!v.is_number()) throw std::invalid_argument(std::string("pointer input field ") + key + " is not a number");
        const double d = v.get<double>();
        if (!std::isfinite(d)) throw std::invalid_argument(std::string("pointer input field ") + key + " is not finite");
        return d;
    };
    PointerInput in;
    in.x = std::clamp(number("x", 0.0, true), -1.0, 1.0);
    in.y = std::clamp(number("y", 0.0, true), -1.0, 1.0);
    in.push = std::clamp(number("push", 0.0, false), 0.0, 1.0);
    if (j.contains("button")) {
        if (!j.at("button").is_boolean()) throw std::invalid_argument("pointer input button must be boolean");
        in.button = j.at("button").get<bool>();
    }
    return in;
}

std::string encode_frame(const Frame& frame) {
    std::string out;
    out.reserve(kFrameHeaderSize + frame.payload.size());
    out.push_back(static_cast<char>(frame.kind));
    put_le(out, frame.seq, 8);
    put_le(out, frame.payload.size(), 4);
    out += frame.payload;
    return out;
}

std::optional<Frame> decode_frame(std::string& buffer) {
    if (buffer.size() < kFrameHeaderSize) return std::nullopt;
    const char kind = buffer[0];
    if (kind != 'J' && kind != 'A') throw std::runtime_error("corrupt session stream");
    const auto length = static_cast<std::size_t>(get_le(buffer, 9, 4));
    if (buffer.size() < kFrameHeaderSize + length) return std::nullopt;
    Frame f;
    f.kind = static_cast<Frame::Kind>(kind);
    f.seq = get_le(buffer, 1, 8);
    f.payload = buffer.substr(kFrameHeaderSize, length);
    buffer.erase(0, kFrameHeaderSize + length);
    return f;
}

// ---------------------------------------------------------------------------

void Subscriber::push(Frame frame) {
    {
        std::lock_guard lock(mutex_);
        if (closed_) return;
        if (frame.kind == Frame::Kind::Audio && paused_) {
            if (queue_.size() > capacity_ / 2) {
                ++dropped_audio_;
                return;
            }
            paused_ = false;
        }
        if (queue_.size() >= capacity_) {
            const auto oldest = std::find_if(queue_.begin(), queue_.end(), is_state_update);
            if (oldest != queue_.end()) {
                queue_.erase(oldest);
                ++dropped_state_;
            } else if (frame.kind == Frame::Kind::Audio) {
                paused_ = true;
                ++dropped_audio_;
                return;
            } else if (is_state_update(frame)) {
                ++dropped_state_;
                return;
            }
        }
        queue_.push_back(std::move(frame));
    }
    ready_.notify_one();
}

std::optional<Frame> Subscriber::pop(std::chrono::milliseconds timeout) {
    std::unique_lock lock(mutex_);
    ready_.wait_for(lock, timeout, [&] { return closed_ || !queue_.empty(); });
    if (queue_.empty()) return std::nullopt;
    Frame f = std::move(queue_.front());
    queue_.pop_front();
    return f;
}

void Subscriber::close() {
    {
        std::lock_guard lock(mutex_);
        closed_ = true;
    }
    ready_.notify_all();
}

bool Subscriber::closed() const {
    std::lock_guard lock(mutex_);
    return closed_;
}

std::uint64_t Broadcaster::publish(Frame::Kind kind, std::string payload) {
    std::lock_guard lock(mutex_);
    const std::uint64_t seq = ++seq_;
    for (const auto& s : subscribers_) s->push(Frame{kind, seq, payload});
    return seq;
}

std::shared_ptr<Subscriber> Broadcaster::subscribe(const std::string& greeting) {
    auto sub = std::make_shared<Subscriber>(capacity_);
    std::lock_guard lock(mutex_);
    sub->push(Frame{Frame::Kind::Json, ++seq_, greeting});
    subscribers_.push_back(sub);
    return sub;
}

void Broadcaster::unsubscribe(const std::shared_ptr<Subscriber>& subscriber) {
    subscriber->close();
    std::lock_guard lock(mutex_);
    std::erase(subscribers_, subscriber);
}

void Broadcaster::close_all() {
    std::lock_guard lock(mutex_);
    for (const auto& s : subscribers_) s->close();
    subscribers_.clear();
}

std::size_t Broadcaster::subscribers() const {
    std::lock_guard lock(mutex_);
    return subscribers_.size();
}

std::uint64_t Broadcaster::last_seq() const {
    std::lock_guard lock(mutex_);
    return seq_;
}

// ---------------------------------------------------------------------------

LiveSession::LiveSession(Config config, World world, Emit emit, bool capture_audio)
    : config_(std::move(config)),
      engine_(config_.scene, std::move(world)),
      sim_(config_.sim),
      emit_(std::move(emit)),
      performance_(
          engine_,
          [this](std::span<const double> block, const ControlFrame&) {
              streamed_samples_ += block.size();
              if (emit_) emit_(Frame::Kind::Audio, encode_pcm16_stereo(block));
          },
          capture_audio) {
    record_.tick_rate = config_.scene.tick_rate;
    record_.config_hash = config_hash(config_);
}

void LiveSession::submit(const PointerInput& input) {
    std::lock_guard lock(submit_mutex_);
    inbound_.publish(input);
}

void LiveSession::swap_scene(const SceneConfig& config, World world) {
    engine_.set_scene(config, std::move(world));
    emit(Frame::Kind::Json, json{{"type", "SceneSwap"}, {"config", scene_config_to_json(config)}}.dump());
    if (config.scene == SceneKind::Terrain) {
        const auto rev = ++terrain_revision_;
        emit(Frame::Kind::Json,
             json{{"type", "TerrainReady"}, {"image", "/terrain.pgm?rev=" + std::to_string(rev)}}.dump());
    }
}

void LiveSession::tick() {
    PointerInput latest;
    if (inbound_.consume(latest)) input_ = latest;

    const auto snap = engine_.snapshot();
    const SimInput drive = SimInput::planar(input_.x, input_.y, -input_.push * snap->config.force_max, input_.button);
    const DeviceState& state = sim_.step(drive, last_force_);
    last_force_ = xmt::haptic_tick(snap->config, state, snap->world);
    record_.log(state, last_force_);
    performance_.push_tick(state, last_force_);

    const std::uint64_t i = performance_.ticks() - 1;
    const double rate = config_.scene.tick_rate;
    const auto slot = [rate](std::uint64_t k) { return static_cast<std::uint64_t>(static_cast<double>(k) * 60.0 / rate); };
    if (i == 0 || slot(i) != slot(i - 1)) {
        ++state_updates_;
        if (emit_) {
            const ControlFrame frame = control_frame(snap->config, state, last_force_, snap->world);
            const double v = snap->config.scene == SceneKind::Terrain ? frame.terrain_value : frame.resistance;
            json update = {{"type", "StateUpdate"},
                           {"t", static_cast<double>(i) / rate},
                           {"pos", vec_json(state.position)},
                           {"force", vec_json(last_force_.force)},
                           {"openness", frame.gate_openness},
                           {"active_node", frame.active_node ? json(*frame.active_node) : json(nullptr)},
                           {"v", v}};
            emit(Frame::Kind::Json, update.dump());
        }
    }
}

void LiveSession::finish() { performance_.finish(); }

std::string LiveSession::hello_message() const {
    const auto snap = engine_.snapshot();
    return json{{"type", "Hello"},
                {"config", scene_config_to_json(snap->config)},
                {"state_rate", 60},
                {"audio", {{"format", "s16le"}, {"channels", 2}, {"sample_rate", snap->config.sample_rate}}}}
        .dump();
}

std::string LiveSession::terrain_pgm() const {
    const auto snap = engine_.snapshot();
    const auto* terrain = terrain_of(snap->world);
    if (!terrain) throw std::runtime_error("the active scene has no terrain");
    return export_pgm(*terrain);
}

}  // namespace xmt
