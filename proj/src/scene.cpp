#include "xmt/scene.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <stdexcept>

namespace xmt {

namespace {

const NodeWorld* nodes_of(const World& world) {
    if (const auto* p = std::get_if<std::shared_ptr<const NodeWorld>>(&world)) return p->get();
    return nullptr;
}

const CorpusWorld* corpus_of(const World& world) {
    if (const auto* p = std::get_if<std::shared_ptr<const CorpusWorld>>(&world)) return p->get();
    return nullptr;
}

ForceCommand z_force(const SceneConfig& config, double newtons) {
    ForceCommand cmd;
    cmd.force.z() = std::clamp(newtons, -config.force_max, config.force_max);
    return cmd;
}

void require(bool ok, const char* message) {
    if (!ok) throw std::invalid_argument(message);
}

}  // namespace

std::string_view to_string(SceneKind kind) {
    switch (kind) {
        case SceneKind::Constant: return "CONSTANT";
        case SceneKind::Nodes: return "NODES";
        case SceneKind::Terrain: return "TERRAIN";
    }
    return "?";
}

SceneKind parse_scene_kind(std::string_view name) {
    if (name == "CONSTANT") return SceneKind::Constant;
    if (name == "NODES") return SceneKind::Nodes;
    if (name == "TERRAIN") return SceneKind::Terrain;
    throw std::invalid_argument("unknown scene kind: " + std::string(name));
}

void SceneConfig::validate() const {
    require(std::isfinite(force_min) && std::isfinite(force_max) && force_min >= 0.0 && force_min < force_max,
            "force range must satisfy 0 <= F_min < F_max");
    require(constant_force >= 0.0 && constant_force <= force_max, "constant force must lie in [0, F_max]");
    require(comb_delay_ms.lo >= 0.02 && comb_delay_ms.lo <= comb_delay_ms.hi && comb_delay_ms.hi <= 1000.0,
            "comb delay range must satisfy 0.02 ms <= D_min <= D_max <= 1000 ms");
    require(gate_max_threshold > 0.0, "gate threshold must be positive");
    require(density.lo >= 0.0 && density.lo <= density.hi, "density range must satisfy 0 <= d_min <= d_max");
    require(sample_rate >= 8000.0 && sample_rate <= 384000.0, "sample rate out of range");
    require(block_size >= 1 && block_size <= 8192, "block size out of range");
    require(tick_rate >= 100.0, "tick rate must be at least 100 Hz");
    require(master_gain >= 0.0 && master_gain <= 1.0, "master gain must lie in [0, 1]");
    terrain.validate();

    require(constant.loop_seconds > 0.0 && constant.loop_seconds <= 600.0, "loop length out of range");
    require(constant.grain_density >= 0.0, "grain density must be non-negative");
    require(constant.grain_duration >= 0.005 && constant.grain_duration <= 0.5, "grain duration out of range");
    constant.envelope.validate();

    require(nodes.onset_threshold > 0.0 && nodes.onset_threshold <= 1.0, "onset threshold must lie in (0, 1]");
    require(nodes.onset_window >= 64, "onset window must be at least 64 samples");
    require(nodes.grain_duration >= 0.005 && nodes.grain_duration <= 0.5, "grain duration out of range");

    const double nyquist = sample_rate / 2.0;
    require(terrain_audio.phasor1_hz >= 0.0 && terrain_audio.phasor1_hz <= nyquist &&
                terrain_audio.phasor2_hz >= 0.0 && terrain_audio.phasor2_hz <= nyquist,
            "phasor frequencies must lie in [0, rate/2]");
    require(terrain_audio.comb_feedback >= 0.0 && terrain_audio.comb_feedback < 1.0,
            "comb feedback must lie in [0, 1)");
    require(terrain_audio.grain_density >= 0.0, "grain density must be non-negative");
    require(terrain_audio.grain_duration >= 0.005 && terrain_audio.grain_duration <= 0.5,
            "grain duration out of range");
    require(terrain_audio.grain_position >= 0.0 && terrain_audio.grain_position <= 1.0,
            "grain position must lie in [0, 1]");
    require(terrain_audio.loop_seconds >= terrain_audio.grain_duration && terrain_audio.loop_seconds <= 60.0,
            "terrain loop must be at least one grain long");
}

bool world_matches(SceneKind kind, const World& world) {
    switch (kind) {
        case SceneKind::Constant: return corpus_of(world) != nullptr;
        case SceneKind::Nodes: {
            const auto* n = nodes_of(world);
            return n && !n->field.empty() && !n->audio.empty();
        }
        case SceneKind::Terrain: return terrain_of(world) != nullptr;
    }
    return false;
}

bool world_equal(const World& a, const World& b) {
    if (a.index() != b.index()) return false;
    if (const auto* ta = terrain_of(a)) {
        const auto* tb = terrain_of(b);
        return ta == tb || (ta->spec == tb->spec && ta->values == tb->values);
    }
    if (const auto* na = nodes_of(a)) {
        const auto* nb = nodes_of(b);
        return na == nb || (na->field == nb->field && na->segments == nb->segments && na->audio == nb->audio);
    }
    if (const auto* ca = corpus_of(a)) {
        const auto* cb = corpus_of(b);
        return ca == cb || ca->files == cb->files;
    }
    return true;
}

const Terrain<double>* terrain_of(const World& world) {
    if (const auto* p = std::get_if<std::shared_ptr<const Terrain<double>>>(&world)) return p->get();
    return nullptr;
}

Eigen::Vector2d workspace_to_unit(const Vec3& position) {
    const Eigen::Vector2d unit = (position.head<2>().array() + 1.0) / 2.0;
    return unit.cwiseMax(0.0).cwiseMin(1.0);
}

double force_for_level(const SceneConfig& config, double level) {
    return config.force_min + level * (config.force_max - config.force_min);
}

ForceCommand haptic_tick(const SceneConfig& config, const DeviceState& state, const World& world) {
    switch (config.scene) {
        case SceneKind::Constant:
            // The grip button switches haptics off while the loop records.
            if (state.button_pressed) return {};
            return z_force(config, config.constant_force);
        case SceneKind::Nodes: {
            const auto* nodes = nodes_of(world);
            if (!nodes) return {};
            const auto hit = query(nodes->field, workspace_to_unit(state.position));
            return z_force(config, force_for_level(config, hit.resistance));
        }
        case SceneKind::Terrain: {
            const auto* terrain = terrain_of(world);
            if (!terrain) return {};
            const double v = sample(*terrain, workspace_to_unit(state.position), config.sampling);
            return z_force(config, force_for_level(config, v));
        }
    }
    return {};
}

ControlFrame control_frame(const SceneConfig& config, const DeviceState& state, const ForceCommand& last_force,
                           const World& world, double timestamp) {
    ControlFrame frame;
    frame.scene = config.scene;
    frame.timestamp = timestamp;
    frame.grain.rng_seed = config.seed;

    const Vec3 p = state.position.cwiseMax(-1.0).cwiseMin(1.0);
    const Eigen::Vector2d unit = workspace_to_unit(p);
    const double depth = (p.z() + 1.0) / 2.0;

    switch (config.scene) {
        case SceneKind::Constant: {
            const auto* corpus = corpus_of(world);
            const int files = corpus ? static_cast<int>(corpus->files.size()) : 0;
            frame.grain.start_position = depth;
            frame.grain.density = config.constant.grain_density;
            frame.grain.duration = config.constant.grain_duration;
            frame.grain.gain = 1.0;
            frame.corpus_index = files > 0 ? std::min(files - 1, static_cast<int>(unit.x() * files)) : 0;
            frame.playback_speed = 0.25 * std::pow(16.0, unit.y());
            frame.envelope_gain = config.constant.envelope.eval(unit.x());
            frame.record = state.button_pressed;
            break;
        }
        case SceneKind::Nodes: {
            frame.grain.start_position = depth;
            frame.grain.duration = config.nodes.grain_duration;
            if (const auto* nodes = nodes_of(world)) {
                const auto hit = query(nodes->field, unit);
                frame.resistance = hit.resistance;
                if (hit.node_id) {
                    frame.active_node = hit.node_id;
                    const auto& node = *std::find_if(nodes->field.nodes.begin(), nodes->field.nodes.end(),
                                                     [&](const Node& n) { return n.id == *hit.node_id; });
                    frame.active_segment = node.segment_id;
                }
            }
            frame.grain.density = config.density.lerp(frame.resistance);
            frame.grain.gain = frame.active_node ? 1.0 : 0.0;
            break;
        }
        case SceneKind::Terrain: {
            const auto* terrain = terrain_of(world);
            const double v = terrain ? sample(*terrain, unit, config.sampling) : 0.0;
            frame.terrain_value = v;
            frame.comb_delay_ms = config.comb_delay_ms.lerp(unit.x());
            frame.comb_feedforward = unit.y() * 0.95;
            frame.grain.gain = std::clamp(v, 0.0, 1.0);
            frame.grain.density = config.terrain_audio.grain_density;
            frame.grain.duration = config.terrain_audio.grain_duration;
            frame.grain.start_position = config.terrain_audio.grain_position;
            const double push = std::max(0.0, -state.user_force.z()) / config.force_max;
            const double f_norm = std::abs(last_force.force.z()) / config.force_max;
            frame.gate_openness = std::clamp(push * f_norm, 0.0, 1.0);
            break;
        }
    }
    return frame;
}

// ---------------------------------------------------------------------------

Voice::Voice(const SceneConfig& config, World world)
    : config_(config),
      world_(std::move(world)),
      comb_(static_cast<std::size_t>(std::llround(config.sample_rate))),
      loop_(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(
                                         config.sample_rate * (config.scene == SceneKind::Terrain
                                                                   ? config.terrain_audio.loop_seconds
                                                                   : config.constant.loop_seconds))))),
      granulator_(config.sample_rate, config.seed),
      gate_(config.sample_rate),
      scratch_(config.block_size) {
    if (config_.scene == SceneKind::Terrain) {
        // Fill the grain source once with the centre-of-workspace timbre.
        const ControlFrame neutral = control_frame(config_, DeviceState{}, ForceCommand{}, world_);
        std::vector<double> block(config_.block_size);
        while (loop_.filled() < loop_.capacity()) {
            run_source(neutral, block);
            loop_.write(block);
        }
    } else if (config_.scene == SceneKind::Constant) {
        const auto* corpus = corpus_of(world_);
        if (corpus && !corpus->files.empty() && !corpus->files.front().empty()) {
            const auto& first = corpus->files.front();
            std::vector<double> fill(loop_.capacity());
            for (std::size_t i = 0; i < fill.size(); ++i) fill[i] = first[i % first.size()];
            loop_.write(fill);
        }
    }
}

void Voice::run_source(const ControlFrame& frame, std::span<double> out) {
    phasors_.process(config_.terrain_audio.phasor1_hz, config_.terrain_audio.phasor2_hz, config_.sample_rate, out);
    const double delay = std::max(1.0, frame.comb_delay_ms * config_.sample_rate / 1000.0);
    comb_.process(out, out, delay, frame.comb_feedforward, config_.terrain_audio.comb_feedback);
}

void Voice::render(const ControlFrame& frame, std::span<double> out) {
    if (scratch_.size() < out.size()) scratch_.resize(out.size());
    switch (config_.scene) {
        case SceneKind::Constant: render_constant(frame, out); break;
        case SceneKind::Nodes: render_nodes(frame, out); break;
        case SceneKind::Terrain: render_terrain(frame, out); break;
    }
    for (auto& s : out) s *= config_.master_gain;
}

void Voice::render_constant(const ControlFrame& frame, std::span<double> out) {
    const auto* corpus = corpus_of(world_);
    const std::span<double> played(scratch_.data(), out.size());
    std::fill(played.begin(), played.end(), 0.0);
    if (corpus && !corpus->files.empty()) {
        const auto& file = corpus->files[static_cast<std::size_t>(frame.corpus_index) % corpus->files.size()];
        if (!file.empty()) {
            const double length = static_cast<double>(file.size());
            play_position_ = std::fmod(play_position_, length);
            for (auto& s : played) {
                const auto k = static_cast<std::size_t>(play_position_);
                const double t = play_position_ - static_cast<double>(k);
                s = file[k] + t * (file[(k + 1) % file.size()] - file[k]);
                play_position_ += frame.playback_speed;
                if (play_position_ >= length) play_position_ -= length;
            }
        }
    }

    loop_.set_recording(frame.record);
    if (frame.record) {
        loop_.write(played);
        std::copy(played.begin(), played.end(), out.begin());
    } else {
        granulator_.process(loop_.samples(), frame.grain, out, loop_.oldest());
    }
    for (auto& s : out) s *= frame.envelope_gain;
    gate_.process(out, out, frame.gate_openness, config_.gate_max_threshold);
}

void Voice::render_nodes(const ControlFrame& frame, std::span<double> out) {
    const auto* nodes = nodes_of(world_);
    if (!nodes || nodes->audio.empty()) {
        std::fill(out.begin(), out.end(), 0.0);
        return;
    }
    std::span<const double> source(nodes->audio);
    if (frame.active_segment) {
        const auto seg = std::find_if(nodes->segments.begin(), nodes->segments.end(),
                                      [&](const Segment& s) { return s.id == *frame.active_segment; });
        if (seg != nodes->segments.end() && seg->end_sample <= source.size())
            source = source.subspan(seg->start_sample, seg->length());
    }
    granulator_.process(source, frame.grain, out);
    gate_.process(out, out, frame.gate_openness, config_.gate_max_threshold);
}

void Voice::render_terrain(const ControlFrame& frame, std::span<double> out) {
    const std::span<double> source(scratch_.data(), out.size());
    run_source(frame, source);
    loop_.write(source);
    granulator_.process(loop_.samples(), frame.grain, out, loop_.oldest());
    gate_.process(out, out, frame.gate_openness, config_.gate_max_threshold);
}

// ---------------------------------------------------------------------------

SceneEngine::SceneEngine(SceneConfig config, World world) {
    config.validate();
    if (!world_matches(config.scene, world))
        throw std::invalid_argument("world does not match scene " + std::string(to_string(config.scene)));
    auto voice = std::make_shared<Voice>(config, world);
    published_ = std::make_shared<const SceneSnapshot>(SceneSnapshot{std::move(config), std::move(world), voice});
}

void SceneEngine::set_scene(SceneConfig config, World world) {
    config.validate();
    if (!world_matches(config.scene, world))
        throw std::invalid_argument("world does not match scene " + std::string(to_string(config.scene)));
    const auto active = snapshot();
    if (config.sample_rate != active->config.sample_rate || config.block_size != active->config.block_size ||
        config.tick_rate != active->config.tick_rate)
        throw std::invalid_argument("a scene change cannot alter sample rate, block size or tick rate");
    if (active->config == config && world_equal(active->world, world)) return;
    auto voice = std::make_shared<Voice>(config, world);
    auto next = std::make_shared<const SceneSnapshot>(SceneSnapshot{std::move(config), std::move(world), voice});
    std::atomic_store_explicit(&published_, std::move(next), std::memory_order_release);
}

std::shared_ptr<const SceneSnapshot> SceneEngine::snapshot() const {
    return std::atomic_load_explicit(&published_, std::memory_order_acquire);
}

ForceCommand SceneEngine::haptic_tick(const DeviceState& state) const {
    const auto snap = snapshot();
    return xmt::haptic_tick(snap->config, state, snap->world);
}

ControlFrame SceneEngine::render_block(const DeviceState& state, const ForceCommand& last_force, double timestamp,
                                       std::span<double> out) {
    auto latest = snapshot();
    if (latest != current_) {
        if (current_) {
            if (fading_) retired_grains_ += fading_->voice->grain_count();
            fading_ = std::move(current_);
            fade_position_ = 0;
            fade_length_ = std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.010 * latest->config.sample_rate)));
            ++swaps_;
        }
        current_ = std::move(latest);
    }

    const ControlFrame frame = control_frame(current_->config, state, last_force, current_->world, timestamp);
    current_->voice->render(frame, out);

    if (fading_) {
        if (fade_buffer_.size() < out.size()) fade_buffer_.resize(out.size());
        const std::span<double> old(fade_buffer_.data(), out.size());
        const ControlFrame old_frame = control_frame(fading_->config, state, last_force, fading_->world, timestamp);
        fading_->voice->render(old_frame, old);
        for (std::size_t n = 0; n < out.size(); ++n) {
            const double g = std::min(1.0, static_cast<double>(fade_position_ + n + 1) / static_cast<double>(fade_length_));
            out[n] = g * out[n] + (1.0 - g) * old[n];
        }
        fade_position_ += out.size();
        if (fade_position_ >= fade_length_) {
            retired_grains_ += fading_->voice->grain_count();
            fading_.reset();
        }
    }
    return frame;
}

std::uint64_t SceneEngine::grain_count() const {
    std::uint64_t total = retired_grains_;
    if (current_) total += current_->voice->grain_count();
    if (fading_) total += fading_->voice->grain_count();
    return total;
}

}  // namespace xmt
