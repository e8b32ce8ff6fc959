#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <Eigen/Core>

#include "xmt/dsp.hpp"
#include "xmt/node_field.hpp"
#include "xmt/terrain.hpp"

namespace xmt {

using Vec3 = Eigen::Vector3d;

enum class SceneKind { Constant, Nodes, Terrain };

std::string_view to_string(SceneKind kind);
SceneKind parse_scene_kind(std::string_view name);

/// Grip state in the normalized workspace [-1, 1]^3. +z points toward the
/// performer, so pushing forward produces a negative z user force.
struct DeviceState {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
    Vec3 user_force = Vec3::Zero();  // Newtons
    bool button_pressed = false;
};

struct ForceCommand {
    Vec3 force = Vec3::Zero();  // Newtons, each axis within [-F_max, F_max]
};

struct Range {
    double lo = 0.0;
    double hi = 1.0;

    double lerp(double t) const { return lo + t * (hi - lo); }
    bool operator==(const Range&) const = default;
};

/// CONSTANT scene: corpus playback recorded into a loop, then granulated.
struct ConstantSettings {
    std::vector<std::string> corpus;  // WAV paths; empty selects the built-in corpus
    double loop_seconds = 4.0;
    double grain_density = 30.0;
    double grain_duration = 0.08;
    Envelope envelope{{{0.0, 0.2}, {0.5, 1.0}, {1.0, 0.2}}};

    bool operator==(const ConstantSettings&) const = default;
};

/// NODES scene: segments of one source file bound to circular nodes.
struct NodesSettings {
    std::string audio;          // WAV path; empty selects a built-in percussive source
    std::string field;          // optional node field JSON; generated from segments otherwise
    std::string segments;       // optional segment table JSON; detected from audio otherwise
    double onset_threshold = 0.3;
    std::size_t onset_window = 1024;
    std::uint64_t layout_seed = 7;
    BumpProfile profile = BumpProfile::Linear;
    double grain_duration = 0.06;

    bool operator==(const NodesSettings&) const = default;
};

/// TERRAIN scene: phasor pair -> comb -> granulator -> gate.
struct TerrainAudioSettings {
    double phasor1_hz = 110.0;
    double phasor2_hz = 164.81;
    double comb_feedback = 0.0;
    double grain_density = 60.0;
    double grain_duration = 0.05;
    double grain_position = 0.5;
    double loop_seconds = 0.5;

    bool operator==(const TerrainAudioSettings&) const = default;
};

struct SceneConfig {
    SceneKind scene = SceneKind::Terrain;
    double force_min = 0.0;  // Newtons
    double force_max = 9.0;
    double constant_force = 3.0;
    Range comb_delay_ms{1.0, 50.0};
    double gate_max_threshold = 1.0;  // full scale
    Range density{0.0, 100.0};  // grains per second
    Sampling sampling = Sampling::NearestCell;
    BasisSpec terrain;
    ConstantSettings constant;
    NodesSettings nodes;
    TerrainAudioSettings terrain_audio;
    double sample_rate = kDefaultSampleRate;
    std::size_t block_size = kDefaultBlockSize;
    double tick_rate = 1000.0;
    double master_gain = 0.5;
    std::uint64_t seed = 1;

    void validate() const;
    bool operator==(const SceneConfig&) const = default;
};

/// Source audio and layout for the NODES scene.
struct NodeWorld {
    NodeField field;
    std::vector<Segment> segments;
    std::vector<double> audio;
};

/// Playable files for the CONSTANT scene.
struct CorpusWorld {
    std::vector<std::vector<double>> files;
};

using World = std::variant<std::monostate, std::shared_ptr<const Terrain<double>>, std::shared_ptr<const NodeWorld>,
                           std::shared_ptr<const CorpusWorld>>;

bool world_matches(SceneKind kind, const World& world);
bool world_equal(const World& a, const World& b);
const Terrain<double>* terrain_of(const World& world);

/// Every DSP control value for one audio block.
struct ControlFrame {
    SceneKind scene = SceneKind::Terrain;
    double timestamp = 0.0;
    GrainParams grain;
    double comb_delay_ms = 1.0;
    double comb_feedforward = 0.0;
    double gate_openness = 1.0;
    double envelope_gain = 1.0;
    int corpus_index = 0;
    double playback_speed = 1.0;
    bool record = false;
    std::optional<int> active_node;
    std::optional<int> active_segment;
    double terrain_value = 0.0;
    double resistance = 0.0;
};

/// ((x + 1) / 2, (y + 1) / 2), clamped to the unit square.
Eigen::Vector2d workspace_to_unit(const Vec3& position);

/// F_min + level (F_max - F_min).
double force_for_level(const SceneConfig& config, double level);

/// Feedback force for one haptic tick. Pure in (config, state, world).
ForceCommand haptic_tick(const SceneConfig& config, const DeviceState& state, const World& world);

/// DSP controls derived from the grip and the most recent feedback force.
ControlFrame control_frame(const SceneConfig& config, const DeviceState& state, const ForceCommand& last_force,
                           const World& world, double timestamp = 0.0);

/// The audio chain of one scene. Single owner: the audio context.
class Voice {
public:
    Voice(const SceneConfig& config, World world);

    void render(const ControlFrame& frame, std::span<double> out);
    std::uint64_t grain_count() const { return granulator_.grain_count(); }

private:
    void render_constant(const ControlFrame& frame, std::span<double> out);
    void render_nodes(const ControlFrame& frame, std::span<double> out);
    void render_terrain(const ControlFrame& frame, std::span<double> out);
    void run_source(const ControlFrame& frame, std::span<double> out);

    SceneConfig config_;
    World world_;
    PhasorPair<double> phasors_;
    Comb<double> comb_;
    LoopBuffer<double> loop_;
    Granulator<double> granulator_;
    NoiseGate<double> gate_;
    double play_position_ = 0.0;
    std::vector<double> scratch_;
};

/// Scene state shared by the haptic and audio contexts. Replaced as a whole.
struct SceneSnapshot {
    SceneConfig config;
    World world;
    std::shared_ptr<Voice> voice;
};

/// Holds the active scene and mixes scene changes with a 10 ms crossfade.
/// haptic_tick may run on one thread and render_block on another while
/// set_scene is called from a third.
class SceneEngine {
public:
    SceneEngine(SceneConfig config, World world);

    /// Publishes a new scene. Throws if the world does not suit the scene,
    /// leaving the previous scene active. Identical scenes are ignored.
    void set_scene(SceneConfig config, World world);

    std::shared_ptr<const SceneSnapshot> snapshot() const;
    ForceCommand haptic_tick(const DeviceState& state) const;

    /// Renders one block (any length) and returns the frame that drove it.
    ControlFrame render_block(const DeviceState& state, const ForceCommand& last_force, double timestamp,
                              std::span<double> out);

    std::uint64_t grain_count() const;
    std::uint64_t swaps() const { return swaps_; }

private:
    std::shared_ptr<const SceneSnapshot> published_;
    std::shared_ptr<const SceneSnapshot> current_;
    std::shared_ptr<const SceneSnapshot> fading_;
    std::size_t fade_position_ = 0;
    std::size_t fade_length_ = 0;
    std::uint64_t retired_grains_ = 0;
    std::uint64_t swaps_ = 0;
    std::vector<double> fade_buffer_;
};

}  // namespace xmt
