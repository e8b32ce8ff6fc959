#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "xmt/device_sim.hpp"
#include "xmt/scene.hpp"

namespace xmt {

/// Drives a SceneEngine from a tick-rate stream of (state, force) pairs.
/// Audio block k is rendered from the latest tick at or before its first
/// sample, so a live session and a replay of its record produce the same
/// blocks.
class Performance {
public:
    using BlockSink = std::function<void(std::span<const double>, const ControlFrame&)>;

    explicit Performance(SceneEngine& engine, BlockSink sink = {}, bool capture = true);

    void push_tick(const DeviceState& state, const ForceCommand& force);
    /// Renders the blocks that cover the ticks pushed so far and trims the
    /// captured audio to ticks * rate / tick_rate samples.
    void finish();

    std::uint64_t ticks() const { return ticks_; }
    std::uint64_t blocks() const { return next_block_; }
    std::size_t target_samples() const;
    const std::vector<double>& audio() const { return audio_; }
    const ControlFrame& last_frame() const { return last_frame_; }
    double sample_rate() const { return rate_; }

private:
    void render_next();

    SceneEngine& engine_;
    BlockSink sink_;
    bool capture_;
    double rate_;
    double tick_rate_;
    std::size_t block_size_;
    std::uint64_t ticks_ = 0;
    std::uint64_t next_block_ = 0;
    DeviceState held_state_;
    ForceCommand held_force_;
    ControlFrame last_frame_;
    std::vector<double> block_;
    std::vector<double> audio_;
};

struct ReplayResult {
    std::vector<double> audio;
    std::vector<ForceCommand> forces;  // recomputed by the engine per tick
    std::uint64_t grain_count = 0;
};

/// Feeds logged positions and forces through the engine at the original
/// rates. Throws if the record's tick rate differs from the engine's.
ReplayResult replay(const TraversalRecord& record, SceneEngine& engine);

struct RenderSummary {
    double duration = 0.0;
    double rms = 0.0;
    double peak = 0.0;
    std::uint64_t grain_count = 0;

    std::string json() const;
};

/// Statistics of the audio as it will be stored (24-bit quantized).
RenderSummary summarize(std::span<const double> audio, double sample_rate, std::uint64_t grain_count);

struct RenderJob {
    std::string config_path;
    std::string traversal_path;
    std::string output_path;
    std::optional<std::uint64_t> seed;          // engine RNG
    std::optional<std::uint64_t> terrain_seed;  // basis seed

    void validate() const;
};

/// Offline render to a 24-bit WAV. On failure nothing is written.
RenderSummary render_traversal(const RenderJob& job);

}  // namespace xmt
