#include "xmt/render.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "xmt/config.hpp"
#include "xmt/wav.hpp"

namespace xmt {

Performance::Performance(SceneEngine& engine, BlockSink sink, bool capture)
    : engine_(engine), sink_(std::move(sink)), capture_(capture) {
    const auto snap = engine_.snapshot();
    rate_ = snap->config.sample_rate;
    tick_rate_ = snap->config.tick_rate;
    block_size_ = snap->config.block_size;
    block_.resize(block_size_);
}

std::size_t Performance::target_samples() const {
    return static_cast<std::size_t>(std::floor(static_cast<double>(ticks_) * rate_ / tick_rate_));
}

void Performance::render_next() {
    const double start = static_cast<double>(next_block_ * block_size_);
    last_frame_ = engine_.render_block(held_state_, held_force_, start / rate_, block_);
    if (capture_) audio_.insert(audio_.end(), block_.begin(), block_.end());
    if (sink_) sink_(block_, last_frame_);
    ++next_block_;
}

void Performance::push_tick(const DeviceState& state, const ForceCommand& force) {
    // Blocks starting strictly before this tick belong to the previous one.
    const double tick_time_scaled = static_cast<double>(ticks_) * rate_;
    while (ticks_ > 0 && static_cast<double>(next_block_ * block_size_) * tick_rate_ < tick_time_scaled)
        render_next();
    held_state_ = state;
    held_force_ = force;
    ++ticks_;
}

void Performance::finish() {
    const std::size_t total = target_samples();
    while (next_block_ * block_size_ < total) render_next();
    if (capture_ && audio_.size() > total) audio_.resize(total);
}

ReplayResult replay(const TraversalRecord& record, SceneEngine& engine) {
    record.validate();
    const auto snap = engine.snapshot();
    if (record.tick_rate != snap->config.tick_rate)
        throw std::invalid_argument("traversal tick rate " + std::to_string(record.tick_rate) +
                                    " Hz does not match engine tick rate " + std::to_string(snap->config.tick_rate) + " Hz");
    ReplayResult result;
    result.forces.reserve(record.samples.size());
    Performance performance(engine);
    for (const auto& sample : record.samples) {
        const DeviceState state = state_from_sample(sample);
        result.forces.push_back(engine.haptic_tick(state));
        performance.push_tick(state, ForceCommand{sample.feedback_force});
    }
    performance.finish();
    result.audio = performance.audio();
    result.grain_count = engine.grain_count();
    return result;
}

std::string RenderSummary::json() const {
    return nlohmann::json{{"duration", duration}, {"rms", rms}, {"peak", peak}, {"grain_count", grain_count}}.dump();
}

RenderSummary summarize(std::span<const double> audio, double sample_rate, std::uint64_t grain_count) {
    RenderSummary s;
    s.duration = static_cast<double>(audio.size()) / sample_rate;
    s.grain_count = grain_count;
    double sum = 0.0;
    for (double x : audio) {
        const double q = static_cast<double>(std::lround(std::clamp(x, -1.0, 1.0) * 8388607.0)) / 8388607.0;
        sum += q * q;
        s.peak = std::max(s.peak, std::abs(q));
    }
    s.rms = audio.empty() ? 0.0 : std::sqrt(sum / static_cast<double>(audio.size()));
    return s;
}

void RenderJob::validate() const {
    namespace fs = std::filesystem;
    if (config_path.empty() || traversal_path.empty() || output_path.empty())
        throw std::invalid_argument("render job needs config, traversal and output paths");
    const auto same = [](const std::string& a, const std::string& b) {
        std::error_code ec;
        return a == b || fs::equivalent(a, b, ec);
    };
    if (same(config_path, traversal_path) || same(config_path, output_path) || same(traversal_path, output_path))
        throw std::invalid_argument("render job paths must be distinct");
    if (!fs::exists(config_path)) throw std::invalid_argument("config not found: " + config_path);
    if (!fs::exists(traversal_path)) throw std::invalid_argument("traversal not found: " + traversal_path);
}

RenderSummary render_traversal(const RenderJob& job) {
    job.validate();
    Config config = load_config(job.config_path);
    if (job.seed) config.scene.seed = *job.seed;
    if (job.terrain_seed) config.scene.terrain.seed = *job.terrain_seed;
    const TraversalRecord record = read_traversal(job.traversal_path);

    SceneEngine engine(config.scene, build_world(config.scene, config.base_dir));
    const auto result = replay(record, engine);
    const auto rate = static_cast<int>(config.scene.sample_rate);
    write_file_atomic(job.output_path, encode_wav24(result.audio, rate));
    return summarize(result.audio, config.scene.sample_rate, result.grain_count);
}

}  // namespace xmt
