#pragma once

#include <array>
#include <string>
#include <string_view>
#include <vector>

#include "xmt/scene.hpp"

namespace xmt {

/// Point-mass stand-in for the haptic grip.
struct SimConfig {
    double mass = 0.19;                // kg
    double damping = 2.0;              // N s / unit
    double workspace_half_extent = 1.0;
    double tick_rate = 1000.0;         // Hz
    double coupling_stiffness = 60.0;  // N / unit, pointer-to-grip spring

    void validate() const;
    bool operator==(const SimConfig&) const = default;
};

/// Per-axis drive: a spring toward `target` on axes flagged in `spring`,
/// explicit `force` on the others.
struct SimInput {
    Vec3 target = Vec3::Zero();
    Vec3 force = Vec3::Zero();
    std::array<bool, 3> spring{false, false, false};
    bool button = false;

    static SimInput pointer(const Vec3& target, bool button = false) {
        return {target, Vec3::Zero(), {true, true, true}, button};
    }
    static SimInput script(const Vec3& force, bool button = false) {
        return {Vec3::Zero(), force, {false, false, false}, button};
    }
    /// Pointer in the x-y plane, explicit push along z.
    static SimInput planar(double x, double y, double z_force, bool button = false) {
        return {Vec3(x, y, 0.0), Vec3(0.0, 0.0, z_force), {true, true, false}, button};
    }
};

/// Semi-implicit Euler integration of m a = u + f - c v, with the position
/// clamped to the workspace and velocity zeroed on a clamped axis.
class DeviceSim {
public:
    explicit DeviceSim(SimConfig config = {}, const Vec3& start = Vec3::Zero());

    /// Throws std::invalid_argument on non-finite input, leaving the state as it was.
    const DeviceState& step(const SimInput& input, const ForceCommand& feedback, double dt);
    const DeviceState& step(const SimInput& input, const ForceCommand& feedback) {
        return step(input, feedback, 1.0 / config_.tick_rate);
    }

    const DeviceState& state() const { return state_; }
    const SimConfig& config() const { return config_; }
    void reset(const Vec3& position, const Vec3& velocity = Vec3::Zero());

private:
    SimConfig config_;
    DeviceState state_;
};

struct TraversalSample {
    double t = 0.0;
    Vec3 position = Vec3::Zero();
    Vec3 user_force = Vec3::Zero();
    Vec3 feedback_force = Vec3::Zero();
    bool button = false;

    bool operator==(const TraversalSample&) const = default;
};

/// Tick-rate log of a performance. Serialized as JSON lines: a header
/// {"tick_rate", "config_hash"} followed by {"t", "pos", "uf", "ff"} objects.
struct TraversalRecord {
    double tick_rate = 1000.0;
    std::string config_hash;
    std::vector<TraversalSample> samples;

    void validate() const;
    double duration() const { return static_cast<double>(samples.size()) / tick_rate; }
    void log(const DeviceState& state, const ForceCommand& feedback);
};

std::string traversal_jsonl(const TraversalRecord& record);
TraversalRecord parse_traversal(std::string_view text);
TraversalRecord read_traversal(const std::string& path);

DeviceState state_from_sample(const TraversalSample& sample);

}  // namespace xmt
