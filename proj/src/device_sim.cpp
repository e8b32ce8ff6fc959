#include "xmt/device_sim.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "xmt/wav.hpp"

namespace xmt {

void SimConfig::validate() const {
    if (!(mass > 0.0)) throw std::invalid_argument("sim mass must be positive");
    if (!(damping >= 0.0)) throw std::invalid_argument("sim damping must be non-negative");
    if (!(workspace_half_extent > 0.0)) throw std::invalid_argument("workspace extent must be positive");
    if (!(tick_rate >= 100.0)) throw std::invalid_argument("tick rate must be at least 100 Hz");
    if (!(coupling_stiffness >= 0.0)) throw std::invalid_argument("coupling stiffness must be non-negative");
}

DeviceSim::DeviceSim(SimConfig config, const Vec3& start) : config_(config) {
    config_.validate();
    reset(start);
}

void DeviceSim::reset(const Vec3& position, const Vec3& velocity) {
    const double h = config_.workspace_half_extent;
    state_ = DeviceState{};
    state_.position = position.cwiseMax(-h).cwiseMin(h);
    state_.velocity = velocity;
}

const DeviceState& DeviceSim::step(const SimInput& input, const ForceCommand& feedback, double dt) {
    if (!input.target.allFinite() || !input.force.allFinite() || !feedback.force.allFinite() ||
        !(dt > 0.0) || !std::isfinite(dt))
        throw std::invalid_argument("non-finite simulation input");

    Vec3 user = input.force;
    for (int axis = 0; axis < 3; ++axis)
        if (input.spring[static_cast<std::size_t>(axis)])
            user[axis] = config_.coupling_stiffness * (input.target[axis] - state_.position[axis]);

    Vec3 v = state_.velocity + (user + feedback.force - config_.damping * state_.velocity) / config_.mass * dt;
    Vec3 p = state_.position + v * dt;
    const double h = config_.workspace_half_extent;
    for (int axis = 0; axis < 3; ++axis) {
        if (p[axis] > h || p[axis] < -h) {
            p[axis] = std::clamp(p[axis], -h, h);
            v[axis] = 0.0;
        }
    }
    state_.position = p;
    state_.velocity = v;
    state_.user_force = user;
    state_.button_pressed = input.button;
    return state_;
}

void TraversalRecord::log(const DeviceState& state, const ForceCommand& feedback) {
    TraversalSample s;
    s.t = static_cast<double>(samples.size()) / tick_rate;
    s.position = state.position;
    s.user_force = state.user_force;
    s.feedback_force = feedback.force;
    s.button = state.button_pressed;
    samples.push_back(s);
}

void TraversalRecord::validate() const {
    if (!(tick_rate > 0.0)) throw std::invalid_argument("traversal tick rate must be positive");
    const double step = 1.0 / tick_rate;
    for (std::size_t i = 0; i < samples.size(); ++i) {
        const auto& s = samples[i];
        if (!std::isfinite(s.t) || !s.position.allFinite() || !s.user_force.allFinite() ||
            !s.feedback_force.allFinite())
            throw std::invalid_argument("traversal sample " + std::to_string(i) + " is not finite");
        if (i > 0 && !(s.t > samples[i - 1].t))
            throw std::invalid_argument("traversal times must strictly increase");
        if (std::abs(s.t - samples.front().t - static_cast<double>(i) * step) > 1e-6)
            throw std::invalid_argument("traversal sample " + std::to_string(i) + " is off the tick grid");
    }
}

namespace {

nlohmann::json vec(const Vec3& v) { return {v.x(), v.y(), v.z()}; }

Vec3 vec(const nlohmann::json& j) {
    if (!j.is_array() || j.size() != 3) throw std::invalid_argument("expected a 3-vector");
    return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
}

}  // namespace

std::string traversal_jsonl(const TraversalRecord& record) {
    std::string out = nlohmann::json{{"tick_rate", record.tick_rate}, {"config_hash", record.config_hash}}.dump();
    out += '\n';
    for (const auto& s : record.samples) {
        nlohmann::json j = {{"t", s.t}, {"pos", vec(s.position)}, {"uf", vec(s.user_force)}, {"ff", vec(s.feedback_force)}};
        if (s.button) j["btn"] = true;
        out += j.dump();
        out += '\n';
    }
    return out;
}

TraversalRecord parse_traversal(std::string_view text) {
    TraversalRecord record;
    std::istringstream in{std::string(text)};
    std::string line;
    std::size_t line_no = 0;
    bool have_header = false;
    while (std::getline(in, line)) {
        ++line_no;
        if (line.empty()) continue;
        try {
            const auto j = nlohmann::json::parse(line);
            if (!have_header) {
                record.tick_rate = j.at("tick_rate").get<double>();
                record.config_hash = j.value("config_hash", std::string());
                have_header = true;
                continue;
            }
            TraversalSample s;
            s.t = j.at("t").get<double>();
            s.position = vec(j.at("pos"));
            s.user_force = vec(j.at("uf"));
            s.feedback_force = vec(j.at("ff"));
            s.button = j.value("btn", false);
            record.samples.push_back(s);
        } catch (const nlohmann::json::exception& e) {
            throw std::invalid_argument("traversal line " + std::to_string(line_no) + ": " + e.what());
        }
    }
    if (!have_header) throw std::invalid_argument("traversal file has no header line");
    record.validate();
    return record;
}

TraversalRecord read_traversal(const std::string& path) { return parse_traversal(read_file(path)); }

DeviceState state_from_sample(const TraversalSample& sample) {
    DeviceState state;
    state.position = sample.position;
    state.user_force = sample.user_force;
    state.button_pressed = sample.button;
    return state;
}

}  // namespace xmt
