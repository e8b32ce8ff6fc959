#include "xmt/node_field.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>
#include <stdexcept>

#include <nlohmann/json.hpp>

#include "xmt/rng.hpp"

namespace xmt {

void NodeField::validate() const {
    std::set<int> ids;
    for (const auto& n : nodes) {
        if (!ids.insert(n.id).second) throw std::invalid_argument("duplicate node id " + std::to_string(n.id));
        if (!(n.radius > 0.0) || n.radius > 0.5)
            throw std::invalid_argument("node radius must lie in (0, 0.5]");
        if (!(n.center.array() >= 0.0).all() || !(n.center.array() <= 1.0).all())
            throw std::invalid_argument("node center must lie in the unit square");
    }
}

std::vector<Segment> detect_onsets(std::span<const double> audio, double sample_rate, double threshold,
                                   std::size_t window) {
    if (audio.empty()) throw std::invalid_argument("onset detection needs audio");
    if (window < 64) throw std::invalid_argument("onset window must be at least 64 samples");
    if (!(threshold > 0.0 && threshold <= 1.0)) throw std::invalid_argument("onset threshold must lie in (0, 1]");
    (void)sample_rate;

    const std::size_t n = audio.size();
    const std::size_t hop = window / 2;
    std::vector<double> energy;
    for (std::size_t start = 0; start < n; start += hop) {
        const std::size_t end = std::min(n, start + window);
        double sum = 0.0;
        for (std::size_t k = start; k < end; ++k) sum += audio[k] * audio[k];
        energy.push_back(std::sqrt(sum / static_cast<double>(window)));
    }

    const double peak = *std::max_element(energy.begin(), energy.end());
    std::vector<std::size_t> onsets;
    if (peak > 0.0) {
        const double level = threshold * peak;
        for (std::size_t k = 0; k < energy.size(); ++k) {
            const double prev = k == 0 ? 0.0 : energy[k - 1];
            if (prev < level && energy[k] >= level) {
                // The newest hop to enter window k is what pushed it over.
                onsets.push_back(k == 0 ? 0 : std::min(n - 1, k * hop + (window - hop)));
            }
        }
    }
    if (onsets.empty()) onsets.push_back(0);

    std::vector<Segment> segments;
    for (std::size_t i = 0; i < onsets.size(); ++i) {
        // Material before the first onset belongs to the first segment.
        const std::size_t start = i == 0 ? 0 : onsets[i];
        const std::size_t end = i + 1 < onsets.size() ? onsets[i + 1] : n;
        if (end <= start) continue;
        segments.push_back({static_cast<int>(segments.size()), start, end, onsets[i]});
    }
    // Keep tiling if a duplicate boundary was dropped.
    for (std::size_t i = 0; i + 1 < segments.size(); ++i) segments[i].end_sample = segments[i + 1].start_sample;
    segments.back().end_sample = n;
    return segments;
}

NodeField build_field(std::span<const Segment> segments, std::uint64_t seed) {
    if (segments.empty()) throw std::invalid_argument("a node field needs at least one segment");
    Rng rng(seed);
    NodeField field;
    field.nodes.reserve(segments.size());
    for (std::size_t i = 0; i < segments.size(); ++i) {
        Node node;
        node.id = static_cast<int>(i);
        node.center.x() = rng.uniform(0.1, 0.9);
        node.center.y() = rng.uniform(0.1, 0.9);
        node.radius = rng.uniform(0.05, 0.2);
        node.segment_id = segments[i].id;
        field.nodes.push_back(node);
    }
    return field;
}

double bump(BumpProfile profile, double distance, double radius) {
    const double u = std::clamp(distance / radius, 0.0, 1.0);
    if (profile == BumpProfile::Cosine) return 0.5 * (1.0 + std::cos(std::numbers::pi * u));
    return 1.0 - u;
}

NodeHit query(const NodeField& field, const Eigen::Vector2d& cursor) {
    NodeHit hit;
    const Node* best = nullptr;
    double best_distance = 0.0;
    for (const auto& node : field.nodes) {
        const double d = (cursor - node.center).norm();
        if (d > node.radius) continue;
        if (!best || d < best_distance || (d == best_distance && node.id < best->id)) {
            best = &node;
            best_distance = d;
        }
    }
    if (best) {
        hit.node_id = best->id;
        hit.resistance = bump(field.profile, best_distance, best->radius);
    }
    return hit;
}

std::string node_field_json(const NodeField& field) {
    nlohmann::json nodes = nlohmann::json::array();
    for (const auto& n : field.nodes)
        nodes.push_back({{"id", n.id},
                         {"center", {n.center.x(), n.center.y()}},
                         {"radius", n.radius},
                         {"segment_id", n.segment_id}});
    const nlohmann::json j = {{"profile", field.profile == BumpProfile::Cosine ? "COSINE" : "LINEAR"},
                              {"nodes", nodes}};
    return j.dump(2);
}

NodeField node_field_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    NodeField field;
    const auto profile = j.value("profile", std::string("LINEAR"));
    if (profile == "COSINE") field.profile = BumpProfile::Cosine;
    else if (profile != "LINEAR") throw std::invalid_argument("unknown bump profile: " + profile);
    for (const auto& n : j.at("nodes")) {
        Node node;
        node.id = n.at("id").get<int>();
        const auto& c = n.at("center");
        node.center = {c.at(0).get<double>(), c.at(1).get<double>()};
        node.radius = n.at("radius").get<double>();
        node.segment_id = n.value("segment_id", node.id);
        field.nodes.push_back(node);
    }
    field.validate();
    return field;
}

std::string segments_json(std::span<const Segment> segments, double sample_rate) {
    nlohmann::json list = nlohmann::json::array();
    for (const auto& s : segments)
        list.push_back({{"id", s.id},
                        {"start_sample", s.start_sample},
                        {"end_sample", s.end_sample},
                        {"onset_sample", s.onset_sample}});
    const nlohmann::json j = {{"sample_rate", sample_rate}, {"segments", list}};
    return j.dump(2);
}

std::vector<Segment> segments_from_json(const std::string& text) {
    const auto j = nlohmann::json::parse(text);
    std::vector<Segment> out;
    for (const auto& s : j.at("segments")) {
        Segment seg{s.at("id").get<int>(), s.at("start_sample").get<std::size_t>(),
                    s.at("end_sample").get<std::size_t>(), 0};
        seg.onset_sample = s.value("onset_sample", seg.start_sample);
        if (seg.end_sample <= seg.start_sample) throw std::invalid_argument("segment must have start < end");
        if (!out.empty() && seg.start_sample < out.back().end_sample)
            throw std::invalid_argument("segments must be ordered and non-overlapping");
        out.push_back(seg);
    }
    return out;
}

}  // namespace xmt
