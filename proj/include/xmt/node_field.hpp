#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace xmt {

/// A slice [start_sample, end_sample) of the source audio. `onset_sample`
/// is where the detector placed the onset; it differs from the start only
/// for a first segment that absorbed leading material.
struct Segment {
    int id = 0;
    std::size_t start_sample = 0;
    std::size_t end_sample = 0;
    std::size_t onset_sample = 0;

    std::size_t length() const { return end_sample - start_sample; }
    bool operator==(const Segment&) const = default;
};

struct Node {
    int id = 0;
    Eigen::Vector2d center{0.5, 0.5};
    double radius = 0.1;
    int segment_id = 0;

    bool operator==(const Node&) const = default;
};

/// Shape of the resistance bump inside a node.
enum class BumpProfile {
    Linear,  // 1 - d/r
    Cosine,  // 0.5 (1 + cos(pi d/r))
};

struct NodeField {
    std::vector<Node> nodes;
    BumpProfile profile = BumpProfile::Linear;

    bool empty() const { return nodes.empty(); }
    void validate() const;
    bool operator==(const NodeField&) const = default;
};

struct NodeHit {
    std::optional<int> node_id;
    double resistance = 0.0;  // 1 at the center, 0 on the circumference or outside
};

/// Energy-threshold segmentation. Short-time RMS is computed on windows
/// advancing by window/2; an onset is a rise from below threshold * peak to
/// at or above it. Segments tile the whole file and at least one is returned.
std::vector<Segment> detect_onsets(std::span<const double> audio, double sample_rate, double threshold,
                                   std::size_t window = 1024);

/// One node per segment with seeded centers in [0.1, 0.9]^2 and radii in
/// [0.05, 0.2].
NodeField build_field(std::span<const Segment> segments, std::uint64_t seed);

/// Among nodes containing the cursor, the one with the nearest center
/// (lowest id on ties).
NodeHit query(const NodeField& field, const Eigen::Vector2d& cursor);

double bump(BumpProfile profile, double distance, double radius);

std::string node_field_json(const NodeField& field);
NodeField node_field_from_json(const std::string& text);
std::string segments_json(std::span<const Segment> segments, double sample_rate);
std::vector<Segment> segments_from_json(const std::string& text);

}  // namespace xmt
