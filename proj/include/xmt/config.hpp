#pragma once

#include <filesystem>
#include <string>
#include <string_view>

#include <nlohmann/json.hpp>

#include "xmt/device_sim.hpp"
#include "xmt/scene.hpp"

namespace xmt {

/// A scene configuration document plus the directory its relative paths
/// resolve against.
struct Config {
    SceneConfig scene;
    SimConfig sim;
    std::filesystem::path base_dir = ".";
};

nlohmann::json scene_config_to_json(const SceneConfig& config);
/// Fields absent from `j` keep the values in `defaults`.
SceneConfig scene_config_from_json(const nlohmann::json& j, const SceneConfig& defaults = {});

nlohmann::json config_to_json(const Config& config);
Config parse_config(std::string_view text, const std::filesystem::path& base_dir = ".");
Config load_config(const std::string& path);

/// FNV-1a of the canonical JSON form, as 16 hex digits.
std::string config_hash(const Config& config);

/// Loads or synthesizes everything the scene needs.
World build_world(const SceneConfig& config, const std::filesystem::path& base_dir = ".");

/// Deterministic stand-ins used when a config names no audio files.
std::vector<std::vector<double>> synthetic_corpus(double sample_rate, std::uint64_t seed);
std::vector<double> synthetic_percussion(double sample_rate, double seconds, std::uint64_t seed);

}  // namespace xmt
