#include "xmt/config.hpp"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <stdexcept>

#include "xmt/rng.hpp"
#include "xmt/wav.hpp"

namespace xmt {

namespace {

using nlohmann::json;

json range_json(const Range& r) { return {r.lo, r.hi}; }

Range range_from(const json& j, const Range& fallback) {
    if (j.is_null()) return fallback;
    if (!j.is_array() || j.size() != 2) throw std::invalid_argument("a range must be a two-element array");
    return {j[0].get<double>(), j[1].get<double>()};
}

template <typename T>
void read(const json& obj, const char* key, T& into) {
    if (obj.is_object() && obj.contains(key)) into = obj.at(key).get<T>();
}

std::vector<double> load_audio(const std::filesystem::path& base, const std::string& path, double rate) {
    const auto full = std::filesystem::path(path).is_absolute() ? std::filesystem::path(path) : base / path;
    const auto audio = read_wav(full.string());
    return resample_linear(audio.samples, audio.sample_rate, rate);
}

std::filesystem::path resolve(const std::filesystem::path& base, const std::string& path) {
    return std::filesystem::path(path).is_absolute() ? std::filesystem::path(path) : base / path;
}

}  // namespace

json scene_config_to_json(const SceneConfig& c) {
    json envelope = json::array();
    for (const auto& [t, g] : c.constant.envelope.breakpoints) envelope.push_back({t, g});
    json terrain = json::parse(basis_spec_json(c.terrain));
    return {
        {"scene", to_string(c.scene)},
        {"force", {{"min", c.force_min}, {"max", c.force_max}, {"constant", c.constant_force}}},
        {"comb_delay_ms", range_json(c.comb_delay_ms)},
        {"gate_max_threshold", c.gate_max_threshold},
        {"density", range_json(c.density)},
        {"sampling", to_string(c.sampling)},
        {"terrain", terrain},
        {"constant",
         {{"corpus", c.constant.corpus},
          {"loop_seconds", c.constant.loop_seconds},
          {"grain_density", c.constant.grain_density},
          {"grain_duration", c.constant.grain_duration},
          {"envelope", envelope}}},
        {"nodes",
         {{"audio", c.nodes.audio},
          {"field", c.nodes.field},
          {"segments", c.nodes.segments},
          {"onset_threshold", c.nodes.onset_threshold},
          {"onset_window", c.nodes.onset_window},
          {"layout_seed", c.nodes.layout_seed},
          {"profile", c.nodes.profile == BumpProfile::Cosine ? "COSINE" : "LINEAR"},
          {"grain_duration", c.nodes.grain_duration}}},
        {"terrain_audio",
         {{"phasor_hz", {c.terrain_audio.phasor1_hz, c.terrain_audio.phasor2_hz}},
          {"comb_feedback", c.terrain_audio.comb_feedback},
          {"grain_density", c.terrain_audio.grain_density},
          {"grain_duration", c.terrain_audio.grain_duration},
          {"grain_position", c.terrain_audio.grain_position},
          {"loop_seconds", c.terrain_audio.loop_seconds}}},
        {"audio",
         {{"sample_rate", c.sample_rate},
          {"block_size", c.block_size},
          {"master_gain", c.master_gain},
          {"seed", c.seed}}},
        {"tick_rate", c.tick_rate},
    };
}

SceneConfig scene_config_from_json(const json& j, const SceneConfig& defaults) {
    if (!j.is_object()) throw std::invalid_argument("scene configuration must be a JSON object");
    SceneConfig c = defaults;
    try {
        if (j.contains("scene")) c.scene = parse_scene_kind(j.at("scene").get<std::string>());
        if (j.contains("force")) {
            const auto& f = j.at("force");
            read(f, "min", c.force_min);
            read(f, "max", c.force_max);
            read(f, "constant", c.constant_force);
        }
        c.comb_delay_ms = range_from(j.value("comb_delay_ms", json()), c.comb_delay_ms);
        read(j, "gate_max_threshold", c.gate_max_threshold);
        c.density = range_from(j.value("density", json()), c.density);
        if (j.contains("sampling")) c.sampling = parse_sampling(j.at("sampling").get<std::string>());
        if (j.contains("terrain")) {
            json merged = json::parse(basis_spec_json(c.terrain));
            merged.merge_patch(j.at("terrain"));
            c.terrain = basis_spec_from_json(merged.dump());
        }
        if (j.contains("constant")) {
            const auto& k = j.at("constant");
            read(k, "corpus", c.constant.corpus);
            read(k, "loop_seconds", c.constant.loop_seconds);
            read(k, "grain_density", c.constant.grain_density);
            read(k, "grain_duration", c.constant.grain_duration);
            if (k.contains("envelope")) {
                c.constant.envelope.breakpoints.clear();
                for (const auto& bp : k.at("envelope"))
                    c.constant.envelope.breakpoints.emplace_back(bp.at(0).get<double>(), bp.at(1).get<double>());
            }
        }
        if (j.contains("nodes")) {
            const auto& n = j.at("nodes");
            read(n, "audio", c.nodes.audio);
            read(n, "field", c.nodes.field);
            read(n, "segments", c.nodes.segments);
            read(n, "onset_threshold", c.nodes.onset_threshold);
            read(n, "onset_window", c.nodes.onset_window);
            read(n, "layout_seed", c.nodes.layout_seed);
            read(n, "grain_duration", c.nodes.grain_duration);
            if (n.contains("profile")) {
                const auto p = n.at("profile").get<std::string>();
                if (p == "COSINE") c.nodes.profile = BumpProfile::Cosine;
                else if (p == "LINEAR") c.nodes.profile = BumpProfile::Linear;
                else throw std::invalid_argument("unknown bump profile: " + p);
            }
        }
        if (j.contains("terrain_audio")) {
            const auto& t = j.at("terrain_audio");
            if (t.contains("phasor_hz")) {
                const auto& hz = t.at("phasor_hz");
                c.terrain_audio.phasor1_hz = hz.at(0).get<double>();
                c.terrain_audio.phasor2_hz = hz.at(1).get<double>();
            }
            read(t, "comb_feedback", c.terrain_audio.comb_feedback);
            read(t, "grain_density", c.terrain_audio.grain_density);
            read(t, "grain_duration", c.terrain_audio.grain_duration);
            read(t, "grain_position", c.terrain_audio.grain_position);
            read(t, "loop_seconds", c.terrain_audio.loop_seconds);
        }
        if (j.contains("audio")) {
            const auto& a = j.at("audio");
            read(a, "sample_rate", c.sample_rate);
            read(a, "block_size", c.block_size);
            read(a, "master_gain", c.master_gain);
            read(a, "seed", c.seed);
        }
        read(j, "tick_rate", c.tick_rate);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("malformed scene configuration: ") + e.what());
    }
    c.validate();
    return c;
}

json config_to_json(const Config& config) {
    json j = scene_config_to_json(config.scene);
    j["sim"] = {{"mass", config.sim.mass},
                {"damping", config.sim.damping},
                {"workspace_half_extent", config.sim.workspace_half_extent},
                {"coupling_stiffness", config.sim.coupling_stiffness}};
    return j;
}

Config parse_config(std::string_view text, const std::filesystem::path& base_dir) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::exception& e) {
        throw std::invalid_argument(std::string("config is not valid JSON: ") + e.what());
    }
    Config config;
    config.base_dir = base_dir;
    config.scene = scene_config_from_json(j);
    if (j.contains("sim")) {
        const auto& s = j.at("sim");
        read(s, "mass", config.sim.mass);
        read(s, "damping", config.sim.damping);
        read(s, "workspace_half_extent", config.sim.workspace_half_extent);
        read(s, "coupling_stiffness", config.sim.coupling_stiffness);
    }
    config.sim.tick_rate = config.scene.tick_rate;
    config.sim.validate();
    return config;
}

Config load_config(const std::string& path) {
    return parse_config(read_file(path), std::filesystem::path(path).parent_path());
}

std::string config_hash(const Config& config) {
    const auto text = config_to_json(config).dump();
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char ch : text) {
        h ^= ch;
        h *= 0x100000001B3ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

World build_world(const SceneConfig& config, const std::filesystem::path& base_dir) {
    config.validate();
    const double rate = config.sample_rate;
    switch (config.scene) {
        case SceneKind::Terrain:
            return std::make_shared<const Terrain<double>>(generate_terrain<double>(config.terrain));
        case SceneKind::Constant: {
            auto corpus = std::make_shared<CorpusWorld>();
            for (const auto& path : config.constant.corpus) corpus->files.push_back(load_audio(base_dir, path, rate));
            if (corpus->files.empty()) corpus->files = synthetic_corpus(rate, config.seed);
            return std::shared_ptr<const CorpusWorld>(std::move(corpus));
        }
        case SceneKind::Nodes: {
            auto world = std::make_shared<NodeWorld>();
            const auto& n = config.nodes;
            world->audio = n.audio.empty() ? synthetic_percussion(rate, 6.0, config.seed) : load_audio(base_dir, n.audio, rate);
            if (world->audio.empty()) throw std::invalid_argument("node scene audio is empty");
            world->segments = n.segments.empty()
                                  ? detect_onsets(world->audio, rate, n.onset_threshold, n.onset_window)
                                  : segments_from_json(read_file(resolve(base_dir, n.segments).string()));
            world->field = n.field.empty() ? build_field(world->segments, n.layout_seed)
                                           : node_field_from_json(read_file(resolve(base_dir, n.field).string()));
            world->field.profile = n.profile;
            for (const auto& node : world->field.nodes) {
                const bool known = std::any_of(world->segments.begin(), world->segments.end(),
                                               [&](const Segment& s) { return s.id == node.segment_id; });
                if (!known) throw std::invalid_argument("node " + std::to_string(node.id) + " names an unknown segment");
            }
            for (const auto& s : world->segments)
                if (s.end_sample > world->audio.size()) throw std::invalid_argument("segment extends past the audio");
            return std::shared_ptr<const NodeWorld>(std::move(world));
        }
    }
    return {};
}

std::vector<std::vector<double>> synthetic_corpus(double sample_rate, std::uint64_t seed) {
    const auto length = static_cast<std::size_t>(2.0 * sample_rate);
    const double tau = 2.0 * std::numbers::pi;
    std::vector<std::vector<double>> files(3, std::vector<double>(length));
    Rng rng(seed ^ 0xC0FFEEULL);
    for (std::size_t n = 0; n < length; ++n) {
        const double t = static_cast<double>(n) / sample_rate;
        // Harmonic drone with slow beating.
        files[0][n] = 0.3 * std::sin(tau * 110.0 * t) + 0.2 * std::sin(tau * 220.7 * t) + 0.1 * std::sin(tau * 331.0 * t);
        // Filtered noise swell.
        const double prev = n > 0 ? files[1][n - 1] : 0.0;
        files[1][n] = 0.97 * prev + 0.03 * rng.uniform(-1.0, 1.0) * 6.0 * std::sin(std::numbers::pi * t / 2.0);
        // Falling chirp.
        const double f = 880.0 * std::exp(-t);
        files[2][n] = 0.5 * std::sin(tau * f * t);
    }
    return files;
}

std::vector<double> synthetic_percussion(double sample_rate, double seconds, std::uint64_t seed) {
    const auto length = static_cast<std::size_t>(seconds * sample_rate);
    std::vector<double> out(length, 0.0);
    Rng rng(seed ^ 0xBEA75ULL);
    double t = 0.05;
    while (t < seconds) {
        const auto start = static_cast<std::size_t>(t * sample_rate);
        const double pitch = rng.uniform(80.0, 600.0);
        const double decay = rng.uniform(0.05, 0.3);
        for (std::size_t n = start; n < length; ++n) {
            const double dt = static_cast<double>(n - start) / sample_rate;
            if (dt > 5.0 * decay) break;
            const double env = std::exp(-dt / decay);
            out[n] += 0.6 * env * (0.6 * std::sin(2.0 * std::numbers::pi * pitch * dt) + 0.4 * rng.uniform(-1.0, 1.0));
        }
        t += rng.uniform(0.25, 0.7);
    }
    return out;
}

}  // namespace xmt
