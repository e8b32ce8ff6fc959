#include <atomic>
#include <csignal>
#include <cstdio>
#include <iostream>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "xmt/config.hpp"
#include "xmt/node_field.hpp"
#include "xmt/render.hpp"
#include "xmt/session.hpp"
#include "xmt/terrain.hpp"
#include "xmt/wav.hpp"

namespace {

std::atomic<bool> g_interrupted{false};

void on_signal(int) { g_interrupted = true; }

std::pair<int, int> parse_size(const std::string& text) {
    int w = 0;
    int h = 0;
    char x = 0;
    std::istringstream in(text);
    if (!(in >> w >> x >> h) || (x != 'x' && x != 'X') || !in.eof())
        throw std::invalid_argument("size must look like WxH, got '" + text + "'");
    return {w, h};
}

int run_gen(const std::string& basis, std::uint64_t seed, double zoom, const std::string& size,
            const std::string& metric, const std::string& out) {
    xmt::BasisSpec spec;
    spec.kind = xmt::parse_basis(basis);
    spec.seed = seed;
    spec.zoom = zoom;
    spec.metric = xmt::parse_metric(metric);
    std::tie(spec.width, spec.height) = parse_size(size);
    const auto terrain = xmt::generate_terrain<double>(spec);
    xmt::write_terrain_files(terrain, out);
    return 0;
}

int run_segment(const std::string& in, double threshold, std::size_t window, const std::string& out,
                const std::string& field_out, std::uint64_t seed) {
    const auto audio = xmt::read_wav(in);
    const auto segments = xmt::detect_onsets(audio.samples, audio.sample_rate, threshold, window);
    xmt::write_file_atomic(out, xmt::segments_json(segments, audio.sample_rate) + "\n");
    if (!field_out.empty()) xmt::write_file_atomic(field_out, xmt::node_field_json(xmt::build_field(segments, seed)) + "\n");
    std::cout << segments.size() << " segments\n";
    return 0;
}

int run_simulate(const std::string& config_path, const std::string& out, double duration, const std::string& audio_out) {
    const auto config = xmt::load_config(config_path);
    xmt::LiveSession session(config, xmt::build_world(config.scene, config.base_dir), {}, !audio_out.empty());
    const auto ticks = static_cast<std::uint64_t>(duration * config.scene.tick_rate);
    for (std::uint64_t i = 0; i < ticks; ++i) {
        session.submit(xmt::tour_input(static_cast<double>(i) / config.scene.tick_rate));
        session.tick();
    }
    session.finish();
    xmt::write_file_atomic(out, xmt::traversal_jsonl(session.record()));
    if (!audio_out.empty())
        xmt::write_file_atomic(audio_out, xmt::encode_wav24(session.audio(), static_cast<int>(config.scene.sample_rate)));
    return 0;
}

int run_serve(const std::string& config_path, const xmt::ServeOptions& options) {
    const auto config = xmt::load_config(config_path);
    xmt::SessionServer server(config, xmt::build_world(config.scene, config.base_dir), options);
    const int port = server.start();
    std::cerr << "serving on http://" << options.host << ":" << port << "\n";
    std::signal(SIGINT, on_signal);
    std::signal(SIGTERM, on_signal);
    while (!g_interrupted && !server.wait_for(std::chrono::milliseconds(100))) {
    }
    server.stop();
    std::cerr << "stopped after " << server.ticks() << " ticks, " << server.malformed_inputs()
              << " malformed inputs ignored\n";
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cross-modal terrain engine: haptic terrains, force mapping and sound"};
    app.require_subcommand(1);

    std::string basis = "WORLEY_F1";
    std::uint64_t gen_seed = 0;
    double zoom = 8.0;
    std::string size = "256x256";
    std::string metric = "EUCLIDEAN";
    std::string gen_out;
    auto* gen = app.add_subcommand("gen", "Generate a terrain image (PGM) and its JSON sidecar");
    gen->add_option("--basis", basis, "WORLEY_F1, WORLEY_F2, WORLEY_F2_MINUS_F1 or VALUE_NOISE");
    gen->add_option("--seed", gen_seed, "Feature-point seed");
    gen->add_option("--zoom", zoom, "Feature cells across the image width");
    gen->add_option("--size", size, "Image size as WxH");
    gen->add_option("--metric", metric, "EUCLIDEAN, MANHATTAN or CHEBYSHEV");
    gen->add_option("--out", gen_out, "Output .pgm path")->required();

    xmt::RenderJob job;
    std::uint64_t seed_override = 0;
    std::uint64_t terrain_seed_override = 0;
    auto* render = app.add_subcommand("render", "Render a recorded traversal offline to 24-bit WAV");
    render->add_option("--config", job.config_path, "Scene configuration JSON")->required();
    render->add_option("--traversal", job.traversal_path, "Traversal record (JSON lines)")->required();
    render->add_option("--out", job.output_path, "Output WAV path")->required();
    auto* seed_opt = render->add_option("--seed", seed_override, "Override the engine seed");
    auto* tseed_opt = render->add_option("--terrain-seed", terrain_seed_override, "Override the terrain seed");

    std::string serve_config;
    xmt::ServeOptions serve_options;
    bool use_device = false;
    auto* serve = app.add_subcommand("serve", "Run a live session for the navigator UI");
    serve->add_option("--config", serve_config, "Scene configuration JSON")->required();
    serve->add_option("--port", serve_options.port, "TCP port (0 picks one)");
    serve->add_option("--host", serve_options.host, "Bind address");
    auto* sim_flag = serve->add_flag("--sim", "Use the simulated device (default)");
    serve->add_flag("--device", use_device, "Use a hardware device")->excludes(sim_flag);
    serve->add_option("--record", serve_options.record_path, "Write the traversal record here on exit");
    serve->add_option("--audio", serve_options.audio_path, "Write the session audio here on exit");
    serve->add_option("--duration", serve_options.duration, "Stop after this many seconds");

    std::string seg_in;
    double threshold = 0.3;
    std::size_t window = 1024;
    std::string seg_out;
    std::string field_out;
    std::uint64_t field_seed = 7;
    auto* segment = app.add_subcommand("segment", "Split a WAV file at energy onsets");
    segment->add_option("--in", seg_in, "Input WAV")->required();
    segment->add_option("--threshold", threshold, "Onset threshold relative to peak energy, (0, 1]");
    segment->add_option("--window", window, "Analysis window in samples");
    segment->add_option("--out", seg_out, "Segment table JSON")->required();
    segment->add_option("--field", field_out, "Also write a node field JSON");
    segment->add_option("--seed", field_seed, "Node layout seed");

    std::string sim_config;
    std::string sim_out;
    std::string sim_audio;
    double sim_duration = 30.0;
    auto* simulate = app.add_subcommand("simulate", "Record a scripted simulated performance");
    simulate->add_option("--config", sim_config, "Scene configuration JSON")->required();
    simulate->add_option("--out", sim_out, "Traversal record path")->required();
    simulate->add_option("--duration", sim_duration, "Seconds");
    simulate->add_option("--audio", sim_audio, "Also write the live audio");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e);
    }

    try {
        if (*gen) return run_gen(basis, gen_seed, zoom, size, metric, gen_out);
        if (*render) {
            if (*seed_opt) job.seed = seed_override;
            if (*tseed_opt) job.terrain_seed = terrain_seed_override;
            std::cout << xmt::render_traversal(job).json() << "\n";
            return 0;
        }
        if (*serve) {
            if (use_device) throw std::runtime_error("no hardware device driver is available in this build; use --sim");
            return run_serve(serve_config, serve_options);
        }
        if (*segment) return run_segment(seg_in, threshold, window, seg_out, field_out, field_seed);
        if (*simulate) return run_simulate(sim_config, sim_out, sim_duration, sim_audio);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 1;
    }
    return 1;
}
