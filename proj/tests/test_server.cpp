#include <doctest.h>

#include <chrono>
#include <cmath>
#include <filesystem>
#include <thread>

#include "xmt/session.hpp"
#include "xmt/wav.hpp"

#include <nlohmann/json.hpp>

// After Eigen: httplib pulls in <resolv.h>, whose _res macro collides with Eigen identifiers.
#include <httplib.h>

using namespace xmt;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

Config small_terrain() { return parse_config(R"({"scene":"TERRAIN","terrain":{"width":64,"height":64}})"); }

struct Running {
    SessionServer server;
    int port;
    explicit Running(const Config& cfg, ServeOptions opts = {})
        : server(cfg, build_world(cfg.scene), with_any_port(std::move(opts))), port(server.start()) {}
    static ServeOptions with_any_port(ServeOptions o) {
        o.port = 0;
        return o;
    }
    httplib::Client client() const {
        httplib::Client c("127.0.0.1", port);
        c.set_read_timeout(10, 0);
        return c;
    }
};

// Reads the session stream until `enough` says stop or ten seconds pass.
std::vector<Frame> read_session(httplib::Client& c, const std::function<bool(const std::vector<Frame>&)>& enough) {
    std::vector<Frame> frames;
    std::string buffer;
    const auto deadline = std::chrono::steady_clock::now() + std::chrono::seconds(10);
    c.Get("/session", [&](const char* data, std::size_t n) {
        buffer.append(data, n);
        while (auto f = decode_frame(buffer)) frames.push_back(std::move(*f));
        return !enough(frames) && std::chrono::steady_clock::now() < deadline;
    });
    return frames;
}

}  // namespace

TEST_CASE("terrain image and config endpoints") {
    const Config cfg = small_terrain();
    Running r(cfg);
    auto c = r.client();

    auto pgm = c.Get("/terrain.pgm");
    REQUIRE(pgm);
    CHECK(pgm->status == 200);
    CHECK(pgm->body == export_pgm(generate_terrain<double>(cfg.scene.terrain)));
    CHECK(pgm->body.rfind("P5\n64 64\n255\n", 0) == 0);

    auto conf = c.Get("/config");
    REQUIRE(conf);
    CHECK(conf->status == 200);
    CHECK(scene_config_from_json(json::parse(conf->body)) == cfg.scene);
}

TEST_CASE("scene changes are validated before they apply") {
    const Config cfg = small_terrain();
    Running r(cfg);
    auto c = r.client();
    const auto before = c.Get("/terrain.pgm")->body;

    auto bad = c.Post("/scene", R"({"scene":"VOLCANO"})", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    bad = c.Post("/scene", R"({"force":{"min":8,"max":2}})", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    bad = c.Post("/scene", "not json", "application/json");
    REQUIRE(bad);
    CHECK(bad->status == 400);
    CHECK(scene_config_from_json(json::parse(c.Get("/config")->body)) == cfg.scene);
    CHECK(c.Get("/terrain.pgm")->body == before);

    auto ok = c.Post("/scene", R"({"terrain":{"seed":777}})", "application/json");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    const auto active = scene_config_from_json(json::parse(c.Get("/config")->body));
    CHECK(active.terrain.seed == 777);
    CHECK(active.terrain.width == 64);
    const auto after = c.Get("/terrain.pgm")->body;
    CHECK(after != before);
    SceneConfig expect = cfg.scene;
    expect.terrain.seed = 777;
    CHECK(after == export_pgm(generate_terrain<double>(expect.terrain)));

    ok = c.Post("/scene", R"({"scene":"CONSTANT"})", "application/json");
    REQUIRE(ok);
    CHECK(ok->status == 200);
    CHECK(c.Get("/terrain.pgm")->status == 404);
}

TEST_CASE("malformed pointer input is counted and answered with 400") {
    Running r(small_terrain());
    auto c = r.client();
    auto res = c.Post("/input", R"({"x":0.1,"y":0.2,"push":0.3})", "application/json");
    REQUIRE(res);
    CHECK(res->status == 200);
    for (const char* body : {"{", R"({"y":0})", R"({"x":"a","y":0})"}) {
        res = c.Post("/input", body, "application/json");
        REQUIRE(res);
        CHECK(res->status == 400);
    }
    CHECK(r.server.malformed_inputs() == 3);
    CHECK(json::parse(res->body).at("malformed_inputs") == 3);
}

TEST_CASE("the session stream opens with Hello and follows the pointer") {
    Running r(small_terrain());
    auto c = r.client();
    c.Post("/input", R"({"x":0.4,"y":-0.3,"push":0})", "application/json");

    // Stream until a StateUpdate arrives more than a second of session time in.
    const auto frames = read_session(c, [](const std::vector<Frame>& fs) {
        if (fs.empty() || fs.back().kind != Frame::Kind::Json) return false;
        const auto j = json::parse(fs.back().payload);
        return j.at("type") == "StateUpdate" && j.at("t").get<double>() > 2.0;
    });
    REQUIRE(frames.size() > 2);
    const auto hello = json::parse(frames.front().payload);
    CHECK(frames.front().kind == Frame::Kind::Json);
    CHECK(hello.at("type") == "Hello");
    CHECK(hello.at("audio").at("channels") == 2);

    std::size_t audio_frames = 0;
    std::uint64_t last = 0;
    bool increasing = true;
    for (const auto& f : frames) {
        increasing &= f.seq > last;
        last = f.seq;
        if (f.kind == Frame::Kind::Audio) {
            ++audio_frames;
            CHECK(f.payload.size() % 4 == 0);
        }
    }
    CHECK(increasing);
    CHECK(audio_frames > 0);
    const auto update = json::parse(frames.back().payload);
    CHECK(update.at("pos")[0].get<double>() == doctest::Approx(0.4).epsilon(0.05));
    CHECK(update.at("pos")[1].get<double>() == doctest::Approx(-0.3).epsilon(0.05));
}

TEST_CASE("stopping writes the record and the audio") {
    const auto dir = fs::temp_directory_path() / "xmt_server_out";
    fs::remove_all(dir);
    fs::create_directories(dir);
    const Config cfg = small_terrain();
    ServeOptions opts;
    opts.record_path = (dir / "session.jsonl").string();
    opts.audio_path = (dir / "session.wav").string();
    opts.duration = 0.5;
    {
        Running r(cfg, opts);
        r.server.wait();
        CHECK(r.server.ticks() == 500);
    }
    const auto record = parse_traversal(read_file(opts.record_path));
    CHECK(record.samples.size() == 500);
    const auto audio = read_wav(opts.audio_path);
    CHECK(audio.samples.size() == 24000);

    SceneEngine engine(cfg.scene, build_world(cfg.scene));
    const auto again = replay(record, engine);
    CHECK(encode_wav24(again.audio, 48000) == read_file(opts.audio_path));
    fs::remove_all(dir);
}
