#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "xmt/config.hpp"
#include "xmt/device_sim.hpp"
#include "xmt/render.hpp"

using namespace xmt;

namespace {

ForceCommand force(double x, double y, double z) {
    ForceCommand f;
    f.force = Vec3(x, y, z);
    return f;
}

}  // namespace

TEST_CASE("at rest with no forces nothing moves") {
    DeviceSim sim({}, Vec3(0.2, -0.3, 0.4));
    for (int k = 0; k < 1000; ++k) sim.step(SimInput::script(Vec3::Zero()), {});
    CHECK(sim.state().position == Vec3(0.2, -0.3, 0.4));
    CHECK(sim.state().velocity.isZero(0.0));
}

TEST_CASE("one semi-implicit Euler step from rest") {
    SimConfig cfg;
    cfg.damping = 0.0;
    DeviceSim sim(cfg);
    const Vec3 u(1.0, -2.0, 0.5);
    const double dt = 1.0 / cfg.tick_rate;
    const auto& s = sim.step(SimInput::script(u), {}, dt);
    const Vec3 v = u / cfg.mass * dt;
    CHECK((s.velocity - v).norm() == doctest::Approx(0.0).epsilon(1e-18));
    CHECK((s.position - v * dt).norm() == doctest::Approx(0.0).epsilon(1e-18));
    CHECK(s.user_force == u);
}

TEST_CASE("opposing feedback brings a pushed grip to rest") {
    DeviceSim sim;
    const Vec3 push(0, 0, -6.0);
    for (int k = 0; k < 5000; ++k) sim.step(SimInput::script(push), force(0, 0, 6.0));
    CHECK(sim.state().velocity.norm() < 1e-3);
}

TEST_CASE("pointer mode derives a spring force") {
    SimConfig cfg;
    DeviceSim sim(cfg);
    const Vec3 target(0.5, 0.0, -0.25);
    const auto& s = sim.step(SimInput::pointer(target), {});
    CHECK((s.user_force - cfg.coupling_stiffness * target).norm() < 1e-12);
}

TEST_CASE("non-finite input is refused and the state kept") {
    DeviceSim sim({}, Vec3(0.1, 0.1, 0.1));
    sim.step(SimInput::script(Vec3(1, 0, 0)), {});
    const DeviceState before = sim.state();
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const double inf = std::numeric_limits<double>::infinity();
    CHECK_THROWS_AS(sim.step(SimInput::script(Vec3(nan, 0, 0)), {}), std::invalid_argument);
    CHECK_THROWS_AS(sim.step(SimInput::pointer(Vec3(0, inf, 0)), {}), std::invalid_argument);
    CHECK_THROWS_AS(sim.step(SimInput::script(Vec3::Zero()), force(0, 0, nan)), std::invalid_argument);
    CHECK_THROWS_AS(sim.step(SimInput::script(Vec3::Zero()), {}, 0.0), std::invalid_argument);
    CHECK(sim.state().position == before.position);
    CHECK(sim.state().velocity == before.velocity);
}

TEST_CASE("the grip never leaves the workspace and stops at the wall") {
    DeviceSim sim;
    for (int k = 0; k < 3000; ++k) {
        const auto& s = sim.step(SimInput::script(Vec3(9, -9, 9)), {});
        REQUIRE(s.position.cwiseAbs().maxCoeff() <= 1.0);
    }
    CHECK(sim.state().position == Vec3(1, -1, 1));
    CHECK(sim.state().velocity.isZero(0.0));
}

TEST_CASE("bounded inputs keep kinetic energy bounded over a million steps") {
    SimConfig cfg;
    DeviceSim sim(cfg);
    std::mt19937_64 gen(99);
    std::uniform_real_distribution<double> u(-9.0, 9.0);
    // Terminal speed per axis is (|u| + |f|) / damping.
    const double vmax = (9.0 + 9.0) / cfg.damping;
    const double bound = 0.5 * cfg.mass * 3.0 * vmax * vmax;
    double worst = 0.0;
    Vec3 drive = Vec3::Zero();
    for (int k = 0; k < 1000000; ++k) {
        if (k % 250 == 0) drive = Vec3(u(gen), u(gen), u(gen));
        const auto& s = sim.step(SimInput::script(drive), force(u(gen), u(gen), u(gen)));
        worst = std::max(worst, 0.5 * cfg.mass * s.velocity.squaredNorm());
        if (s.position.cwiseAbs().maxCoeff() > 1.0) FAIL("left the workspace");
    }
    CHECK(worst <= bound);
}

TEST_CASE("pointer mode settles within two seconds under bounded feedback") {
    SimConfig cfg;
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 50; ++trial) {
        const Vec3 f = 9.0 * Vec3(u(gen), u(gen), u(gen)) / std::sqrt(3.0);
        // Keep the spring equilibrium inside the workspace.
        const Vec3 target = 0.8 * Vec3(u(gen), u(gen), u(gen));
        const Vec3 eq = target + f / cfg.coupling_stiffness;
        REQUIRE(eq.cwiseAbs().maxCoeff() < 1.0);
        DeviceSim sim(cfg, Vec3(u(gen), u(gen), u(gen)));
        for (int k = 0; k < 2000; ++k) sim.step(SimInput::pointer(target), force(f.x(), f.y(), f.z()));
        REQUIRE((sim.state().position - eq).norm() < 1e-3);
    }
}

TEST_CASE("pointer mode settles over a terrain force field") {
    Config cfg = parse_config(R"({"scene":"TERRAIN","terrain":{"width":128,"height":128}})");
    const World world = build_world(cfg.scene);
    std::mt19937_64 gen(4);
    std::uniform_real_distribution<double> u(-0.8, 0.8);
    for (int trial = 0; trial < 20; ++trial) {
        // z target low enough that target + F_max / k stays inside.
        const Vec3 target(u(gen), u(gen), -0.9);
        DeviceSim sim(cfg.sim, Vec3(u(gen), u(gen), u(gen)));
        ForceCommand fb;
        for (int k = 0; k < 2000; ++k) fb = haptic_tick(cfg.scene, sim.step(SimInput::pointer(target), fb), world);
        const Vec3 eq = target + fb.force / cfg.sim.coupling_stiffness;
        REQUIRE((sim.state().position - eq).norm() < 1e-3);
    }
}

TEST_CASE("sim config validation") {
    SimConfig c;
    CHECK_NOTHROW(c.validate());
    c.mass = 0;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.damping = -1;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
    c = {};
    c.tick_rate = 50;
    CHECK_THROWS_AS(c.validate(), std::invalid_argument);
}

TEST_CASE("traversal records round-trip through JSON lines exactly") {
    TraversalRecord rec;
    rec.tick_rate = 1000;
    rec.config_hash = "00ff00ff00ff00ff";
    DeviceSim sim;
    std::mt19937_64 gen(1);
    std::uniform_real_distribution<double> u(-3, 3);
    for (int k = 0; k < 500; ++k) {
        const auto& s = sim.step(SimInput::script(Vec3(u(gen), u(gen), u(gen)), k % 7 == 0), force(0, 0, u(gen)));
        rec.log(s, force(0, 0, 1.0 / 3.0 * k));
    }
    const auto text = traversal_jsonl(rec);
    const auto back = parse_traversal(text);
    CHECK(back.tick_rate == rec.tick_rate);
    CHECK(back.config_hash == rec.config_hash);
    REQUIRE(back.samples.size() == rec.samples.size());
    for (std::size_t i = 0; i < rec.samples.size(); ++i) REQUIRE(back.samples[i] == rec.samples[i]);
    CHECK(traversal_jsonl(back) == text);
    CHECK(rec.duration() == doctest::Approx(0.5));
}

TEST_CASE("malformed traversals are rejected") {
    CHECK_THROWS(parse_traversal(""));
    CHECK_THROWS(parse_traversal("{\"tick_rate\":1000}\n{\"t\":0.0,\"pos\":[0,0],\"uf\":[0,0,0],\"ff\":[0,0,0]}\n"));
    CHECK_THROWS(parse_traversal("{\"tick_rate\":1000}\nnot json\n"));
    // Timestamps must advance by exactly one tick.
    CHECK_THROWS(parse_traversal("{\"tick_rate\":1000}\n"
                                 "{\"t\":0.0,\"pos\":[0,0,0],\"uf\":[0,0,0],\"ff\":[0,0,0]}\n"
                                 "{\"t\":0.002,\"pos\":[0,0,0],\"uf\":[0,0,0],\"ff\":[0,0,0]}\n"));
    CHECK_NOTHROW(parse_traversal("{\"tick_rate\":1000}\n"
                                  "{\"t\":0.0,\"pos\":[0,0,0],\"uf\":[0,0,0],\"ff\":[0,0,0]}\n"
                                  "{\"t\":0.001,\"pos\":[0,0,0],\"uf\":[0,0,0],\"ff\":[0,0,0]}\n"));
}

TEST_CASE("replay: empty, repeated and mismatched") {
    Config cfg = parse_config(R"({"scene":"TERRAIN","terrain":{"width":64,"height":64}})");
    const World world = build_world(cfg.scene);

    TraversalRecord empty;
    empty.tick_rate = cfg.scene.tick_rate;
    SceneEngine e0(cfg.scene, world);
    CHECK(replay(empty, e0).audio.empty());

    TraversalRecord rec;
    rec.tick_rate = cfg.scene.tick_rate;
    DeviceSim sim(cfg.sim);
    ForceCommand fb;
    for (int k = 0; k < 3000; ++k) {
        const double t = k / 1000.0;
        const auto& s = sim.step(SimInput::planar(0.7 * std::sin(t), 0.7 * std::cos(1.3 * t), -6.0), fb);
        fb = haptic_tick(cfg.scene, s, world);
        rec.log(s, fb);
    }
    SceneEngine e1(cfg.scene, world);
    SceneEngine e2(cfg.scene, world);
    const auto a = replay(rec, e1);
    const auto b = replay(rec, e2);
    CHECK(a.audio == b.audio);
    CHECK(a.audio.size() == 3 * 48000);
    CHECK(a.grain_count == b.grain_count);
    REQUIRE(a.forces.size() == rec.samples.size());
    for (std::size_t i = 0; i < a.forces.size(); ++i) REQUIRE(a.forces[i].force == rec.samples[i].feedback_force);

    rec.tick_rate = 500;
    for (std::size_t i = 0; i < rec.samples.size(); ++i) rec.samples[i].t = static_cast<double>(i) / 500.0;
    SceneEngine e3(cfg.scene, world);
    CHECK_THROWS_AS(replay(rec, e3), std::invalid_argument);
}
