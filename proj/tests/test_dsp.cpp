#include <doctest.h>

#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "xmt/dsp.hpp"

using namespace xmt;

namespace {

std::vector<double> impulse(std::size_t n) {
    std::vector<double> x(n, 0.0);
    x[0] = 1.0;
    return x;
}

// Runs a processor over `x` in blocks of `block` samples.
template <typename F>
std::vector<double> blockwise(const std::vector<double>& x, std::size_t block, F&& f) {
    std::vector<double> y(x.size());
    for (std::size_t s = 0; s < x.size(); s += block) {
        const std::size_t n = std::min(block, x.size() - s);
        f(std::span<const double>(x.data() + s, n), std::span<double>(y.data() + s, n));
    }
    return y;
}

double rms(std::span<const double> x) {
    double acc = 0.0;
    for (double v : x) acc += v * v;
    return std::sqrt(acc / static_cast<double>(x.size()));
}

std::vector<double> sine(double freq, double amp, double rate, std::size_t n) {
    std::vector<double> x(n);
    for (std::size_t i = 0; i < n; ++i) x[i] = amp * std::sin(2.0 * std::numbers::pi * freq * static_cast<double>(i) / rate);
    return x;
}

}  // namespace

TEST_CASE("phasor ramps accumulate fractional phase") {
    double phase = 0.0;
    std::vector<double> out(4);
    PhasorPair<double>::ramp(phase, 1.0, 4.0, out);
    CHECK(out == std::vector<double>{0.0, 0.25, 0.5, 0.75});
    CHECK(phase == 0.0);
}

TEST_CASE("equal phasors average to one recentered phasor") {
    PhasorPair<double> pair;
    std::vector<double> mixed(1000);
    pair.process(110.0, 110.0, 48000.0, mixed);
    double phase = 0.0;
    std::vector<double> single(1000);
    PhasorPair<double>::ramp(phase, 110.0, 48000.0, single);
    for (std::size_t i = 0; i < mixed.size(); ++i) CHECK(mixed[i] == doctest::Approx(single[i] - 0.5).epsilon(1e-15));
}

TEST_CASE("zero frequency is a constant") {
    PhasorPair<double> pair(0.3, 0.1);
    std::vector<double> out(64);
    pair.process(0.0, 0.0, 48000.0, out);
    for (double v : out) CHECK(v == doctest::Approx(-0.3));
}

TEST_CASE("phasor output is bounded and continuous across blocks") {
    PhasorPair<double> whole;
    PhasorPair<double> split;
    std::vector<double> a(4096);
    std::vector<double> b(4096);
    whole.process(440.0, 24000.0, 48000.0, a);
    for (std::size_t s = 0; s < b.size(); s += 100)
        split.process(440.0, 24000.0, 48000.0, std::span<double>(b).subspan(s, std::min<std::size_t>(100, b.size() - s)));
    CHECK(a == b);
    for (double v : a) {
        REQUIRE(std::isfinite(v));
        REQUIRE(v >= -0.5);
        REQUIRE(v <= 0.5);
    }
    CHECK_THROWS_AS(whole.process(24001.0, 1.0, 48000.0, a), std::invalid_argument);
    CHECK_THROWS_AS(whole.process(-1.0, 1.0, 48000.0, a), std::invalid_argument);
}

TEST_CASE("comb feedforward impulse response") {
    Comb<double> comb(16);
    const auto x = impulse(12);
    std::vector<double> y(12);
    comb.process(x, y, 4.0, 0.5, 0.0);
    CHECK(y == std::vector<double>{1, 0, 0, 0, 0.5, 0, 0, 0, 0, 0, 0, 0});
}

TEST_CASE("comb with no taps is the identity") {
    std::mt19937_64 gen(3);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> x(5000);
    for (auto& v : x) v = u(gen);
    Comb<double> comb(480);
    const auto y = blockwise(x, 256, [&](auto in, auto out) { comb.process(in, out, 37.0, 0.0, 0.0); });
    CHECK(y == x);
}

TEST_CASE("comb impulse responses follow the closed form across blocks") {
    // h[kD] = 1 for k = 0, (a + b) b^(k-1) for k >= 1, zero elsewhere.
    for (const auto& [d, a, b] : {std::tuple{4, 0.0, 0.5}, std::tuple{4, 0.5, 0.0}, std::tuple{37, 0.3, 0.9},
                                  std::tuple{480, 0.7, 0.6}, std::tuple{1, 0.2, 0.95}}) {
        Comb<double> comb(48000);
        const auto x = impulse(48000);
        const auto y = blockwise(x, 256, [&](auto in, auto out) { comb.process(in, out, d, a, b); });
        for (std::size_t n = 0; n < y.size(); ++n) {
            double expected = 0.0;
            if (n % static_cast<std::size_t>(d) == 0) {
                const auto k = static_cast<int>(n / static_cast<std::size_t>(d));
                expected = k == 0 ? 1.0 : (a + b) * std::pow(b, k - 1);
            }
            REQUIRE(std::abs(y[n] - expected) <= 1e-12);
        }
    }
}

TEST_CASE("comb delay changes ramp over one block, then read exactly") {
    Comb<double> comb(64);
    std::vector<double> x(32, 0.0);
    std::vector<double> y(32);
    comb.process(x, y, 4.0, 0.5, 0.0);
    comb.process(x, y, 8.0, 0.5, 0.0);  // ramp block
    auto x2 = impulse(32);
    comb.process(x2, y, 8.0, 0.5, 0.0);
    CHECK(y[8] == 0.5);
    CHECK(y[4] == 0.0);

    // Fractional delays interpolate between neighbouring taps.
    Comb<double> frac(64);
    const auto imp = impulse(16);
    std::vector<double> z(16);
    frac.process(imp, z, 2.25, 0.5, 0.0);
    CHECK(z[2] == doctest::Approx(0.5 * 0.75));
    CHECK(z[3] == doctest::Approx(0.5 * 0.25));
}

TEST_CASE("comb rejects out-of-range parameters") {
    Comb<double> comb(100);
    std::vector<double> x(8);
    std::vector<double> y(8);
    CHECK_THROWS_AS(comb.process(x, y, 101.0, 0.1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(comb.process(x, y, 0.5, 0.1, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(comb.process(x, y, 10.0, 1.0, 0.1), std::invalid_argument);
    CHECK_THROWS_AS(comb.process(x, y, 10.0, 0.1, 1.0), std::invalid_argument);
    std::vector<double> short_y(4);
    CHECK_THROWS_AS(comb.process(x, short_y, 10.0, 0.1, 0.1), std::invalid_argument);
}

TEST_CASE("granulator at zero density is digital silence") {
    Granulator<double> g(48000, 1);
    const std::vector<double> source(48000, 0.7);
    GrainParams p;
    p.density = 0.0;
    std::vector<double> out(256, 1.0);
    for (int b = 0; b < 100; ++b) {
        g.process(source, p, out);
        for (double v : out) REQUIRE(v == 0.0);
    }
    CHECK(g.grain_count() == 0);
}

TEST_CASE("grain onsets follow the configured Poisson rate") {
    const std::vector<double> source(48000, 0.5);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Granulator<double> g(48000, seed);
        GrainParams p;
        p.density = 50.0;
        p.rng_seed = seed;
        std::vector<double> out(256);
        for (int b = 0; b < 48000 * 10 / 256; ++b) g.process(source, p, out);
        const double count = static_cast<double>(g.grain_count());
        INFO("seed ", seed, " onsets ", count);
        CHECK(std::abs(count - 500.0) <= 3.0 * std::sqrt(500.0));
    }
}

TEST_CASE("granulator output is repeatable for a seed") {
    std::vector<double> source(24000);
    for (std::size_t i = 0; i < source.size(); ++i) source[i] = std::sin(0.01 * static_cast<double>(i));
    auto run = [&](std::uint64_t seed) {
        Granulator<double> g(48000, seed);
        GrainParams p;
        p.density = 80.0;
        p.duration = 0.03;
        p.start_position = 0.4;
        p.gain = 0.8;
        p.rng_seed = seed;
        std::vector<double> all;
        std::vector<double> out(256);
        for (int b = 0; b < 48000 * 10 / 256; ++b) {
            g.process(source, p, out);
            all.insert(all.end(), out.begin(), out.end());
        }
        return all;
    };
    const auto a = run(9);
    CHECK(a == run(9));
    CHECK(a != run(10));
}

TEST_CASE("a single grain reads a Hann-windowed span at the start position") {
    std::vector<double> source(1000);
    for (std::size_t i = 0; i < source.size(); ++i) source[i] = static_cast<double>(i);
    Granulator<double> g(1000, 3);
    GrainParams p;
    p.density = 1.0;  // expected one onset per 1000 samples
    p.duration = 0.1;  // 100 samples
    p.start_position = 0.5;
    p.gain = 0.5;
    p.rng_seed = 3;
    std::vector<double> out(1);
    std::vector<double> trace;
    while (g.grain_count() == 0) {
        g.process(source, p, out);
        trace.push_back(out[0]);
    }
    // The first grain starts on the sample where it was scheduled.
    const double offset = 0.5 * (1000 - 100);
    CHECK(trace.back() == doctest::Approx(0.5 * std::pow(std::sin(std::numbers::pi * 0.5 / 100), 2) * offset));
    for (int k = 1; k < 100 && g.grain_count() == 1; ++k) {
        g.process(source, p, out);
        if (g.grain_count() > 1) break;
        const double w = std::pow(std::sin(std::numbers::pi * (k + 0.5) / 100), 2);
        REQUIRE(out[0] == doctest::Approx(0.5 * w * (offset + k)));
    }
}

TEST_CASE("granulator peak is bounded by gain, overlap and source peak") {
    GrainParams p;
    p.density = 20.0;
    p.duration = 0.05;  // density x duration = 1
    p.gain = 0.6;
    p.rng_seed = 4;

    // Constant source: every sample is gain x (sum of windows) <= gain x active grains.
    Granulator<double> h(48000, 4);
    const std::vector<double> ones(9600, 1.0);
    std::vector<double> one(1);
    std::size_t most = 0;
    double sum_active = 0.0;
    const int n = 48000 * 20;
    for (int i = 0; i < n; ++i) {
        // Grains sounding during this sample: survivors plus fresh onsets.
        const std::size_t active = h.active_grains();
        const std::uint64_t onsets = h.grain_count();
        h.process(ones, p, one);
        const std::size_t sounding = active + static_cast<std::size_t>(h.grain_count() - onsets);
        const auto live = static_cast<double>(sounding);
        most = std::max(most, sounding);
        sum_active += static_cast<double>(h.active_grains());
        REQUIRE(one[0] <= p.gain * live + 1e-12);
        REQUIRE(one[0] >= 0.0);
    }
    // Expected overlap is density x duration.
    CHECK(sum_active / n == doctest::Approx(1.0).epsilon(0.15));

    std::mt19937_64 gen(8);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    std::vector<double> source(9600);
    for (auto& s : source) s = u(gen);
    Granulator<double> g(48000, 4);
    std::vector<double> out(256);
    for (int b = 0; b < 2000; ++b) {
        g.process(source, p, out);
        for (double v : out) REQUIRE(std::abs(v) <= p.gain * static_cast<double>(most));
    }
}

TEST_CASE("grain parameters are validated") {
    Granulator<double> g(48000);
    std::vector<double> src(100, 0.0);
    std::vector<double> out(8);
    GrainParams p;
    p.duration = 0.001;
    CHECK_THROWS_AS(g.process(src, p, out), std::invalid_argument);
    p = {};
    p.gain = 1.5;
    CHECK_THROWS_AS(g.process(src, p, out), std::invalid_argument);
    p = {};
    p.density = -1;
    CHECK_THROWS_AS(g.process(src, p, out), std::invalid_argument);
    p = {};
    CHECK_THROWS_AS(g.process({}, p, out), std::invalid_argument);
}

TEST_CASE("fully open gate is bit-exact passthrough") {
    NoiseGate<double> gate(48000);
    const auto x = sine(220.0, 0.01, 48000, 4800);
    const auto y = blockwise(x, 256, [&](auto in, auto out) { gate.process(in, out, 1.0, 0.5); });
    CHECK(y == x);
}

TEST_CASE("closed gate attenuates quiet input by 60 dB") {
    NoiseGate<double> gate(48000);
    const auto x = sine(220.0, 0.3, 48000, 48000);
    const auto y = blockwise(x, 256, [&](auto in, auto out) { gate.process(in, out, 0.0, 0.5); });
    for (std::size_t n = 0; n < y.size(); ++n) REQUIRE(std::abs(y[n]) <= 1e-3 * std::abs(x[n]) + 1e-15);
}

TEST_CASE("gate opens with a 5 ms ramp once the envelope clears the threshold") {
    NoiseGate<double> gate(48000);
    const auto x = sine(1000.0, 0.5, 48000, 9600);
    std::vector<double> y(x.size());
    gate.process(x, y, 0.5, 0.5);  // threshold 0.25 < sine RMS 0.354
    CHECK(gate.gain() == 1.0);
    // Before the 10 ms window has filled the envelope is below threshold.
    CHECK(std::abs(y[100]) <= 1e-3 * std::abs(x[100]) + 1e-15);
    CHECK(y.back() == x.back());
    CHECK(gate.envelope() == doctest::Approx(0.5 / std::sqrt(2.0)).epsilon(1e-3));
}

TEST_CASE("gate output RMS never falls as openness rises") {
    const auto x = sine(300.0, 0.2, 48000, 48000);
    double previous = -1.0;
    for (int k = 0; k <= 20; ++k) {
        const double o = k / 20.0;
        NoiseGate<double> gate(48000);
        const auto y = blockwise(x, 256, [&](auto in, auto out) { gate.process(in, out, o, 0.5); });
        const double level = rms(y);
        INFO("openness ", o, " rms ", level);
        REQUIRE(level >= previous);
        previous = level;
    }
    CHECK(previous == doctest::Approx(rms(x)));
}

TEST_CASE("gate rejects a non-positive threshold") {
    NoiseGate<double> gate(48000);
    std::vector<double> x(8);
    CHECK_THROWS_AS(gate.process(x, x, 0.5, 0.0), std::invalid_argument);
}

TEST_CASE("loop buffer wraps its write head") {
    LoopBuffer<double> loop(8);
    const std::vector<double> block{1, 2, 3, 4};
    loop.write(block);
    CHECK(loop.write_head() == 4);
    loop.write(block);
    CHECK(loop.write_head() == 0);

    const auto before = std::vector<double>(loop.samples().begin(), loop.samples().end());
    loop.set_recording(false);
    loop.write(std::vector<double>{9, 9, 9});
    CHECK(std::vector<double>(loop.samples().begin(), loop.samples().end()) == before);
    CHECK(loop.write_head() == 0);
}

TEST_CASE("loop buffer keeps the newest material after overflowing") {
    const std::size_t cap = 10;
    LoopBuffer<double> loop(cap);
    std::vector<double> ramp(cap + 4);
    for (std::size_t i = 0; i < ramp.size(); ++i) ramp[i] = static_cast<double>(i);
    loop.write(std::span<const double>(ramp).first(3));
    loop.write(std::span<const double>(ramp).subspan(3));

    std::vector<double> expected(cap, 0.0);
    std::size_t head = 0;
    for (double v : ramp) {
        expected[head] = v;
        head = (head + 1) % cap;
    }
    CHECK(std::vector<double>(loop.samples().begin(), loop.samples().end()) == expected);
    CHECK(loop.write_head() == head);
    CHECK(loop.oldest() == head);
    CHECK(std::vector<double>(loop.samples().begin(), loop.samples().begin() + 4) ==
          std::vector<double>{10, 11, 12, 13});
    CHECK_THROWS_AS(LoopBuffer<double>(0), std::invalid_argument);
}

TEST_CASE("envelope interpolates between breakpoints") {
    Envelope ramp{{{0.0, 0.0}, {1.0, 1.0}}};
    CHECK(ramp.eval(0.5) == 0.5);
    Envelope tri{{{0.0, 0.0}, {0.5, 1.0}, {1.0, 0.0}}};
    CHECK(tri.eval(0.75) == 0.5);
    CHECK(tri.eval(0.5) == 1.0);
    CHECK(tri.eval(0.0) == 0.0);
    CHECK(tri.eval(1.0) == 0.0);
    CHECK(envelope_eval(tri, 0.25) == 0.5);
    CHECK(tri.eval(-1.0) == 0.0);
    CHECK(tri.eval(2.0) == 0.0);
}

TEST_CASE("envelope validation") {
    CHECK_THROWS_AS((Envelope{{{0.1, 0.0}, {1.0, 1.0}}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((Envelope{{{0.0, 0.0}, {0.9, 1.0}}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((Envelope{{{0.0, 0.0}, {0.5, 1.0}, {0.5, 0.2}, {1.0, 0.0}}}.validate()), std::invalid_argument);
    CHECK_THROWS_AS((Envelope{{{0.0, 0.0}, {1.0, 1.2}}}.validate()), std::invalid_argument);
    CHECK_NOTHROW(Envelope{}.validate());
}

TEST_CASE("processors are deterministic state machines") {
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> u(-1, 1);
    std::vector<double> x(10000);
    for (auto& v : x) v = u(gen) * 0.3;
    auto chain = [&] {
        Comb<double> comb(1000);
        NoiseGate<double> gate(48000);
        return blockwise(x, 256, [&](auto in, auto out) {
            comb.process(in, out, 100.0, 0.5, 0.3);
            gate.process(out, out, 0.4, 0.5);
        });
    };
    CHECK(chain() == chain());
}

TEST_CASE("float instantiations run") {
    Comb<float> comb(10);
    std::vector<float> x(20, 0.0f);
    x[0] = 1.0f;
    std::vector<float> y(20);
    comb.process(x, y, 4.0f, 0.5f, 0.0f);
    CHECK(y[4] == 0.5f);
    NoiseGate<float> gate(48000);
    gate.process(x, y, 1.0f, 0.5);
    CHECK(y == x);
}
