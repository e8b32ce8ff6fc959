#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numbers>
#include <span>
#include <stdexcept>
#include <utility>
#include <vector>

#include "xmt/rng.hpp"

namespace xmt {

inline constexpr std::size_t kDefaultBlockSize = 256;
inline constexpr double kDefaultSampleRate = 48000.0;

/// Two ramp oscillators averaged and recentered to [-0.5, 0.5].
template <typename Scalar>
class PhasorPair {
public:
    explicit PhasorPair(Scalar phase1 = 0, Scalar phase2 = 0) : phase1_(phase1), phase2_(phase2) {}

    /// Writes raw 0..1 samples of one phasor and advances its phase.
    static void ramp(Scalar& phase, Scalar freq, Scalar rate, std::span<Scalar> out) {
        check_frequency(freq, rate);
        const Scalar inc = freq / rate;
        for (auto& s : out) {
            s = phase;
            phase += inc;
            phase -= std::floor(phase);
        }
    }

    void process(Scalar f1, Scalar f2, Scalar rate, std::span<Scalar> out) {
        check_frequency(f1, rate);
        check_frequency(f2, rate);
        const Scalar inc1 = f1 / rate;
        const Scalar inc2 = f2 / rate;
        for (auto& s : out) {
            s = Scalar(0.5) * (phase1_ + phase2_) - Scalar(0.5);
            phase1_ += inc1;
            phase1_ -= std::floor(phase1_);
            phase2_ += inc2;
            phase2_ -= std::floor(phase2_);
        }
    }

    Scalar phase1() const { return phase1_; }
    Scalar phase2() const { return phase2_; }

private:
    static void check_frequency(Scalar f, Scalar rate) {
        if (!(f >= 0) || f > rate / 2) throw std::invalid_argument("phasor frequency must lie in [0, rate/2]");
    }

    Scalar phase1_;
    Scalar phase2_;
};

/// y[n] = x[n] + a x[n-D] + b y[n-D]. A delay change is ramped linearly
/// across the block it arrives in; fractional delays read by linear
/// interpolation.
template <typename Scalar>
class Comb {
public:
    explicit Comb(std::size_t max_delay)
        : max_delay_(max_delay), x_(max_delay + 2, Scalar(0)), y_(max_delay + 2, Scalar(0)) {
        if (max_delay < 1) throw std::invalid_argument("comb max delay must be at least one sample");
    }

    std::size_t max_delay() const { return max_delay_; }

    void process(std::span<const Scalar> in, std::span<Scalar> out, Scalar delay, Scalar feedforward,
                 Scalar feedback) {
        if (!(delay >= 1) || delay > static_cast<Scalar>(max_delay_))
            throw std::invalid_argument("comb delay out of range");
        if (!(feedforward >= 0 && feedforward < 1)) throw std::invalid_argument("comb feedforward must lie in [0, 1)");
        if (!(feedback >= 0 && feedback < 1)) throw std::invalid_argument("comb feedback must lie in [0, 1)");
        if (in.size() != out.size()) throw std::invalid_argument("comb block size mismatch");

        const Scalar from = primed_ ? delay_ : delay;
        const auto count = static_cast<Scalar>(in.size());
        for (std::size_t n = 0; n < in.size(); ++n) {
            const Scalar d = from + (delay - from) * static_cast<Scalar>(n + 1) / count;
            const Scalar x = in[n];
            const Scalar y = x + feedforward * read(x_, d) + feedback * read(y_, d);
            x_[head_] = x;
            y_[head_] = y;
            head_ = (head_ + 1) % x_.size();
            out[n] = y;
        }
        delay_ = delay;
        primed_ = true;
    }

    void reset() {
        std::fill(x_.begin(), x_.end(), Scalar(0));
        std::fill(y_.begin(), y_.end(), Scalar(0));
        head_ = 0;
        primed_ = false;
    }

private:
    Scalar read(const std::vector<Scalar>& line, Scalar d) const {
        const auto whole = static_cast<std::size_t>(d);
        const Scalar frac = d - static_cast<Scalar>(whole);
        const std::size_t size = line.size();
        const Scalar a = line[(head_ + size - whole) % size];
        if (frac == 0) return a;
        const Scalar b = line[(head_ + size - whole - 1) % size];
        return a + frac * (b - a);
    }

    std::size_t max_delay_;
    std::vector<Scalar> x_;
    std::vector<Scalar> y_;
    std::size_t head_ = 0;
    Scalar delay_ = 1;
    bool primed_ = false;
};

struct GrainParams {
    double density = 0.0;         // grains per second
    double duration = 0.05;       // seconds, [0.005, 0.5]
    double start_position = 0.0;  // [0, 1] into the source
    double gain = 1.0;            // [0, 1]
    std::uint64_t rng_seed = 0;

    void validate() const {
        if (!(density >= 0.0) || !std::isfinite(density)) throw std::invalid_argument("grain density must be >= 0");
        if (!(duration >= 0.005 && duration <= 0.5)) throw std::invalid_argument("grain duration must lie in [0.005, 0.5] s");
        if (!(start_position >= 0.0 && start_position <= 1.0))
            throw std::invalid_argument("grain start position must lie in [0, 1]");
        if (!(gain >= 0.0 && gain <= 1.0)) throw std::invalid_argument("grain gain must lie in [0, 1]");
    }

    bool operator==(const GrainParams&) const = default;
};

/// Poisson-scheduled, Hann-windowed grains. The scheduler consumes a unit
/// exponential budget at density/rate per sample, so density may change
/// between blocks without breaking the process statistics.
template <typename Scalar>
class Granulator {
public:
    explicit Granulator(double sample_rate, std::uint64_t seed = 0, std::size_t max_grains = 512)
        : rate_(sample_rate), seed_(seed), rng_(seed), max_grains_(max_grains) {
        grains_.reserve(max_grains);
        budget_ = rng_.exponential();
    }

    /// `origin` offsets start positions within `source`, with reads wrapping
    /// modulo its length; pass a ring buffer's oldest index to address it
    /// chronologically.
    void process(std::span<const Scalar> source, const GrainParams& params, std::span<Scalar> out,
                 std::size_t origin = 0) {
        params.validate();
        if (source.empty()) throw std::invalid_argument("granulator source is empty");
        if (params.rng_seed != seed_) reseed(params.rng_seed);

        const double per_sample = params.density / rate_;
        const std::size_t length = std::clamp<std::size_t>(
            static_cast<std::size_t>(std::llround(params.duration * rate_)), 1, source.size());
        const auto offset = static_cast<std::size_t>(
            std::llround(params.start_position * static_cast<double>(source.size() - length)));

        for (auto& s : out) {
            if (per_sample > 0.0) {
                budget_ -= per_sample;
                while (budget_ <= 0.0) {
                    ++onsets_;
                    if (grains_.size() < max_grains_)
                        grains_.push_back({source, (origin + offset) % source.size(), length, 0,
                                           static_cast<Scalar>(params.gain)});
                    budget_ += rng_.exponential();
                }
            }
            Scalar acc = 0;
            for (auto& g : grains_) {
                const double phase = (static_cast<double>(g.pos) + 0.5) / static_cast<double>(g.length);
                const double w = std::sin(std::numbers::pi * phase);
                acc += g.gain * static_cast<Scalar>(w * w) * g.source[(g.start + g.pos) % g.source.size()];
                ++g.pos;
            }
            std::erase_if(grains_, [](const Grain& g) { return g.pos >= g.length; });
            s = acc;
        }
    }

    /// Total grain onsets scheduled so far.
    std::uint64_t grain_count() const { return onsets_; }
    std::size_t active_grains() const { return grains_.size(); }

    void reseed(std::uint64_t seed) {
        seed_ = seed;
        rng_ = Rng(seed);
        budget_ = rng_.exponential();
    }

private:
    struct Grain {
        std::span<const Scalar> source;
        std::size_t start;
        std::size_t length;
        std::size_t pos;
        Scalar gain;
    };

    double rate_;
    std::uint64_t seed_;
    Rng rng_;
    std::size_t max_grains_;
    std::vector<Grain> grains_;
    double budget_ = 0.0;
    std::uint64_t onsets_ = 0;
};

/// RMS-keyed gate. The control raises openness O, which lowers the
/// threshold T = T_max (1 - O). Closed gain is -60 dB; transitions are 5 ms
/// linear ramps; the envelope is a 10 ms moving RMS. O = 1 passes input
/// through untouched.
template <typename Scalar>
class NoiseGate {
public:
    static constexpr double kFloor = 1e-3;

    explicit NoiseGate(double sample_rate)
        : squares_(std::max<std::size_t>(1, static_cast<std::size_t>(std::llround(0.010 * sample_rate))), 0.0),
          step_((1.0 - kFloor) / std::max(1.0, std::round(0.005 * sample_rate))) {}

    void process(std::span<const Scalar> in, std::span<Scalar> out, double openness, double max_threshold) {
        if (!(max_threshold > 0.0)) throw std::invalid_argument("gate threshold must be positive");
        if (in.size() != out.size()) throw std::invalid_argument("gate block size mismatch");
        openness = std::clamp(openness, 0.0, 1.0);
        const double threshold = max_threshold * (1.0 - openness);
        const bool bypass = openness >= 1.0;

        for (std::size_t n = 0; n < in.size(); ++n) {
            track(static_cast<double>(in[n]));
            if (bypass) {
                gain_ = 1.0;
                out[n] = in[n];
                continue;
            }
            const double target = envelope() >= threshold ? 1.0 : kFloor;
            if (gain_ < target) gain_ = std::min(target, gain_ + step_);
            else if (gain_ > target) gain_ = std::max(target, gain_ - step_);
            out[n] = static_cast<Scalar>(gain_ * static_cast<double>(in[n]));
        }
    }

    double gain() const { return gain_; }
    double envelope() const { return std::sqrt(std::max(0.0, sum_) / static_cast<double>(squares_.size())); }

private:
    void track(double x) {
        sum_ += x * x - squares_[index_];
        squares_[index_] = x * x;
        if (++index_ == squares_.size()) {
            index_ = 0;
            sum_ = 0.0;
            for (double s : squares_) sum_ += s;
        }
    }

    std::vector<double> squares_;
    std::size_t index_ = 0;
    double sum_ = 0.0;
    double step_;
    double gain_ = kFloor;
};

/// Circular record buffer; old material is overwritten once full.
template <typename Scalar>
class LoopBuffer {
public:
    explicit LoopBuffer(std::size_t capacity) : samples_(capacity, Scalar(0)) {
        if (capacity == 0) throw std::invalid_argument("loop buffer capacity must be positive");
    }

    void write(std::span<const Scalar> input) {
        if (!recording_) return;
        for (Scalar s : input) {
            samples_[write_head_] = s;
            write_head_ = (write_head_ + 1) % samples_.size();
        }
        filled_ = std::min(samples_.size(), filled_ + input.size());
    }

    std::span<const Scalar> samples() const { return samples_; }
    std::size_t capacity() const { return samples_.size(); }
    std::size_t write_head() const { return write_head_; }
    /// Index of the oldest sample once the buffer has wrapped.
    std::size_t oldest() const { return filled_ == samples_.size() ? write_head_ : 0; }
    std::size_t filled() const { return filled_; }
    bool recording() const { return recording_; }
    void set_recording(bool on) { recording_ = on; }

private:
    std::vector<Scalar> samples_;
    std::size_t write_head_ = 0;
    std::size_t filled_ = 0;
    bool recording_ = true;
};

/// Piecewise-linear gain curve over a normalized time axis.
struct Envelope {
    std::vector<std::pair<double, double>> breakpoints{{0.0, 1.0}, {1.0, 1.0}};

    void validate() const {
        if (breakpoints.size() < 2) throw std::invalid_argument("envelope needs at least two breakpoints");
        if (breakpoints.front().first != 0.0 || breakpoints.back().first != 1.0)
            throw std::invalid_argument("envelope must start at t=0 and end at t=1");
        for (std::size_t i = 0; i < breakpoints.size(); ++i) {
            const auto [t, g] = breakpoints[i];
            if (!(g >= 0.0 && g <= 1.0)) throw std::invalid_argument("envelope gains must lie in [0, 1]");
            if (i > 0 && !(t > breakpoints[i - 1].first))
                throw std::invalid_argument("envelope times must be strictly increasing");
        }
    }

    double eval(double t) const {
        t = std::clamp(t, 0.0, 1.0);
        const auto upper = std::upper_bound(breakpoints.begin(), breakpoints.end(), t,
                                            [](double v, const auto& bp) { return v < bp.first; });
        if (upper == breakpoints.end()) return breakpoints.back().second;
        const auto& [t1, g1] = *upper;
        const auto& [t0, g0] = *(upper - 1);
        return g0 + (g1 - g0) * (t - t0) / (t1 - t0);
    }

    bool operator==(const Envelope&) const = default;
};

inline double envelope_eval(const Envelope& env, double t) { return env.eval(t); }

}  // namespace xmt
