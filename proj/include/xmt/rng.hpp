#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace xmt {

/// SplitMix64 finalizer. Full avalanche, used to derive per-cell jitter.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// Maps the top 53 bits of a word to [0, 1).
inline double unit_from_bits(std::uint64_t bits) noexcept {
    return static_cast<double>(bits >> 11) * 0x1.0p-53;
}

/// Hash of (seed, cell x, cell y, stream) -> 64 bits. Integer only, so the
/// result is identical on every platform.
constexpr std::uint64_t cell_hash(std::uint64_t seed, std::int64_t cx, std::int64_t cy,
                                  std::uint64_t stream) noexcept {
    std::uint64_t h = mix64(seed ^ 0xA0761D6478BD642FULL);
    h = mix64(h ^ static_cast<std::uint64_t>(cx) * 0xE7037ED1A0B428DBULL);
    h = mix64(h ^ static_cast<std::uint64_t>(cy) * 0x8EBC6AF09C88C6E3ULL);
    return mix64(h ^ stream);
}

/// Seeded generator whose draws do not depend on the standard library's
/// distribution implementations (those differ between vendors).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    double uniform() { return unit_from_bits(engine_()); }
    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
    /// Exponential variate with unit mean.
    double exponential() { return -std::log1p(-uniform()); }

private:
    std::mt19937_64 engine_;
};

}  // namespace xmt
