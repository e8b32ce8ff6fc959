#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Core>

#include "xmt/rng.hpp"

namespace xmt {

enum class Basis { WorleyF1, WorleyF2, WorleyF2MinusF1, ValueNoise };
enum class Metric { Euclidean, Manhattan, Chebyshev };
enum class Sampling { NearestCell, Bilinear };

template <typename Scalar>
using Point2 = Eigen::Matrix<Scalar, 2, 1>;

/// Row-major so that row j is image row j (top row first).
template <typename Scalar>
using Grid = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Parameters of a procedural terrain. `zoom` is the number of feature-grid
/// cells spanned by the image width.
struct BasisSpec {
    Basis kind = Basis::WorleyF1;
    std::uint64_t seed = 0;
    double zoom = 8.0;
    Metric metric = Metric::Euclidean;
    int width = 256;
    int height = 256;

    void validate() const {
        if (!(zoom > 0.0) || !std::isfinite(zoom))
            throw std::invalid_argument("basis zoom must be positive and finite");
        if (width < 2 || height < 2)
            throw std::invalid_argument("terrain must be at least 2x2 pixels");
    }

    bool is_worley() const { return kind != Basis::ValueNoise; }

    bool operator==(const BasisSpec&) const = default;
};

std::string_view to_string(Basis b);
std::string_view to_string(Metric m);
std::string_view to_string(Sampling s);
Basis parse_basis(std::string_view name);
Metric parse_metric(std::string_view name);
Sampling parse_sampling(std::string_view name);

template <typename Scalar>
struct Terrain {
    Grid<Scalar> values;  // height x width
    bool normalized = false;
    bool flat = false;
    BasisSpec spec;

    int width() const { return static_cast<int>(values.cols()); }
    int height() const { return static_cast<int>(values.rows()); }
};

template <typename Scalar>
struct WorleyDistances {
    Scalar f1;
    Scalar f2;
};

template <typename Scalar>
Scalar distance(const Point2<Scalar>& a, const Point2<Scalar>& b, Metric metric) {
    const Point2<Scalar> d = (a - b).cwiseAbs();
    switch (metric) {
        case Metric::Manhattan: return d.x() + d.y();
        case Metric::Chebyshev: return std::max(d.x(), d.y());
        case Metric::Euclidean: break;
    }
    return std::sqrt(d.x() * d.x() + d.y() * d.y());
}

/// One jittered feature point per cell of a non-wrapping grid. Cells outside
/// [0, cells_x) x [0, cells_y) carry no point.
class FeatureLattice {
public:
    explicit FeatureLattice(const BasisSpec& spec)
        : seed_(spec.seed),
          cells_x_(std::max<std::int64_t>(2, static_cast<std::int64_t>(std::ceil(spec.zoom)))),
          cells_y_(cells_x_) {}

    FeatureLattice(std::uint64_t seed, std::int64_t cells_x, std::int64_t cells_y)
        : seed_(seed), cells_x_(cells_x), cells_y_(cells_y) {}

    std::int64_t cells_x() const { return cells_x_; }
    std::int64_t cells_y() const { return cells_y_; }

    bool contains(std::int64_t cx, std::int64_t cy) const {
        return cx >= 0 && cy >= 0 && cx < cells_x_ && cy < cells_y_;
    }

    template <typename Scalar = double>
    Point2<Scalar> point(std::int64_t cx, std::int64_t cy) const {
        const double jx = unit_from_bits(cell_hash(seed_, cx, cy, 0));
        const double jy = unit_from_bits(cell_hash(seed_, cx, cy, 1));
        return {static_cast<Scalar>(static_cast<double>(cx) + jx),
                static_cast<Scalar>(static_cast<double>(cy) + jy)};
    }

private:
    std::uint64_t seed_;
    std::int64_t cells_x_;
    std::int64_t cells_y_;
};

namespace detail {

template <typename Scalar>
void insert_candidate(WorleyDistances<Scalar>& out, Scalar d) {
    if (d < out.f1) {
        out.f2 = out.f1;
        out.f1 = d;
    } else if (d < out.f2) {
        out.f2 = d;
    }
}

}  // namespace detail

/// Nearest and second-nearest feature distances. Cells are scanned in
/// Chebyshev rings around the containing cell until no unvisited ring can
/// hold a point closer than the current F2.
template <typename Scalar>
WorleyDistances<Scalar> worley_distances(const Point2<Scalar>& p, const FeatureLattice& lattice,
                                         Metric metric) {
    constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();
    WorleyDistances<Scalar> out{inf, inf};

    const auto c0x = static_cast<std::int64_t>(std::floor(p.x()));
    const auto c0y = static_cast<std::int64_t>(std::floor(p.y()));
    const Scalar fx = p.x() - static_cast<Scalar>(c0x);
    const Scalar fy = p.y() - static_cast<Scalar>(c0y);
    const Scalar edge = std::min({fx, Scalar(1) - fx, fy, Scalar(1) - fy});

    for (std::int64_t r = 0;; ++r) {
        if (r > 0) {
            // Any point in ring r is at least this far away along one axis.
            const Scalar bound = static_cast<Scalar>(r - 1) + edge;
            if (bound >= out.f2) break;
        }
        for (std::int64_t cy = c0y - r; cy <= c0y + r; ++cy) {
            const bool edge_row = (cy == c0y - r) || (cy == c0y + r);
            const std::int64_t step = edge_row ? 1 : 2 * r;
            for (std::int64_t cx = c0x - r; cx <= c0x + r; cx += (step == 0 ? 1 : step)) {
                if (!lattice.contains(cx, cy)) continue;
                detail::insert_candidate(out, distance<Scalar>(p, lattice.point<Scalar>(cx, cy), metric));
            }
        }
        const bool covers_lattice = c0x - r <= 0 && c0y - r <= 0 && c0x + r >= lattice.cells_x() - 1 &&
                                    c0y + r >= lattice.cells_y() - 1;
        if (covers_lattice) break;
    }
    return out;
}

/// Brute force over an explicit point set.
template <typename Scalar>
WorleyDistances<Scalar> worley_distances(const Point2<Scalar>& p, std::span<const Point2<Scalar>> points,
                                         Metric metric) {
    constexpr Scalar inf = std::numeric_limits<Scalar>::infinity();
    WorleyDistances<Scalar> out{inf, inf};
    for (const auto& q : points) detail::insert_candidate(out, distance<Scalar>(p, q, metric));
    return out;
}

template <typename Scalar>
WorleyDistances<Scalar> worley_distances(const Point2<Scalar>& p, const BasisSpec& spec) {
    return worley_distances<Scalar>(p, FeatureLattice(spec), spec.metric);
}

/// Smoothstep-interpolated lattice noise in [0, 1).
template <typename Scalar>
Scalar value_noise(const Point2<Scalar>& p, std::uint64_t seed) {
    const auto gx = static_cast<std::int64_t>(std::floor(p.x()));
    const auto gy = static_cast<std::int64_t>(std::floor(p.y()));
    const Scalar tx = p.x() - static_cast<Scalar>(gx);
    const Scalar ty = p.y() - static_cast<Scalar>(gy);
    const auto corner = [&](std::int64_t x, std::int64_t y) {
        return static_cast<Scalar>(unit_from_bits(cell_hash(seed, x, y, 2)));
    };
    const Scalar sx = tx * tx * (Scalar(3) - Scalar(2) * tx);
    const Scalar sy = ty * ty * (Scalar(3) - Scalar(2) * ty);
    const Scalar top = corner(gx, gy) + sx * (corner(gx + 1, gy) - corner(gx, gy));
    const Scalar bottom = corner(gx, gy + 1) + sx * (corner(gx + 1, gy + 1) - corner(gx, gy + 1));
    return top + sy * (bottom - top);
}

/// Affine map of a raw grid onto [0, 1]. A constant grid maps to all zeros
/// and is flagged flat.
template <typename Scalar>
Terrain<Scalar> normalize(Grid<Scalar> raw, const BasisSpec& spec = {}) {
    if (raw.size() == 0) throw std::invalid_argument("cannot normalize an empty grid");
    if (!raw.allFinite()) throw std::invalid_argument("cannot normalize non-finite values");
    Terrain<Scalar> t;
    t.spec = spec;
    t.normalized = true;
    const Scalar lo = raw.minCoeff();
    const Scalar hi = raw.maxCoeff();
    if (hi == lo) {
        t.flat = true;
        t.values = Grid<Scalar>::Zero(raw.rows(), raw.cols());
        return t;
    }
    const Scalar span = hi - lo;
    t.values = raw.unaryExpr([lo, span](Scalar v) { return (v - lo) / span; });
    return t;
}

/// Raw (pre-normalization) basis value at a point in feature-grid units.
template <typename Scalar>
Scalar evaluate_basis(const Point2<Scalar>& p, const BasisSpec& spec, const FeatureLattice& lattice) {
    if (spec.kind == Basis::ValueNoise) return value_noise<Scalar>(p, spec.seed);
    const auto d = worley_distances<Scalar>(p, lattice, spec.metric);
    switch (spec.kind) {
        case Basis::WorleyF2: return d.f2;
        case Basis::WorleyF2MinusF1: return d.f2 - d.f1;
        default: return d.f1;
    }
}

/// Pixel (i, j) is evaluated at ((i + 0.5) / W, (j + 0.5) / H) * zoom.
template <typename Scalar = double>
Terrain<Scalar> generate_terrain(const BasisSpec& spec) {
    spec.validate();
    const FeatureLattice lattice(spec);
    Grid<Scalar> raw(spec.height, spec.width);
    const double zoom = spec.zoom;
    for (int j = 0; j < spec.height; ++j) {
        const auto y = static_cast<Scalar>((j + 0.5) / spec.height * zoom);
        for (int i = 0; i < spec.width; ++i) {
            const auto x = static_cast<Scalar>((i + 0.5) / spec.width * zoom);
            raw(j, i) = evaluate_basis<Scalar>(Point2<Scalar>(x, y), spec, lattice);
        }
    }
    return normalize<Scalar>(std::move(raw), spec);
}

/// Grayscale at a position in the unit square; components are clamped first.
template <typename Scalar>
Scalar sample(const Terrain<Scalar>& terrain, const Point2<Scalar>& pos, Sampling mode = Sampling::NearestCell) {
    const int w = terrain.width();
    const int h = terrain.height();
    const Scalar x = std::clamp(pos.x(), Scalar(0), Scalar(1));
    const Scalar y = std::clamp(pos.y(), Scalar(0), Scalar(1));

    if (mode == Sampling::NearestCell) {
        const int i = std::min(static_cast<int>(x * w), w - 1);
        const int j = std::min(static_cast<int>(y * h), h - 1);
        return terrain.values(j, i);
    }

    const Scalar gx = std::clamp(x * w - Scalar(0.5), Scalar(0), static_cast<Scalar>(w - 1));
    const Scalar gy = std::clamp(y * h - Scalar(0.5), Scalar(0), static_cast<Scalar>(h - 1));
    const int i0 = static_cast<int>(gx);
    const int j0 = static_cast<int>(gy);
    const int i1 = std::min(i0 + 1, w - 1);
    const int j1 = std::min(j0 + 1, h - 1);
    const Scalar tx = gx - static_cast<Scalar>(i0);
    const Scalar ty = gy - static_cast<Scalar>(j0);
    const auto& v = terrain.values;
    const Scalar top = v(j0, i0) + tx * (v(j0, i1) - v(j0, i0));
    const Scalar bottom = v(j1, i0) + tx * (v(j1, i1) - v(j1, i0));
    return top + ty * (bottom - top);
}

/// Binary portable graymap: "P5 W H 255" header then one byte per pixel,
/// row-major, top row first.
template <typename Scalar>
std::string export_pgm(const Terrain<Scalar>& terrain) {
    std::string out = "P5\n" + std::to_string(terrain.width()) + " " + std::to_string(terrain.height()) + "\n255\n";
    const auto header = out.size();
    out.resize(header + static_cast<std::size_t>(terrain.values.size()));
    std::size_t k = header;
    for (int j = 0; j < terrain.height(); ++j) {
        for (int i = 0; i < terrain.width(); ++i) {
            const double v = std::clamp(static_cast<double>(terrain.values(j, i)), 0.0, 1.0);
            out[k++] = static_cast<char>(static_cast<unsigned char>(std::lround(v * 255.0)));
        }
    }
    return out;
}

/// JSON sidecar describing the generating spec.
std::string basis_spec_json(const BasisSpec& spec);
BasisSpec basis_spec_from_json(std::string_view text);

/// Writes `<stem>.pgm` and `<stem>.json`.
void write_terrain_files(const Terrain<double>& terrain, const std::string& pgm_path);

}  // namespace xmt
