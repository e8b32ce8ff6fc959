#include "xmt/terrain.hpp"

#include <array>
#include <filesystem>
#include <fstream>
#include <utility>

#include <nlohmann/json.hpp>

namespace xmt {

namespace {

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view name, const std::array<std::pair<Enum, std::string_view>, N>& table,
                std::string_view what) {
    for (const auto& [value, label] : table)
        if (label == name) return value;
    throw std::invalid_argument("unknown " + std::string(what) + ": " + std::string(name));
}

constexpr std::array<std::pair<Basis, std::string_view>, 4> kBasisNames{{
    {Basis::WorleyF1, "WORLEY_F1"},
    {Basis::WorleyF2, "WORLEY_F2"},
    {Basis::WorleyF2MinusF1, "WORLEY_F2_MINUS_F1"},
    {Basis::ValueNoise, "VALUE_NOISE"},
}};

constexpr std::array<std::pair<Metric, std::string_view>, 3> kMetricNames{{
    {Metric::Euclidean, "EUCLIDEAN"},
    {Metric::Manhattan, "MANHATTAN"},
    {Metric::Chebyshev, "CHEBYSHEV"},
}};

constexpr std::array<std::pair<Sampling, std::string_view>, 2> kSamplingNames{{
    {Sampling::NearestCell, "NEAREST_CELL"},
    {Sampling::Bilinear, "BILINEAR"},
}};

template <typename Enum, std::size_t N>
std::string_view enum_name(Enum v, const std::array<std::pair<Enum, std::string_view>, N>& table) {
    for (const auto& [value, label] : table)
        if (value == v) return label;
    return "?";
}

}  // namespace

std::string_view to_string(Basis b) { return enum_name(b, kBasisNames); }
std::string_view to_string(Metric m) { return enum_name(m, kMetricNames); }
std::string_view to_string(Sampling s) { return enum_name(s, kSamplingNames); }
Basis parse_basis(std::string_view name) { return parse_enum(name, kBasisNames, "basis"); }
Metric parse_metric(std::string_view name) { return parse_enum(name, kMetricNames, "distance metric"); }
Sampling parse_sampling(std::string_view name) { return parse_enum(name, kSamplingNames, "sampling mode"); }

std::string basis_spec_json(const BasisSpec& spec) {
    const nlohmann::json j = {
        {"kind", to_string(spec.kind)},   {"seed", spec.seed},   {"zoom", spec.zoom},
        {"distance_metric", to_string(spec.metric)}, {"width", spec.width}, {"height", spec.height},
    };
    return j.dump(2);
}

BasisSpec basis_spec_from_json(std::string_view text) {
    const auto j = nlohmann::json::parse(text);
    BasisSpec spec;
    spec.kind = parse_basis(j.value("kind", std::string(to_string(spec.kind))));
    spec.seed = j.value("seed", spec.seed);
    spec.zoom = j.value("zoom", spec.zoom);
    spec.metric = parse_metric(j.value("distance_metric", std::string(to_string(spec.metric))));
    spec.width = j.value("width", spec.width);
    spec.height = j.value("height", spec.height);
    spec.validate();
    return spec;
}

void write_terrain_files(const Terrain<double>& terrain, const std::string& pgm_path) {
    namespace fs = std::filesystem;
    const fs::path image(pgm_path);
    fs::path sidecar = image;
    sidecar.replace_extension(".json");

    std::ofstream img(image, std::ios::binary);
    if (!img) throw std::runtime_error("cannot open " + image.string() + " for writing");
    const auto bytes = export_pgm(terrain);
    img.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    if (!img) throw std::runtime_error("failed writing " + image.string());

    std::ofstream meta(sidecar);
    if (!meta) throw std::runtime_error("cannot open " + sidecar.string() + " for writing");
    meta << basis_spec_json(terrain.spec) << '\n';
}

}  // namespace xmt
