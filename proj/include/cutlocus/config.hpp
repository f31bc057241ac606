#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "cutlocus/error.hpp"
#include "cutlocus/mesh.hpp"
#include "cutlocus/solver.hpp"

namespace cutlocus {

using Json = nlohmann::ordered_json;

struct GeneratorSpec {
    std::string type;  ///< "sphere" or "torus"
    double radius = 1.0;
    int subdivisions = 4;
    Vec3 center = Vec3::Zero();
    double major = 2.0;
    double minor = 1.0;
    int nu = 128;
    int nv = 64;
};

enum class SourceMode { Point, Vertex, Points, Vertices, Random, Tetrahedral };

struct SourceSpec {
    SourceMode mode = SourceMode::Point;
    Vec3 point = Vec3(0, 0, 1);
    int vertex = 0;
    std::vector<Vec3> points;
    std::vector<int> vertices;
    int count = 4;  ///< random mode
};

struct StudySpec {
    std::vector<int> levels;
    std::optional<std::vector<double>> m_values;  ///< unset: {10, 25, 50, 100} / diam
};

struct RunConfig {
    std::optional<GeneratorSpec> generator;
    std::optional<std::filesystem::path> mesh_path;
    SourceSpec source;
    int order = 1;
    int g = 6;
    int quadrature_degree = 4;
    SolveParams params;
    bool m_given = false;  ///< unset m defaults to 50 / bbox diameter
    bool deterministic = true;
    std::optional<std::vector<double>> lambdas;  ///< unset: {0.1 * bbox diameter}
    double filter_fraction = 1e-3;
    int steiner_level = 1;
    std::filesystem::path output_dir = "out";
    std::vector<std::string> formats{"vtk", "ply", "csv"};
    std::uint64_t seed = 1;
    StudySpec study;
    Json resolved;  ///< the merged document this config was read from
};

inline Json default_config_json() {
    return Json::parse(R"({
  "input": {"generator": null, "mesh": null},
  "source": {"mode": "point", "point": [0, 0, 1], "vertex": 0, "points": [], "vertices": [], "count": 4},
  "order": 1,
  "g": 6,
  "quadrature_degree": 4,
  "solver": {
    "m": null, "rho": 0, "tol_primal": 1e-7, "tol_dual": 1e-7, "max_iters": 50000,
    "over_relaxation": 1.6, "adaptive_rho": true, "max_rho_updates": 10, "rho_update_interval": 25,
    "residual_balance": 300, "area_weighted": true, "deterministic": true
  },
  "lambdas": null,
  "filter_fraction": 0.001,
  "oracle": {"steiner_level": 1},
  "output": {"directory": "out", "formats": ["vtk", "ply", "csv"]},
  "seed": 1,
  "study": {"levels": [2, 3, 4, 5], "m_values": null}
})");
}

/// Built-in desk-scale configurations.
inline Json preset_json(const std::string& name) {
    if (name == "sphere") {
        return Json::parse(R"({
  "input": {"generator": {"type": "sphere", "radius": 1, "subdivisions": 4}},
  "source": {"mode": "point", "point": [0, 0, 1]},
  "solver": {"m": 50},
  "lambdas": [0.1]
})");
    }
    if (name == "torus") {
        return Json::parse(R"({
  "input": {"generator": {"type": "torus", "major": 2, "minor": 1, "nu": 128, "nv": 64}},
  "source": {"mode": "point", "point": [3, 0, 0]},
  "solver": {"m": 50, "max_iters": 200000},
  "lambdas": [0.1]
})");
    }
    if (name == "torus-p2") {
        return Json::parse(R"({
  "input": {"generator": {"type": "torus", "major": 2, "minor": 1, "nu": 64, "nv": 32}},
  "source": {"mode": "point", "point": [3, 0, 0]},
  "order": 2,
  "g": 3,
  "solver": {"m": 50, "max_iters": 200000},
  "lambdas": [0.1]
})");
    }
    if (name == "voronoi") {
        return Json::parse(R"({
  "input": {"generator": {"type": "sphere", "radius": 1, "subdivisions": 4}},
  "source": {"mode": "tetrahedral"},
  "order": 2,
  "g": 3,
  "solver": {"m": 50},
  "lambdas": [0.05]
})");
    }
    if (name == "study") {
        return Json::parse(R"({
  "input": {"generator": {"type": "sphere", "radius": 1, "subdivisions": 2}},
  "source": {"mode": "point", "point": [0, 0, 1]},
  "lambdas": [0.1],
  "study": {"levels": [2, 3, 4, 5], "m_values": [50]}
})");
    }
    throw Error(ErrorKind::Validation, "unknown preset '" + name + "' (sphere, torus, torus-p2, voronoi, study)");
}

/// Sets `key` (dotted path) to `value`, creating intermediate objects. The
/// value is read as JSON when it parses, otherwise as a string.
inline void apply_override(Json& doc, const std::string& key, const std::string& value) {
    require(!key.empty(), "empty override key");
    Json* node = &doc;
    std::size_t start = 0;
    while (true) {
        const std::size_t dot = key.find('.', start);
        const std::string part = key.substr(start, dot == std::string::npos ? std::string::npos : dot - start);
        require(!part.empty(), "malformed override key '" + key + "'");
        if (!node->is_object()) *node = Json::object();
        node = &(*node)[part];
        if (dot == std::string::npos) break;
        start = dot + 1;
    }
    Json parsed = Json::parse(value, nullptr, false);
    *node = parsed.is_discarded() ? Json(value) : parsed;
}

inline Json load_json_file(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error(ErrorKind::Io, "cannot open config '" + path.string() + "'");
    Json j = Json::parse(in, nullptr, false, true);
    if (j.is_discarded()) throw Error(ErrorKind::Parse, "config '" + path.string() + "' is not valid JSON");
    return j;
}

namespace detail {

/// Rejects keys of `actual` that the defaults do not know about.
inline void check_keys(const Json& actual, const Json& known, const std::string& prefix) {
    if (!actual.is_object() || !known.is_object()) return;
    for (auto it = actual.begin(); it != actual.end(); ++it) {
        const std::string path = prefix.empty() ? it.key() : prefix + "." + it.key();
        if (!known.contains(it.key())) throw Error(ErrorKind::Validation, "unknown config key '" + path + "'");
        // Generator objects are free-form and checked when read.
        if (path == "input.generator") continue;
        check_keys(it.value(), known[it.key()], path);
    }
}

template <class T>
T get(const Json& j, const char* key, const std::string& where) {
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::Validation, "config field '" + where + "." + key + "' has the wrong type or is missing");
    }
}

inline Vec3 get_vec3(const Json& j, const std::string& where) {
    if (!j.is_array() || j.size() != 3) throw Error(ErrorKind::Validation, "config field '" + where + "' must be a 3-vector");
    try {
        return {j[0].get<double>(), j[1].get<double>(), j[2].get<double>()};
    } catch (const nlohmann::json::exception&) {
        throw Error(ErrorKind::Validation, "config field '" + where + "' must hold numbers");
    }
}

inline GeneratorSpec parse_generator(const Json& j) {
    static const std::set<std::string> sphere_keys{"type", "radius", "subdivisions", "center"};
    static const std::set<std::string> torus_keys{"type", "major", "minor", "nu", "nv"};
    GeneratorSpec g;
    g.type = get<std::string>(j, "type", "input.generator");
    const auto& allowed = g.type == "sphere" ? sphere_keys : torus_keys;
    if (g.type != "sphere" && g.type != "torus") throw Error(ErrorKind::Validation, "generator type must be sphere or torus");
    for (auto it = j.begin(); it != j.end(); ++it)
        if (!allowed.count(it.key())) throw Error(ErrorKind::Validation, "unknown generator key '" + it.key() + "'");
    if (g.type == "sphere") {
        if (j.contains("radius")) g.radius = get<double>(j, "radius", "input.generator");
        if (j.contains("subdivisions")) g.subdivisions = get<int>(j, "subdivisions", "input.generator");
        if (j.contains("center")) g.center = get_vec3(j["center"], "input.generator.center");
    } else {
        if (j.contains("major")) g.major = get<double>(j, "major", "input.generator");
        if (j.contains("minor")) g.minor = get<double>(j, "minor", "input.generator");
        if (j.contains("nu")) g.nu = get<int>(j, "nu", "input.generator");
        if (j.contains("nv")) g.nv = get<int>(j, "nv", "input.generator");
    }
    return g;
}

inline SourceMode parse_source_mode(const std::string& s) {
    if (s == "point") return SourceMode::Point;
    if (s == "vertex") return SourceMode::Vertex;
    if (s == "points") return SourceMode::Points;
    if (s == "vertices") return SourceMode::Vertices;
    if (s == "random") return SourceMode::Random;
    if (s == "tetrahedral") return SourceMode::Tetrahedral;
    throw Error(ErrorKind::Validation, "unknown source mode '" + s + "'");
}

}  // namespace detail

/// Merges `doc` over the defaults and reads it; throws Validation on any bad field.
inline RunConfig parse_config(const Json& doc) {
    const Json defaults = default_config_json();
    if (!doc.is_object()) throw Error(ErrorKind::Validation, "config must be a JSON object");
    detail::check_keys(doc, defaults, "");
    Json j = defaults;
    j.merge_patch(doc);
    // merge_patch treats null as deletion; restore the nullable fields.
    for (const auto& [section, key] : {std::pair{"input", "generator"}, {"input", "mesh"}, {"solver", "m"}, {"study", "m_values"}})
        if (!j[section].contains(key)) j[section][key] = nullptr;
    if (!j.contains("lambdas")) j["lambdas"] = nullptr;

    RunConfig c;
    c.resolved = j;
    using detail::get;

    const Json& input = j["input"];
    if (!input["generator"].is_null()) c.generator = detail::parse_generator(input["generator"]);
    if (!input["mesh"].is_null()) c.mesh_path = get<std::string>(input, "mesh", "input");
    require(c.generator.has_value() != c.mesh_path.has_value(), "config needs exactly one input (input.generator or input.mesh)");

    const Json& src = j["source"];
    c.source.mode = detail::parse_source_mode(get<std::string>(src, "mode", "source"));
    c.source.point = detail::get_vec3(src["point"], "source.point");
    c.source.vertex = get<int>(src, "vertex", "source");
    for (const auto& p : src["points"]) c.source.points.push_back(detail::get_vec3(p, "source.points[]"));
    c.source.vertices = get<std::vector<int>>(src, "vertices", "source");
    c.source.count = get<int>(src, "count", "source");

    c.order = get<int>(j, "order", "");
    c.g = get<int>(j, "g", "");
    c.quadrature_degree = get<int>(j, "quadrature_degree", "");
    require(c.order == 1 || c.order == 2, "order must be 1 or 2");

    const Json& s = j["solver"];
    c.m_given = !s["m"].is_null();
    if (c.m_given) c.params.m = get<double>(s, "m", "solver");
    c.params.rho = get<double>(s, "rho", "solver");
    c.params.tol_primal = get<double>(s, "tol_primal", "solver");
    c.params.tol_dual = get<double>(s, "tol_dual", "solver");
    c.params.max_iters = get<int>(s, "max_iters", "solver");
    c.params.over_relaxation = get<double>(s, "over_relaxation", "solver");
    c.params.adaptive_rho = get<bool>(s, "adaptive_rho", "solver");
    c.params.max_rho_updates = get<int>(s, "max_rho_updates", "solver");
    c.params.rho_update_interval = get<int>(s, "rho_update_interval", "solver");
    c.params.residual_balance = get<double>(s, "residual_balance", "solver");
    c.params.area_weighted = get<bool>(s, "area_weighted", "solver");
    c.deterministic = get<bool>(s, "deterministic", "solver");
    require(c.params.rho >= 0.0, "solver.rho must be >= 0 (0 selects the default)");
    c.params.validate();

    if (!j["lambdas"].is_null()) {
        c.lambdas = get<std::vector<double>>(j, "lambdas", "");
        require(!c.lambdas->empty(), "lambdas must not be empty");
        for (double l : *c.lambdas) require(l > 0.0, "lambdas must be positive");
    }
    c.filter_fraction = get<double>(j, "filter_fraction", "");
    require(c.filter_fraction >= 0.0 && c.filter_fraction < 1.0, "filter_fraction must lie in [0, 1)");
    c.steiner_level = get<int>(j["oracle"], "steiner_level", "oracle");
    require(c.steiner_level >= 0, "oracle.steiner_level must be >= 0");

    c.output_dir = get<std::string>(j["output"], "directory", "output");
    c.formats = get<std::vector<std::string>>(j["output"], "formats", "output");
    for (const auto& f : c.formats)
        require(f == "vtk" || f == "ply" || f == "csv", "unknown output format '" + f + "' (vtk, ply, csv)");
    c.seed = get<std::uint64_t>(j, "seed", "");

    c.study.levels = get<std::vector<int>>(j["study"], "levels", "study");
    if (!j["study"]["m_values"].is_null()) c.study.m_values = get<std::vector<double>>(j["study"], "m_values", "study");
    return c;
}

}  // namespace cutlocus
