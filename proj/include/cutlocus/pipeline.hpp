#pragma once

#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <optional>
#include <random>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "cutlocus/config.hpp"
#include "cutlocus/cutlocus.hpp"
#include "cutlocus/export.hpp"
#include "cutlocus/fem.hpp"
#include "cutlocus/mesh.hpp"
#include "cutlocus/mesh_io.hpp"
#include "cutlocus/oracle.hpp"
#include "cutlocus/solver.hpp"
#include "cutlocus/study.hpp"
#include "cutlocus/surface.hpp"

namespace cutlocus {

/// What a run produced. The summary holds only reproducible values; wall
/// times go to `timings` and a separate file.
struct RunOutcome {
    Json summary;
    Json timings;
    bool converged = true;
};

namespace detail {

class StageClock {
public:
    double lap() {
        const auto now = std::chrono::steady_clock::now();
        const double s = std::chrono::duration<double>(now - last_).count();
        last_ = now;
        return s;
    }
    double total() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

private:
    std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
    std::chrono::steady_clock::time_point last_ = start_;
};

inline std::ofstream open_output(const std::filesystem::path& path) {
    std::ofstream out(path);
    if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
    return out;
}

inline void close_output(std::ofstream& out, const std::filesystem::path& path) {
    out.close();
    if (!out) throw Error(ErrorKind::Io, "write failed for '" + path.string() + "'");
}

inline void prepare_output_dir(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) {
        throw Error(ErrorKind::Io, "cannot create output directory '" + dir.string() + "'");
    }
}

inline void write_json(const std::filesystem::path& path, const Json& j) {
    auto out = open_output(path);
    out << j.dump(2) << '\n';
    close_output(out, path);
}

inline bool wants(const RunConfig& c, const char* format) {
    return std::find(c.formats.begin(), c.formats.end(), format) != c.formats.end();
}

/// The resolved config minus the output directory.
inline Json summary_config(const RunConfig& c) {
    Json j = c.resolved;
    if (j.contains("output") && j["output"].is_object()) j["output"].erase("directory");
    return j;
}

inline Json mesh_summary(const SurfaceMesh& mesh) {
    return {{"vertices", mesh.num_vertices()},   {"faces", mesh.num_triangles()}, {"edges", mesh.num_edges()},
            {"euler", mesh.euler_characteristic()}, {"genus", mesh.genus()},       {"h_max", mesh.h_max()},
            {"area", mesh.total_area()},           {"bbox_diameter", mesh.bbox_diameter()}};
}

}  // namespace detail

inline SurfaceMesh build_mesh(const RunConfig& c) {
    if (c.generator) {
        const auto& g = *c.generator;
        if (g.type == "sphere") return generate_sphere(g.radius, g.subdivisions, g.center);
        return generate_torus(g.major, g.minor, g.nu, g.nv);
    }
    return load_mesh(*c.mesh_path);
}

inline std::optional<AnalyticSurface> analytic_surface(const RunConfig& c) {
    if (!c.generator) return std::nullopt;
    if (c.generator->type == "sphere") return AnalyticSurface(Sphere{c.generator->center, c.generator->radius});
    return AnalyticSurface(Torus{c.generator->major, c.generator->minor});
}

inline double default_m(const SurfaceMesh& mesh) { return 50.0 / mesh.bbox_diameter(); }

inline std::vector<double> resolved_lambdas(const RunConfig& c, const SurfaceMesh& mesh) {
    return c.lambdas.value_or(std::vector<double>{0.1 * mesh.bbox_diameter()});
}

/// Seeded sample of `count` distinct vertices (partial Fisher-Yates).
inline std::vector<int> sample_vertices(int num_vertices, int count, std::uint64_t seed) {
    require(count >= 1 && count <= num_vertices, "random source count must lie in [1, vertex count]");
    std::vector<int> idx(num_vertices);
    std::iota(idx.begin(), idx.end(), 0);
    std::mt19937_64 rng(seed);
    for (int i = 0; i < count; ++i) {
        std::uniform_int_distribution<int> pick(i, num_vertices - 1);
        std::swap(idx[i], idx[pick(rng)]);
    }
    idx.resize(count);
    return idx;
}

/// Vertices nearest to the four vertices of a regular tetrahedron inscribed
/// about the bounding-box center at the mean vertex radius.
inline std::vector<int> tetrahedral_sources(const SurfaceMesh& mesh) {
    Vec3 lo = mesh.vertex(0), hi = mesh.vertex(0);
    for (const auto& p : mesh.vertices()) {
        lo = lo.cwiseMin(p);
        hi = hi.cwiseMax(p);
    }
    const Vec3 center = 0.5 * (lo + hi);
    double radius = 0.0;
    for (const auto& p : mesh.vertices()) radius += (p - center).norm();
    radius /= mesh.num_vertices();
    const Vec3 dirs[] = {{1, 1, 1}, {1, -1, -1}, {-1, 1, -1}, {-1, -1, 1}};
    std::vector<int> out;
    for (const auto& d : dirs) out.push_back(mesh.nearest_vertex(center + radius * d.normalized()));
    return out;
}

inline std::vector<int> resolve_sources(const RunConfig& c, const SurfaceMesh& mesh) {
    const auto& s = c.source;
    std::vector<int> out;
    switch (s.mode) {
        case SourceMode::Point: out = {mesh.nearest_vertex(s.point)}; break;
        case SourceMode::Vertex: out = {s.vertex}; break;
        case SourceMode::Points:
            for (const auto& p : s.points) out.push_back(mesh.nearest_vertex(p));
            break;
        case SourceMode::Vertices: out = s.vertices; break;
        case SourceMode::Random: out = sample_vertices(mesh.num_vertices(), s.count, c.seed); break;
        case SourceMode::Tetrahedral: out = tetrahedral_sources(mesh); break;
    }
    require(!out.empty(), "source list is empty");
    for (int v : out) require(v >= 0 && v < mesh.num_vertices(), "source vertex " + std::to_string(v) + " out of range");
    std::vector<int> sorted = out;
    std::sort(sorted.begin(), sorted.end());
    require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "sources snap to the same vertex");
    return out;
}

namespace detail {

inline RunOutcome run_field(const RunConfig& c, bool voronoi) {
    if (c.deterministic) Eigen::setNbThreads(1);
    StageClock clock;
    RunOutcome outcome;
    prepare_output_dir(c.output_dir);

    const SurfaceMesh mesh = build_mesh(c);
    const auto sources = resolve_sources(c, mesh);
    if (voronoi) require(sources.size() >= 2, "Voronoi mode needs at least two sources");
    const auto lambdas = resolved_lambdas(c, mesh);
    SolveParams params = c.params;
    if (!c.m_given) params.m = default_m(mesh);
    params.record_history = true;
    outcome.timings["mesh"] = clock.lap();

    const FunctionSpace space = build_space(mesh, c.order, c.g, c.quadrature_degree);
    const QuadraticForm form = assemble(space);
    outcome.timings["assemble"] = clock.lap();

    const SolutionField sol = solve(form, space, SourceSet(sources, space.num_dofs()), params);
    outcome.converged = sol.converged;
    outcome.timings["solve"] = clock.lap();

    std::vector<CutLocusSet> raw_sets, sets;
    for (double l : lambdas) {
        raw_sets.push_back(extract(sol, space, l));
        sets.push_back(filter(raw_sets.back(), mesh, c.filter_fraction));
    }
    std::optional<VoronoiLabeling> labels;
    std::vector<Vec3> reference;
    const auto surface = analytic_surface(c);
    if (voronoi) {
        if (surface && surface->sphere()) {
            const auto& sp = *surface->sphere();
            labels = label_cells(mesh, sources, DistanceOracle::analytic_sphere(mesh, sp, sources));
            std::vector<Vec3> pts;
            for (int v : sources) pts.push_back(mesh.vertex(v));
            reference = spherical_voronoi_boundary(sp.center, sp.radius, pts);
        } else {
            labels = label_cells(mesh, sources, c.steiner_level);
        }
    }
    outcome.timings["extract"] = clock.lap();

    Json files = Json::array();
    const auto& dir = c.output_dir;
    {
        const auto path = dir / "solution.txt";
        auto out = open_output(path);
        write_solution(out, sol, c.order, c.g);
        close_output(out, path);
        files.push_back("solution.txt");
    }
    if (wants(c, "csv")) {
        const auto path = dir / "iterations.csv";
        auto out = open_output(path);
        write_iteration_log(out, sol.history);
        close_output(out, path);
        files.push_back("iterations.csv");
        for (std::size_t i = 0; i < sets.size(); ++i) {
            const std::string name = "components_" + std::to_string(i) + ".csv";
            auto cout = open_output(dir / name);
            write_component_csv(cout, sets[i]);
            close_output(cout, dir / name);
            files.push_back(name);
        }
    }
    if (wants(c, "vtk")) {
        MeshFields fields;
        const int nv = mesh.num_vertices();
        fields.point_data.push_back({"u", std::vector<double>(sol.coeffs.data(), sol.coeffs.data() + nv)});
        fields.point_data.push_back({"grad_norm", nearest_point_values(space, sol.gradient_norms)});
        fields.point_data.push_back({"graph_distance", graph_distance(mesh, sources, 0)});
        fields.cell_data.push_back({"grad_norm_max", triangle_max(space, sol.gradient_norms)});
        for (std::size_t i = 0; i < sets.size(); ++i) {
            fields.cell_data.push_back({"E_" + std::to_string(i), to_doubles(sets[i].triangle_flags)});
            fields.cell_data.push_back({"component_" + std::to_string(i), to_doubles(sets[i].component_of)});
        }
        if (labels) {
            fields.cell_data.push_back({"voronoi_label", to_doubles(labels->triangle_labels)});
            fields.point_data.push_back({"voronoi_vertex_label", to_doubles(labels->vertex_labels)});
        }
        const auto path = dir / "field.vtk";
        auto out = open_output(path);
        write_vtk(out, mesh, fields);
        close_output(out, path);
        files.push_back("field.vtk");
    }
    if (wants(c, "ply")) {
        const auto path = dir / "field.ply";
        auto out = open_output(path);
        write_colored_ply(out, mesh, face_colors(sets.front(), labels ? &labels->triangle_labels : nullptr));
        close_output(out, path);
        files.push_back("field.ply");
    }
    outcome.timings["export"] = clock.lap();

    Json& s = outcome.summary;
    s["command"] = voronoi ? "voronoi" : "solve";
    s["config"] = summary_config(c);
    s["mesh"] = mesh_summary(mesh);
    s["space"] = {{"order", c.order},
                  {"g", space.points_per_triangle()},
                  {"dofs", space.num_dofs()},
                  {"constraint_points", space.num_constraint_points()}};
    s["sources"] = sources;
    s["solver"] = {{"m", params.m},
                   {"converged", sol.converged},
                   {"iterations", sol.iterations},
                   {"final_rho", sol.final_rho},
                   {"rho_updates", sol.rho_updates},
                   {"objective", sol.objective},
                   {"primal_residual", sol.primal_residual},
                   {"dual_residual", sol.dual_residual},
                   {"max_gradient_norm", sol.max_gradient_norm},
                   {"raw_max_gradient_norm", sol.raw_max_gradient_norm},
                   {"audit_max_gradient_norm", audit_max_gradient(space, sol.coeffs)},
                   {"min_coefficient", sol.coeffs.minCoeff()},
                   {"max_coefficient", sol.coeffs.maxCoeff()}};
    Json ex = Json::array();
    for (std::size_t i = 0; i < sets.size(); ++i) {
        Json areas = Json::array();
        for (const auto& comp : sets[i].components) areas.push_back(comp.area);
        Json e = {{"lambda", lambdas[i]},
                  {"filter_fraction", c.filter_fraction},
                  {"flagged_area", sets[i].flagged_area},
                  {"flagged_triangles", sets[i].flagged_triangle_count()},
                  {"raw_component_count", raw_sets[i].components.size()},
                  {"component_count", sets[i].components.size()},
                  {"component_areas", areas},
                  {"empty_warning", sets[i].empty_warning}};
        if (!reference.empty() && !sets[i].empty()) {
            const auto h = hausdorff_to_reference(sets[i], reference);
            e["hausdorff"] = {{"set_to_reference", h.set_to_reference}, {"reference_to_set", h.reference_to_set}};
        }
        ex.push_back(e);
    }
    s["extraction"] = ex;
    if (labels) {
        std::vector<int> counts(sources.size(), 0);
        for (int l : labels->triangle_labels) ++counts[l];
        s["voronoi"] = {{"oracle", surface && surface->sphere() ? "analytic_sphere" : "graph"},
                        {"cell_triangle_counts", counts}};
    }
    files.push_back("summary.json");
    files.push_back("timings.json");
    s["files"] = files;

    write_json(dir / "summary.json", s);
    outcome.timings["total"] = clock.total();
    write_json(dir / "timings.json", outcome.timings);
    return outcome;
}

}  // namespace detail

/// Generates or loads the mesh, solves, extracts E for every lambda and writes
/// the artifact bundle into the output directory.
inline RunOutcome run_solve(const RunConfig& c) { return detail::run_field(c, false); }

/// run_solve with at least two sources plus the Voronoi labeling channel.
inline RunOutcome run_voronoi(const RunConfig& c) { return detail::run_field(c, true); }

/// Refinement study on a generator input: levels from c.study.levels, the
/// generator's resolution being the first level.
inline RunOutcome run_study(const RunConfig& c) {
    if (c.deterministic) Eigen::setNbThreads(1);
    detail::StageClock clock;
    require(c.generator.has_value(), "study needs a generator input (refinement requires an analytic surface)");
    require(!c.study.levels.empty(), "study.levels must not be empty");
    detail::prepare_output_dir(c.output_dir);

    const auto& gen = *c.generator;
    const AnalyticSurface surface = *analytic_surface(c);
    const SurfaceMesh base = gen.type == "sphere" ? generate_sphere(gen.radius, c.study.levels.front(), gen.center)
                                                  : generate_torus(gen.major, gen.minor, gen.nu, gen.nv);
    const double diam = base.bbox_diameter();

    StudyOptions opt;
    opt.levels = c.study.levels;
    opt.m_values = c.study.m_values.value_or(std::vector<double>{10 / diam, 25 / diam, 50 / diam, 100 / diam});
    opt.lambda = resolved_lambdas(c, base).front();
    opt.filter_fraction = c.filter_fraction;
    opt.order = c.order;
    opt.g = c.g;
    opt.quadrature_degree = c.quadrature_degree;
    opt.params = c.params;
    switch (c.source.mode) {
        case SourceMode::Point: opt.source_point = c.source.point; break;
        case SourceMode::Vertex:
            require(c.source.vertex >= 0 && c.source.vertex < base.num_vertices(), "source vertex out of range");
            opt.source_point = base.vertex(c.source.vertex);
            break;
        default: throw Error(ErrorKind::Validation, "study needs a single point or vertex source");
    }

    const StudyReport report = run_convergence_study(base, surface, opt);

    RunOutcome outcome;
    for (const auto& r : report.rows) outcome.converged = outcome.converged && r.converged;
    const auto& dir = c.output_dir;
    {
        auto out = detail::open_output(dir / "study.csv");
        write_study_csv(out, report);
        detail::close_output(out, dir / "study.csv");
        auto fits = detail::open_output(dir / "fits.csv");
        write_fit_csv(fits, report);
        detail::close_output(fits, dir / "fits.csv");
    }

    Json rows = Json::array();
    for (const auto& r : report.rows) {
        rows.push_back({{"m", r.m},
                        {"level", r.level},
                        {"h", r.h},
                        {"triangles", r.triangles},
                        {"dofs", r.dofs},
                        {"objective", r.objective},
                        {"objective_gap", r.objective_gap},
                        {"l1_error", r.l1_error},
                        {"l2_gradient_error", r.l2_gradient_error},
                        {"symdiff_area", r.symdiff_area},
                        {"flagged_area", r.flagged_area},
                        {"components", r.components},
                        {"iterations", r.iterations},
                        {"converged", r.converged}});
    }
    auto fit_json = [](const ConvergenceFit& f) -> Json {
        if (!f.valid()) return {{"order", nullptr}, {"points", f.points}};
        return {{"order", f.slope}, {"intercept", f.intercept}, {"points", f.points}};
    };
    Json fits = Json::array();
    for (const auto& f : report.fits) {
        fits.push_back({{"m", f.m},
                        {"l1", fit_json(f.l1)},
                        {"l2_gradient", fit_json(f.l2_gradient)},
                        {"objective", fit_json(f.objective)},
                        {"symdiff", fit_json(f.symdiff)}});
    }
    outcome.summary = {{"command", "study"},
                       {"config", detail::summary_config(c)},
                       {"lambda", opt.lambda},
                       {"rows", rows},
                       {"fits", fits},
                       {"files", {"study.csv", "fits.csv", "summary.json", "timings.json"}}};
    detail::write_json(dir / "summary.json", outcome.summary);
    outcome.timings["total"] = clock.total();
    detail::write_json(dir / "timings.json", outcome.timings);
    return outcome;
}

struct ExportRequest {
    std::filesystem::path mesh;
    std::filesystem::path solution;
    std::vector<double> lambdas{0.1};
    double filter_fraction = 1e-3;
    std::filesystem::path output_dir = "out";
    std::vector<std::string> formats{"vtk", "ply", "csv"};
};

/// Re-extracts E from a stored solution and writes VTK / PLY / component CSVs.
inline Json run_export(const ExportRequest& req) {
    require(!req.lambdas.empty(), "lambdas must not be empty");
    const SurfaceMesh mesh = load_mesh(req.mesh);
    std::ifstream in(req.solution);
    if (!in) throw Error(ErrorKind::Io, "cannot open '" + req.solution.string() + "'");
    const StoredSolution stored = read_solution(in);
    const FunctionSpace space = build_space(mesh, stored.order, stored.g);
    check_dims(space, stored.coeffs);
    detail::prepare_output_dir(req.output_dir);

    std::vector<Vec2> grads;
    std::vector<double> norms;
    double max_norm = 0.0;
    detail::fill_gradients(space, stored.coeffs, grads, norms, max_norm);
    std::vector<CutLocusSet> sets;
    for (double l : req.lambdas) sets.push_back(filter(extract(stored.coeffs, norms, space, l), mesh, req.filter_fraction));

    const auto has = [&](const char* f) { return std::find(req.formats.begin(), req.formats.end(), f) != req.formats.end(); };
    Json files = Json::array();
    if (has("vtk")) {
        MeshFields fields;
        fields.point_data.push_back(
            {"u", std::vector<double>(stored.coeffs.data(), stored.coeffs.data() + mesh.num_vertices())});
        fields.point_data.push_back({"grad_norm", nearest_point_values(space, norms)});
        fields.cell_data.push_back({"grad_norm_max", triangle_max(space, norms)});
        for (std::size_t i = 0; i < sets.size(); ++i) {
            fields.cell_data.push_back({"E_" + std::to_string(i), to_doubles(sets[i].triangle_flags)});
            fields.cell_data.push_back({"component_" + std::to_string(i), to_doubles(sets[i].component_of)});
        }
        auto out = detail::open_output(req.output_dir / "field.vtk");
        write_vtk(out, mesh, fields);
        detail::close_output(out, req.output_dir / "field.vtk");
        files.push_back("field.vtk");
    }
    if (has("ply")) {
        auto out = detail::open_output(req.output_dir / "field.ply");
        write_colored_ply(out, mesh, face_colors(sets.front()));
        detail::close_output(out, req.output_dir / "field.ply");
        files.push_back("field.ply");
    }
    if (has("csv")) {
        for (std::size_t i = 0; i < sets.size(); ++i) {
            const std::string name = "components_" + std::to_string(i) + ".csv";
            auto out = detail::open_output(req.output_dir / name);
            write_component_csv(out, sets[i]);
            detail::close_output(out, req.output_dir / name);
            files.push_back(name);
        }
    }
    Json ex = Json::array();
    for (std::size_t i = 0; i < sets.size(); ++i)
        ex.push_back({{"lambda", req.lambdas[i]},
                      {"flagged_area", sets[i].flagged_area},
                      {"component_count", sets[i].components.size()}});
    return {{"command", "export"}, {"max_gradient_norm", max_norm}, {"extraction", ex}, {"files", files}};
}

}  // namespace cutlocus
