// Command-line front end: gen, solve, voronoi, study, export, validate.
//
// Exit codes: 0 success, 1 validation error, 2 solver non-convergence, 3 I/O error.

#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "cutlocus/config.hpp"
#include "cutlocus/mesh_io.hpp"
#include "cutlocus/pipeline.hpp"

namespace {

using namespace cutlocus;

constexpr int kExitValidation = 1;
constexpr int kExitNotConverged = 2;
constexpr int kExitIo = 3;

struct RunArgs {
    std::string config;
    std::string preset;
    std::string out;
};

/// `--dotted.key value` or `--dotted.key=value` pairs left over by CLI11.
std::vector<std::pair<std::string, std::string>> parse_overrides(const std::vector<std::string>& extra) {
    std::vector<std::pair<std::string, std::string>> out;
    for (std::size_t i = 0; i < extra.size(); ++i) {
        const std::string& tok = extra[i];
        if (tok.rfind("--", 0) != 0 || tok.size() <= 2) throw Error(ErrorKind::Validation, "unexpected argument '" + tok + "'");
        const std::string body = tok.substr(2);
        if (const auto eq = body.find('='); eq != std::string::npos) {
            out.emplace_back(body.substr(0, eq), body.substr(eq + 1));
        } else {
            if (i + 1 >= extra.size()) throw Error(ErrorKind::Validation, "override '" + tok + "' needs a value");
            out.emplace_back(body, extra[++i]);
        }
    }
    return out;
}

RunConfig assemble_config(const RunArgs& args, const std::vector<std::string>& extra) {
    Json doc = Json::object();
    if (!args.preset.empty()) doc = preset_json(args.preset);
    if (!args.config.empty()) doc.merge_patch(load_json_file(args.config));
    if (!args.out.empty()) apply_override(doc, "output.directory", args.out);
    for (const auto& [k, v] : parse_overrides(extra)) apply_override(doc, k, v);
    return parse_config(doc);
}

void add_run_options(CLI::App* sub, RunArgs& args) {
    sub->add_option("-c,--config", args.config, "JSON config file");
    sub->add_option("-p,--preset", args.preset, "built-in config: sphere, torus, torus-p2, voronoi, study");
    sub->add_option("-o,--out", args.out, "output directory (same as --output.directory)");
    sub->allow_extras();
    sub->footer("Any config field can be set with --<dotted.name> <value>, e.g. --solver.m 50.");
}

int report(const RunOutcome& outcome, const std::string& dir) {
    std::cout << outcome.summary.dump(2) << '\n';
    std::cerr << "artifacts written to " << dir << '\n';
    if (!outcome.converged) {
        std::cerr << "solver did not converge\n";
        return kExitNotConverged;
    }
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Cut locus approximation on closed triangulated surfaces"};
    app.require_subcommand(1);

    std::string gen_type = "sphere", gen_out;
    double radius = 1.0, major = 2.0, minor = 1.0;
    int subdivisions = 4, nu = 128, nv = 64;
    auto* gen = app.add_subcommand("gen", "generate an icosphere or torus mesh");
    gen->add_option("type", gen_type, "sphere or torus")->check(CLI::IsMember({"sphere", "torus"}));
    gen->add_option("-o,--out", gen_out, "output mesh (.off, .obj, .ply)")->required();
    gen->add_option("--radius", radius, "sphere radius");
    gen->add_option("--subdivisions", subdivisions, "icosphere subdivision level");
    gen->add_option("--major", major, "torus major radius");
    gen->add_option("--minor", minor, "torus minor radius");
    gen->add_option("--nu", nu, "torus segments around the axis");
    gen->add_option("--nv", nv, "torus segments around the tube");

    RunArgs solve_args, voronoi_args, study_args;
    auto* solve_cmd = app.add_subcommand("solve", "solve and extract the cut locus");
    add_run_options(solve_cmd, solve_args);
    auto* voronoi_cmd = app.add_subcommand("voronoi", "multi-source run with Voronoi labeling");
    add_run_options(voronoi_cmd, voronoi_args);
    auto* study_cmd = app.add_subcommand("study", "refinement study on a generator input");
    add_run_options(study_cmd, study_args);

    ExportRequest ereq;
    std::vector<double> export_lambdas;
    std::vector<std::string> export_formats;
    std::string export_mesh, export_solution, export_out = "out";
    auto* export_cmd = app.add_subcommand("export", "re-extract and export a stored solution");
    export_cmd->add_option("--mesh", export_mesh, "mesh file")->required();
    export_cmd->add_option("--solution", export_solution, "solution file written by solve")->required();
    export_cmd->add_option("--lambda", export_lambdas, "lambda values (repeatable)");
    export_cmd->add_option("--filter", ereq.filter_fraction, "minimum component area fraction");
    export_cmd->add_option("-o,--out", export_out, "output directory");
    export_cmd->add_option("--format", export_formats, "vtk, ply, csv (repeatable)");

    std::string validate_path;
    auto* validate_cmd = app.add_subcommand("validate", "check a mesh file and print its report");
    validate_cmd->add_option("mesh", validate_path, "mesh file")->required();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : kExitValidation;
    }

    try {
        if (*gen) {
            const SurfaceMesh mesh = gen_type == "sphere" ? generate_sphere(radius, subdivisions) : generate_torus(major, minor, nu, nv);
            save_mesh(gen_out, mesh.raw());
            std::cout << validate(mesh).to_key_value();
            return 0;
        }
        if (*solve_cmd) {
            const RunConfig c = assemble_config(solve_args, solve_cmd->remaining());
            return report(run_solve(c), c.output_dir.string());
        }
        if (*voronoi_cmd) {
            const RunConfig c = assemble_config(voronoi_args, voronoi_cmd->remaining());
            return report(run_voronoi(c), c.output_dir.string());
        }
        if (*study_cmd) {
            const RunConfig c = assemble_config(study_args, study_cmd->remaining());
            return report(run_study(c), c.output_dir.string());
        }
        if (*export_cmd) {
            ereq.mesh = export_mesh;
            ereq.solution = export_solution;
            ereq.output_dir = export_out;
            if (!export_lambdas.empty()) ereq.lambdas = export_lambdas;
            if (!export_formats.empty()) ereq.formats = export_formats;
            std::cout << run_export(ereq).dump(2) << '\n';
            return 0;
        }
        if (*validate_cmd) {
            const MeshReport r = validate(read_raw_mesh(validate_path));
            std::cout << r.to_key_value();
            for (const auto& v : r.violations) std::cerr << "violation: " << v << '\n';
            return r.valid() ? 0 : kExitValidation;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.kind() == ErrorKind::Io ? kExitIo : kExitValidation;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitValidation;
    }
    return 0;
}
