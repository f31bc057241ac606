#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <limits>
#include <map>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "cutlocus/cutlocus.hpp"
#include "cutlocus/error.hpp"
#include "cutlocus/fem.hpp"
#include "cutlocus/mesh.hpp"

namespace cutlocus {

/// Round-trip text form of a double.
inline std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

struct NamedArray {
    std::string name;
    std::vector<double> values;
};

/// Point and cell scalar channels for a triangle mesh.
struct MeshFields {
    std::vector<NamedArray> point_data;
    std::vector<NamedArray> cell_data;
};

inline void write_vtk(std::ostream& os, const SurfaceMesh& mesh, const MeshFields& fields,
                      const std::string& title = "cutlocus") {
    const int nv = mesh.num_vertices(), nt = mesh.num_triangles();
    for (const auto& a : fields.point_data)
        require(static_cast<int>(a.values.size()) == nv, "point array '" + a.name + "' has the wrong length", ErrorKind::Dimension);
    for (const auto& a : fields.cell_data)
        require(static_cast<int>(a.values.size()) == nt, "cell array '" + a.name + "' has the wrong length", ErrorKind::Dimension);

    os << "# vtk DataFile Version 3.0\n" << title << "\nASCII\nDATASET POLYDATA\n";
    os << "POINTS " << nv << " double\n";
    for (const auto& p : mesh.vertices())
        os << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
    os << "POLYGONS " << nt << ' ' << 4 * nt << '\n';
    for (const auto& t : mesh.triangles()) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    auto section = [&](const char* kind, int count, const std::vector<NamedArray>& arrays) {
        if (arrays.empty()) return;
        os << kind << ' ' << count << '\n';
        for (const auto& a : arrays) {
            os << "SCALARS " << a.name << " double 1\nLOOKUP_TABLE default\n";
            for (double v : a.values) os << format_double(v) << '\n';
        }
    };
    section("CELL_DATA", nt, fields.cell_data);
    section("POINT_DATA", nv, fields.point_data);
}

/// Reader for the subset written by write_vtk.
struct VtkData {
    RawMesh mesh;
    std::map<std::string, std::vector<double>> point_data;
    std::map<std::string, std::vector<double>> cell_data;
};

inline VtkData read_vtk(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line.rfind("# vtk DataFile", 0) != 0) throw Error(ErrorKind::Parse, "missing VTK header");
    std::getline(in, line);
    std::string tok;
    in >> tok;
    if (tok != "ASCII") throw Error(ErrorKind::Parse, "only ASCII VTK is supported");
    in >> tok >> tok;
    if (tok != "POLYDATA") throw Error(ErrorKind::Parse, "expected POLYDATA");

    VtkData out;
    std::map<std::string, std::vector<double>>* target = nullptr;
    long count = 0;
    while (in >> tok) {
        if (tok == "POINTS") {
            std::string type;
            in >> count >> type;
            out.mesh.vertices.resize(count);
            for (auto& p : out.mesh.vertices) in >> p.x() >> p.y() >> p.z();
        } else if (tok == "POLYGONS") {
            long total = 0;
            in >> count >> total;
            out.mesh.triangles.resize(count);
            for (auto& t : out.mesh.triangles) {
                int n = 0;
                in >> n;
                if (n != 3) throw Error(ErrorKind::Parse, "only triangles are supported");
                in >> t[0] >> t[1] >> t[2];
            }
        } else if (tok == "CELL_DATA" || tok == "POINT_DATA") {
            in >> count;
            target = tok == "CELL_DATA" ? &out.cell_data : &out.point_data;
        } else if (tok == "SCALARS") {
            if (!target) throw Error(ErrorKind::Parse, "SCALARS outside a data section");
            std::string name, type, lut, lut_name;
            int comps = 1;
            in >> name >> type >> comps >> lut >> lut_name;
            auto& v = (*target)[name];
            v.resize(count);
            for (auto& x : v) in >> x;
        } else {
            throw Error(ErrorKind::Parse, "unexpected VTK token '" + tok + "'");
        }
        if (!in) throw Error(ErrorKind::Parse, "truncated VTK file");
    }
    return out;
}

using Rgb = std::array<std::uint8_t, 3>;

/// Distinct, deterministic colors for small integer labels.
inline Rgb label_color(int label) {
    static constexpr Rgb palette[] = {{228, 26, 28},  {55, 126, 184}, {77, 175, 74},  {152, 78, 163},
                                      {255, 127, 0},  {166, 86, 40},  {247, 129, 191}, {0, 139, 139},
                                      {188, 189, 34}, {23, 190, 207}};
    constexpr int n = sizeof palette / sizeof palette[0];
    return palette[((label % n) + n) % n];
}

inline void write_colored_ply(std::ostream& os, const SurfaceMesh& mesh, const std::vector<Rgb>& face_colors) {
    require(static_cast<int>(face_colors.size()) == mesh.num_triangles(), "one color per face is required", ErrorKind::Dimension);
    os << "ply\nformat ascii 1.0\nelement vertex " << mesh.num_vertices()
       << "\nproperty double x\nproperty double y\nproperty double z\nelement face " << mesh.num_triangles()
       << "\nproperty list uchar int vertex_indices\nproperty uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
    for (const auto& p : mesh.vertices())
        os << format_double(p.x()) << ' ' << format_double(p.y()) << ' ' << format_double(p.z()) << '\n';
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& f = mesh.triangle(t);
        const auto& c = face_colors[t];
        os << "3 " << f[0] << ' ' << f[1] << ' ' << f[2] << ' ' << int(c[0]) << ' ' << int(c[1]) << ' ' << int(c[2]) << '\n';
    }
}

/// Flagged faces in their component color, the rest light gray (or tinted by
/// the Voronoi label when one is given).
inline std::vector<Rgb> face_colors(const CutLocusSet& set, const std::vector<int>* labels = nullptr) {
    std::vector<Rgb> out(set.triangle_flags.size(), Rgb{200, 200, 200});
    for (std::size_t t = 0; t < out.size(); ++t) {
        if (set.component_of[t] >= 0) {
            out[t] = labels ? Rgb{20, 20, 20} : label_color(set.component_of[t]);
        } else if (labels) {
            const Rgb c = label_color((*labels)[t]);
            out[t] = {static_cast<std::uint8_t>((c[0] + 255) / 2), static_cast<std::uint8_t>((c[1] + 255) / 2),
                      static_cast<std::uint8_t>((c[2] + 255) / 2)};
        }
    }
    return out;
}

/// Per-vertex value of a per-constraint-point quantity: the value at the
/// nearest constraint point among the incident triangles (lowest index on ties).
inline std::vector<double> nearest_point_values(const FunctionSpace& space, const std::vector<double>& point_values) {
    require(static_cast<int>(point_values.size()) == space.num_constraint_points(), "point values do not match the space",
            ErrorKind::Dimension);
    const auto& mesh = space.mesh();
    const int g = space.points_per_triangle();
    const auto incident = mesh.vertex_triangles();
    std::vector<double> out(mesh.num_vertices(), 0.0);
    for (int v = 0; v < mesh.num_vertices(); ++v) {
        double best = std::numeric_limits<double>::infinity();
        int best_p = -1;
        for (int t : incident[v]) {
            for (int q = 0; q < g; ++q) {
                const int p = t * g + q;
                const double d = (space.constraint_point(p).position - mesh.vertex(v)).squaredNorm();
                if (d < best || (d == best && p < best_p)) {
                    best = d;
                    best_p = p;
                }
            }
        }
        if (best_p >= 0) out[v] = point_values[best_p];
    }
    return out;
}

/// Max of a per-constraint-point quantity over each triangle.
inline std::vector<double> triangle_max(const FunctionSpace& space, const std::vector<double>& point_values) {
    const int g = space.points_per_triangle();
    std::vector<double> out(space.mesh().num_triangles(), 0.0);
    for (std::size_t p = 0; p < point_values.size(); ++p) out[p / g] = std::max(out[p / g], point_values[p]);
    return out;
}

inline std::vector<double> to_doubles(const std::vector<char>& flags) { return {flags.begin(), flags.end()}; }
inline std::vector<double> to_doubles(const std::vector<int>& values) { return {values.begin(), values.end()}; }

}  // namespace cutlocus
