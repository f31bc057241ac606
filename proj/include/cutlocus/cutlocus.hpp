#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <ostream>
#include <utility>
#include <vector>

#include "cutlocus/error.hpp"
#include "cutlocus/fem.hpp"
#include "cutlocus/mesh.hpp"
#include "cutlocus/oracle.hpp"
#include "cutlocus/solver.hpp"

namespace cutlocus {

struct Component {
    int id = 0;
    double area = 0.0;
    std::vector<int> triangles;  ///< ascending
};

/// Discrete lambda-cut-locus: constraint points where
/// |grad u|^2 <= 1 - lambda^2 / u^2, and the triangles that carry them.
struct CutLocusSet {
    double lambda = 0.0;
    int points_per_triangle = 1;
    std::vector<char> point_flags;
    std::vector<char> triangle_flags;
    std::vector<Vec3> point_positions;   ///< all constraint points
    std::vector<Component> components;   ///< sorted by area, largest first
    std::vector<int> component_of;       ///< per triangle, -1 when unflagged
    double flagged_area = 0.0;
    double mesh_area = 0.0;
    bool empty_warning = false;  ///< lambda >= max u, nothing can be flagged

    bool empty() const { return components.empty(); }

    int flagged_triangle_count() const {
        return static_cast<int>(std::count(triangle_flags.begin(), triangle_flags.end(), 1));
    }

    /// Centroid of the flagged constraint points of every flagged triangle.
    std::vector<Vec3> flagged_centroids() const {
        std::vector<Vec3> out;
        const int g = points_per_triangle;
        for (std::size_t t = 0; t < triangle_flags.size(); ++t) {
            if (!triangle_flags[t]) continue;
            Vec3 c = Vec3::Zero();
            int k = 0;
            for (int q = 0; q < g; ++q) {
                if (point_flags[t * g + q]) {
                    c += point_positions[t * g + q];
                    ++k;
                }
            }
            out.push_back(c / k);
        }
        return out;
    }

    std::vector<Vec3> flagged_points() const {
        std::vector<Vec3> out;
        for (std::size_t p = 0; p < point_flags.size(); ++p)
            if (point_flags[p]) out.push_back(point_positions[p]);
        return out;
    }
};

/// Connected components of the flagged triangles under shared-edge adjacency,
/// sorted by area (descending), ties by smallest triangle index.
inline std::vector<Component> components(const std::vector<char>& triangle_flags, const SurfaceMesh& mesh) {
    const int nt = mesh.num_triangles();
    require(static_cast<int>(triangle_flags.size()) == nt, "flag vector does not match the mesh", ErrorKind::Dimension);
    std::vector<int> parent(nt);
    std::iota(parent.begin(), parent.end(), 0);
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    for (const auto& e : mesh.edges()) {
        const int a = e.faces[0], b = e.faces[1];
        if (triangle_flags[a] && triangle_flags[b]) {
            const int ra = find(a), rb = find(b);
            if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        }
    }
    std::vector<int> slot(nt, -1);
    std::vector<Component> out;
    for (int t = 0; t < nt; ++t) {
        if (!triangle_flags[t]) continue;
        const int r = find(t);
        if (slot[r] < 0) {
            slot[r] = static_cast<int>(out.size());
            out.emplace_back();
        }
        auto& c = out[slot[r]];
        c.triangles.push_back(t);
        c.area += mesh.area(t);
    }
    std::stable_sort(out.begin(), out.end(), [](const Component& a, const Component& b) { return a.area > b.area; });
    for (std::size_t i = 0; i < out.size(); ++i) out[i].id = static_cast<int>(i);
    return out;
}

inline std::vector<Component> components(const CutLocusSet& set, const SurfaceMesh& mesh) {
    return components(set.triangle_flags, mesh);
}

namespace detail {

inline void rebuild_components(CutLocusSet& set, const SurfaceMesh& mesh) {
    set.components = components(set.triangle_flags, mesh);
    set.component_of.assign(set.triangle_flags.size(), -1);
    set.flagged_area = 0.0;
    for (const auto& c : set.components) {
        for (int t : c.triangles) set.component_of[t] = c.id;
        set.flagged_area += c.area;
    }
}

}  // namespace detail

/// Flags constraint point p iff u(p) > lambda and |grad u(p)|^2 <= 1 - lambda^2 / u(p)^2.
/// `gradient_norms` are per constraint point, u is interpolated from `coeffs`.
inline CutLocusSet extract(const Vector& coeffs, const std::vector<double>& gradient_norms, const FunctionSpace& space,
                           double lambda) {
    require(lambda > 0.0, "lambda must be positive");
    require(static_cast<int>(gradient_norms.size()) == space.num_constraint_points(),
            "gradient vector does not match the space", ErrorKind::Dimension);
    const Vector u = value_at_constraints(space, coeffs);
    const auto& mesh = space.mesh();
    const int g = space.points_per_triangle(), np = space.num_constraint_points();

    CutLocusSet set;
    set.lambda = lambda;
    set.points_per_triangle = g;
    set.mesh_area = mesh.total_area();
    set.point_flags.assign(np, 0);
    set.triangle_flags.assign(mesh.num_triangles(), 0);
    set.point_positions.resize(np);
    for (int p = 0; p < np; ++p) {
        set.point_positions[p] = space.constraint_point(p).position;
        const double up = u[p];
        if (up <= lambda) continue;
        const double gn = gradient_norms[p];
        if (gn * gn <= 1.0 - (lambda * lambda) / (up * up)) {
            set.point_flags[p] = 1;
            set.triangle_flags[p / g] = 1;
        }
    }
    set.empty_warning = coeffs.size() == 0 || lambda >= coeffs.maxCoeff();
    detail::rebuild_components(set, mesh);
    return set;
}

inline CutLocusSet extract(const SolutionField& sol, const FunctionSpace& space, double lambda) {
    return extract(sol.coeffs, sol.gradient_norms, space, lambda);
}

inline CutLocusSet extract(const NormalizedSolution& sol, const FunctionSpace& space, double lambda) {
    return extract(sol.coeffs, sol.gradient_norms, space, lambda);
}

/// Drops components whose area is below `min_area_fraction` of the mesh area.
inline CutLocusSet filter(const CutLocusSet& set, const SurfaceMesh& mesh, double min_area_fraction = 1e-3) {
    require(min_area_fraction >= 0.0 && min_area_fraction < 1.0, "filter fraction must lie in [0, 1)");
    CutLocusSet out = set;
    const double threshold = min_area_fraction * set.mesh_area;
    const int g = set.points_per_triangle;
    for (const auto& c : set.components) {
        if (c.area >= threshold) continue;
        for (int t : c.triangles) {
            out.triangle_flags[t] = 0;
            for (int q = 0; q < g; ++q) out.point_flags[t * g + q] = 0;
        }
    }
    detail::rebuild_components(out, mesh);
    return out;
}

/// Euler characteristic V - E + F of the closed triangle subcomplex spanned by `triangles`.
inline long subcomplex_euler(const SurfaceMesh& mesh, const std::vector<int>& triangles) {
    std::vector<char> vused(mesh.num_vertices(), 0), eused(mesh.num_edges(), 0);
    long v = 0, e = 0;
    for (int t : triangles) {
        for (int k = 0; k < 3; ++k) {
            const int vi = mesh.triangle(t)[k], ei = mesh.triangle_edge(t, k);
            if (!vused[vi]) {
                vused[vi] = 1;
                ++v;
            }
            if (!eused[ei]) {
                eused[ei] = 1;
                ++e;
            }
        }
    }
    return v - e + static_cast<long>(triangles.size());
}

// ---------------------------------------------------------------------------
// Voronoi labels

struct VoronoiLabeling {
    std::vector<int> vertex_labels;    ///< index into the source list
    std::vector<int> triangle_labels;  ///< majority of the three vertex labels
};

/// Nearest-source assignment from the oracle; triangle label is the majority
/// of its vertex labels, falling back to the lowest label on a three-way split.
inline VoronoiLabeling label_cells(const SurfaceMesh& mesh, const std::vector<int>& sources, const DistanceOracle& oracle) {
    require(sources.size() >= 2, "Voronoi labeling needs at least two sources");
    require(oracle.sources() == sources, "oracle was built for a different source list");
    VoronoiLabeling out;
    out.vertex_labels = oracle.nearest_source();
    out.triangle_labels.resize(mesh.num_triangles());
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& f = mesh.triangle(t);
        const int a = out.vertex_labels[f[0]], b = out.vertex_labels[f[1]], c = out.vertex_labels[f[2]];
        if (a == b || a == c) {
            out.triangle_labels[t] = a;
        } else if (b == c) {
            out.triangle_labels[t] = b;
        } else {
            out.triangle_labels[t] = std::min({a, b, c});
        }
    }
    return out;
}

inline VoronoiLabeling label_cells(const SurfaceMesh& mesh, const std::vector<int>& sources, int steiner_level = 0) {
    require(sources.size() >= 2, "Voronoi labeling needs at least two sources");
    return label_cells(mesh, sources, DistanceOracle::graph(mesh, sources, steiner_level));
}

// ---------------------------------------------------------------------------
// Hausdorff comparison

struct HausdorffDistances {
    double set_to_reference = 0.0;
    double reference_to_set = 0.0;
};

inline HausdorffDistances hausdorff(const std::vector<Vec3>& a, const std::vector<Vec3>& b) {
    require(!a.empty() && !b.empty(), "Hausdorff distance needs nonempty point sets");
    auto one_sided = [](const std::vector<Vec3>& from, const std::vector<Vec3>& to) {
        double worst = 0.0;
        for (const auto& p : from) {
            double best = std::numeric_limits<double>::infinity();
            for (const auto& q : to) best = std::min(best, (p - q).squaredNorm());
            worst = std::max(worst, best);
        }
        return std::sqrt(worst);
    };
    return {one_sided(a, b), one_sided(b, a)};
}

/// One-sided ambient sup-distances between the flagged centroids of `set` and `reference`.
inline HausdorffDistances hausdorff_to_reference(const CutLocusSet& set, const std::vector<Vec3>& reference) {
    const auto pts = set.flagged_centroids();
    if (pts.empty() || reference.empty()) {
        throw Error(ErrorKind::Validation, "Hausdorff distance needs a nonempty set and reference");
    }
    return hausdorff(pts, reference);
}

// ---------------------------------------------------------------------------
// Tables

inline void write_component_csv(std::ostream& os, const CutLocusSet& set) {
    os.precision(17);
    os << "id,area,triangle_count\n";
    for (const auto& c : set.components) os << c.id << ',' << c.area << ',' << c.triangles.size() << '\n';
}

}  // namespace cutlocus
