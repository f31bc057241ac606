#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>
#include <tuple>
#include <utility>
#include <vector>

#include "cutlocus/error.hpp"
#include "cutlocus/mesh.hpp"
#include "cutlocus/surface.hpp"

namespace cutlocus {

/// Great-circle distance between two points of a sphere.
inline double sphere_distance(const Vec3& center, double radius, const Vec3& b, const Vec3& x) {
    const Vec3 pb = b - center, px = x - center;
    if (std::abs(pb.norm() - radius) > 1e-9 || std::abs(px.norm() - radius) > 1e-9) {
        throw Error(ErrorKind::Validation, "sphere_distance: points must lie on the sphere");
    }
    return radius * std::atan2(pb.cross(px).norm(), pb.dot(px));
}

inline double sphere_distance(const Sphere& s, const Vec3& b, const Vec3& x) {
    return sphere_distance(s.center, s.radius, b, x);
}

struct GraphDistances {
    std::vector<double> distance;  ///< per mesh vertex
    std::vector<int> nearest;      ///< index into the source list
};

/// Multi-source Dijkstra on the mesh graph refined with `steiner_level` equally
/// spaced points per edge; inside every triangle all boundary nodes are
/// connected pairwise. Ties between sources resolve to the lowest source index.
inline GraphDistances graph_distance_labeled(const SurfaceMesh& mesh, const std::vector<int>& sources,
                                             int steiner_level) {
    require(steiner_level >= 0, "steiner level must be >= 0");
    require(!sources.empty(), "graph distance needs at least one source");
    const int nv = mesh.num_vertices(), ne = mesh.num_edges(), s = steiner_level;
    for (int v : sources) require(v >= 0 && v < nv, "source vertex out of range");

    // Node ids: vertices first, then s nodes per edge ordered from v0 to v1.
    const int nn = nv + ne * s;
    std::vector<Vec3> pos(nn);
    for (int i = 0; i < nv; ++i) pos[i] = mesh.vertex(i);
    for (int e = 0; e < ne; ++e) {
        const auto& edge = mesh.edges()[e];
        for (int k = 1; k <= s; ++k) {
            const double t = double(k) / (s + 1);
            pos[nv + e * s + k - 1] = (1 - t) * mesh.vertex(edge.v0) + t * mesh.vertex(edge.v1);
        }
    }

    std::vector<std::vector<int>> adj(nn);
    std::vector<int> ring;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& f = mesh.triangle(t);
        ring.clear();
        for (int k = 0; k < 3; ++k) {
            ring.push_back(f[k]);
            const int e = mesh.triangle_edge(t, k);
            for (int j = 0; j < s; ++j) ring.push_back(nv + e * s + j);
        }
        if (s == 0) {
            for (int k = 0; k < 3; ++k) {
                // a < b holds in exactly one of the two faces sharing the edge
                const int a = f[k], b = f[(k + 1) % 3];
                if (a < b) {
                    adj[a].push_back(b);
                    adj[b].push_back(a);
                }
            }
            continue;
        }
        for (std::size_t i = 0; i < ring.size(); ++i)
            for (std::size_t j = i + 1; j < ring.size(); ++j) {
                adj[ring[i]].push_back(ring[j]);
                adj[ring[j]].push_back(ring[i]);
            }
    }

    constexpr double inf = std::numeric_limits<double>::infinity();
    std::vector<double> dist(nn, inf);
    std::vector<int> label(nn, std::numeric_limits<int>::max());
    using Item = std::tuple<double, int, int>;  // distance, source label, node
    std::priority_queue<Item, std::vector<Item>, std::greater<>> pq;
    for (int k = 0; k < static_cast<int>(sources.size()); ++k) {
        const int v = sources[k];
        dist[v] = 0.0;
        label[v] = std::min(label[v], k);
    }
    for (int k = 0; k < static_cast<int>(sources.size()); ++k) pq.emplace(0.0, label[sources[k]], sources[k]);
    while (!pq.empty()) {
        const auto [d, l, u] = pq.top();
        pq.pop();
        if (d > dist[u] || (d == dist[u] && l > label[u])) continue;
        for (int w : adj[u]) {
            const double nd = d + (pos[u] - pos[w]).norm();
            if (nd < dist[w] || (nd == dist[w] && l < label[w])) {
                dist[w] = nd;
                label[w] = l;
                pq.emplace(nd, l, w);
            }
        }
    }
    GraphDistances out;
    out.distance.assign(dist.begin(), dist.begin() + nv);
    out.nearest.assign(label.begin(), label.begin() + nv);
    return out;
}

inline std::vector<double> graph_distance(const SurfaceMesh& mesh, const std::vector<int>& sources, int steiner_level) {
    return graph_distance_labeled(mesh, sources, steiner_level).distance;
}

/// Reference distance function d_b (or distance to a point set) at the mesh vertices.
class DistanceOracle {
public:
    enum class Kind { AnalyticSphere, GraphDijkstra };

    /// Exact great-circle distances; vertices must lie on the sphere.
    static DistanceOracle analytic_sphere(const SurfaceMesh& mesh, const Sphere& sphere, std::vector<int> sources) {
        require(!sources.empty(), "distance oracle needs at least one source");
        DistanceOracle o(Kind::AnalyticSphere, std::move(sources), 0);
        const int nv = mesh.num_vertices();
        o.distance_.assign(nv, std::numeric_limits<double>::infinity());
        o.nearest_.assign(nv, 0);
        for (int i = 0; i < nv; ++i) {
            for (int k = 0; k < static_cast<int>(o.sources_.size()); ++k) {
                const double d = sphere_distance(sphere, mesh.vertex(o.sources_[k]), mesh.vertex(i));
                if (d < o.distance_[i]) {
                    o.distance_[i] = d;
                    o.nearest_[i] = k;
                }
            }
        }
        return o;
    }

    static DistanceOracle graph(const SurfaceMesh& mesh, std::vector<int> sources, int steiner_level) {
        DistanceOracle o(Kind::GraphDijkstra, std::move(sources), steiner_level);
        auto g = graph_distance_labeled(mesh, o.sources_, steiner_level);
        o.distance_ = std::move(g.distance);
        o.nearest_ = std::move(g.nearest);
        return o;
    }

    Kind kind() const { return kind_; }
    int steiner_level() const { return steiner_level_; }
    const std::vector<int>& sources() const { return sources_; }
    const std::vector<double>& distances() const { return distance_; }
    /// Index into sources() of the closest source, per vertex.
    const std::vector<int>& nearest_source() const { return nearest_; }

private:
    DistanceOracle(Kind k, std::vector<int> s, int level) : kind_(k), steiner_level_(level), sources_(std::move(s)) {}

    Kind kind_;
    int steiner_level_;
    std::vector<int> sources_;
    std::vector<double> distance_;
    std::vector<int> nearest_;
};

/// Samples the boundaries of the spherical Voronoi diagram of `sources`.
/// For every source pair the bisector great circle is sampled at `samples`
/// points per pair and a sample is kept when that pair is the nearest two
/// sources, equidistant to within 1e-9.
inline std::vector<Vec3> spherical_voronoi_boundary(const Vec3& center, double radius, const std::vector<Vec3>& sources,
                                                    int samples = 512) {
    require(sources.size() >= 2, "Voronoi boundary needs at least two sources");
    require(samples >= 1, "samples must be positive");
    std::vector<Vec3> dirs;
    for (const auto& s : sources) {
        const Vec3 d = s - center;
        require(std::abs(d.norm() - radius) <= 1e-9 * std::max(1.0, radius), "sources must lie on the sphere");
        dirs.push_back(d / radius);
    }
    for (std::size_t i = 0; i < dirs.size(); ++i)
        for (std::size_t j = i + 1; j < dirs.size(); ++j)
            if ((dirs[i] - dirs[j]).norm() < 1e-12) throw Error(ErrorKind::Validation, "coincident Voronoi sources");

    std::vector<Vec3> out;
    for (std::size_t i = 0; i < dirs.size(); ++i) {
        for (std::size_t j = i + 1; j < dirs.size(); ++j) {
            // Bisector plane through the center has normal (d_i - d_j).
            const Vec3 n = (dirs[i] - dirs[j]).normalized();
            Vec3 a = (dirs[i] + dirs[j]);
            if (a.norm() < 1e-12) a = n.unitOrthogonal();
            a.normalize();
            const Vec3 b = n.cross(a);
            for (int k = 0; k < samples; ++k) {
                const double t = 2.0 * std::numbers::pi * k / samples;
                const Vec3 u = std::cos(t) * a + std::sin(t) * b;
                const Vec3 x = center + radius * u;
                const double dij = std::acos(std::clamp(u.dot(dirs[i]), -1.0, 1.0));
                bool nearest = true;
                for (std::size_t k2 = 0; k2 < dirs.size() && nearest; ++k2) {
                    if (k2 == i || k2 == j) continue;
                    if (std::acos(std::clamp(u.dot(dirs[k2]), -1.0, 1.0)) < dij - 1e-12) nearest = false;
                }
                if (nearest) out.push_back(x);
            }
        }
    }
    return out;
}

}  // namespace cutlocus
