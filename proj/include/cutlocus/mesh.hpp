#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <map>
#include <numbers>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <utility>
#include <vector>

#include <Eigen/Core>
#include <Eigen/Geometry>

#include "cutlocus/error.hpp"

namespace cutlocus {

using Vec3 = Eigen::Vector3d;
using Vec2 = Eigen::Vector2d;
using Tri = std::array<int, 3>;

/// Unvalidated vertex/face soup as it comes out of a file parser or generator.
struct RawMesh {
    std::vector<Vec3> vertices;
    std::vector<Tri> triangles;
};

namespace detail {

inline std::uint64_t edge_key(int a, int b) {
    if (a > b) std::swap(a, b);
    return (static_cast<std::uint64_t>(static_cast<std::uint32_t>(a)) << 32) |
           static_cast<std::uint32_t>(b);
}

inline std::string edge_name(int a, int b) {
    return "(" + std::to_string(std::min(a, b)) + ", " + std::to_string(std::max(a, b)) + ")";
}

}  // namespace detail

/// Everything that can be wrong with a RawMesh, grouped by category.
struct MeshViolations {
    std::vector<std::string> parse;     // out-of-range or repeated indices inside a face
    std::vector<std::string> topology;  // boundary, non-manifold, orientation
    std::vector<std::string> geometry;  // zero area, duplicate vertices
    bool closed = true;
    bool manifold = true;
    bool oriented = true;
    bool nondegenerate = true;
    bool unique_vertices = true;
    bool euler_valid = true;
    long euler = 0;
    long edge_count = 0;
    int components = 0;

    bool ok() const { return parse.empty() && topology.empty() && geometry.empty(); }
};

inline MeshViolations find_violations(const RawMesh& raw) {
    MeshViolations out;
    const int nv = static_cast<int>(raw.vertices.size());

    for (std::size_t t = 0; t < raw.triangles.size(); ++t) {
        const auto& f = raw.triangles[t];
        for (int k = 0; k < 3; ++k) {
            if (f[k] < 0 || f[k] >= nv) {
                out.parse.push_back("face " + std::to_string(t) + " references vertex " +
                                    std::to_string(f[k]) + " outside [0, " + std::to_string(nv) + ")");
            }
        }
        if (f[0] == f[1] || f[1] == f[2] || f[0] == f[2]) {
            out.parse.push_back("face " + std::to_string(t) + " repeats a vertex index");
        }
    }
    if (!out.parse.empty()) {
        out.closed = out.manifold = out.oriented = out.nondegenerate = out.euler_valid = false;
        return out;
    }

    // Directed half-edge counts per undirected edge, keyed in first-seen order.
    struct EdgeUse {
        int a, b;       // a < b
        int forward = 0;  // traversals a -> b
        int backward = 0;
    };
    std::vector<EdgeUse> edges;
    std::unordered_map<std::uint64_t, int> index;
    index.reserve(raw.triangles.size() * 2);
    for (const auto& f : raw.triangles) {
        for (int k = 0; k < 3; ++k) {
            const int a = f[k], b = f[(k + 1) % 3];
            auto [it, inserted] = index.try_emplace(detail::edge_key(a, b), static_cast<int>(edges.size()));
            if (inserted) edges.push_back({std::min(a, b), std::max(a, b)});
            auto& e = edges[it->second];
            (a < b ? e.forward : e.backward) += 1;
        }
    }
    for (const auto& e : edges) {
        const int uses = e.forward + e.backward;
        if (uses == 1) {
            out.closed = false;
            out.topology.push_back("boundary edge " + detail::edge_name(e.a, e.b));
        } else if (uses > 2) {
            out.manifold = false;
            out.topology.push_back("non-manifold edge " + detail::edge_name(e.a, e.b) + " shared by " +
                                   std::to_string(uses) + " faces");
        } else if (e.forward != 1 || e.backward != 1) {
            out.oriented = false;
            out.topology.push_back("inconsistent orientation across edge " + detail::edge_name(e.a, e.b));
        }
    }

    for (std::size_t t = 0; t < raw.triangles.size(); ++t) {
        const auto& f = raw.triangles[t];
        const Vec3 n = (raw.vertices[f[1]] - raw.vertices[f[0]]).cross(raw.vertices[f[2]] - raw.vertices[f[0]]);
        if (!(n.norm() > 0.0)) {
            out.nondegenerate = false;
            out.geometry.push_back("zero-area face " + std::to_string(t));
        }
    }

    std::map<std::tuple<double, double, double>, int> seen;
    for (int i = 0; i < nv; ++i) {
        const auto& p = raw.vertices[i];
        auto [it, inserted] = seen.try_emplace({p.x(), p.y(), p.z()}, i);
        if (!inserted) {
            out.unique_vertices = false;
            out.geometry.push_back("duplicate vertex " + std::to_string(i) + " coincides with vertex " +
                                   std::to_string(it->second));
        }
    }

    // Connected components over faces (vertex sharing), for the genus formula.
    std::vector<int> parent(nv);
    for (int i = 0; i < nv; ++i) parent[i] = i;
    auto find = [&](int x) {
        while (parent[x] != x) x = parent[x] = parent[parent[x]];
        return x;
    };
    std::vector<char> used(nv, 0);
    for (const auto& f : raw.triangles) {
        for (int k = 0; k < 3; ++k) {
            used[f[k]] = 1;
            const int ra = find(f[k]), rb = find(f[(k + 1) % 3]);
            if (ra != rb) parent[std::max(ra, rb)] = std::min(ra, rb);
        }
    }
    int unused = 0;
    for (int i = 0; i < nv; ++i) {
        if (!used[i]) {
            ++unused;
        } else if (find(i) == i) {
            ++out.components;
        }
    }
    if (unused > 0) {
        out.topology.push_back(std::to_string(unused) + " vertices are not referenced by any face");
    }

    out.edge_count = static_cast<long>(edges.size());
    out.euler = static_cast<long>(nv - unused) - out.edge_count + static_cast<long>(raw.triangles.size());
    const long per_component_max = 2L * std::max(out.components, 1);
    out.euler_valid = (out.euler % 2 == 0) && out.euler <= per_component_max;
    if (!out.euler_valid) {
        out.topology.push_back("Euler characteristic " + std::to_string(out.euler) +
                               " is not an even integer <= 2 per component");
    }
    return out;
}

/// Closed, consistently oriented, nondegenerate triangle mesh with edge adjacency.
/// Immutable once constructed.
class SurfaceMesh {
public:
    /// Edge k of triangle t runs from triangles()[t][k] to triangles()[t][(k+1)%3].
    struct Edge {
        int v0, v1;                  // v0 < v1
        std::array<int, 2> faces;    // the two incident triangles
    };

    SurfaceMesh() = default;

    /// Throws Error (Parse / Topology / Geometry) listing every violation.
    explicit SurfaceMesh(RawMesh raw) : raw_(std::move(raw)) {
        const auto v = find_violations(raw_);
        if (!v.parse.empty()) throw Error(ErrorKind::Parse, "invalid face indices", v.parse);
        if (!v.topology.empty()) throw Error(ErrorKind::Topology, "mesh is not a closed oriented 2-manifold", v.topology);
        if (!v.geometry.empty()) throw Error(ErrorKind::Geometry, "degenerate mesh geometry", v.geometry);
        euler_ = v.euler;
        components_ = v.components;
        build_adjacency();
    }

    SurfaceMesh(std::vector<Vec3> vertices, std::vector<Tri> triangles)
        : SurfaceMesh(RawMesh{std::move(vertices), std::move(triangles)}) {}

    const RawMesh& raw() const { return raw_; }
    const std::vector<Vec3>& vertices() const { return raw_.vertices; }
    const std::vector<Tri>& triangles() const { return raw_.triangles; }
    const std::vector<Edge>& edges() const { return edges_; }

    int num_vertices() const { return static_cast<int>(raw_.vertices.size()); }
    int num_triangles() const { return static_cast<int>(raw_.triangles.size()); }
    int num_edges() const { return static_cast<int>(edges_.size()); }

    const Vec3& vertex(int i) const { return raw_.vertices[i]; }
    const Tri& triangle(int t) const { return raw_.triangles[t]; }

    /// Global edge index of edge k of triangle t.
    int triangle_edge(int t, int k) const { return tri_edges_[t][k]; }
    const std::array<int, 3>& triangle_edges(int t) const { return tri_edges_[t]; }

    /// Triangle across edge k of triangle t.
    int neighbor(int t, int k) const {
        const auto& e = edges_[tri_edges_[t][k]];
        return e.faces[0] == t ? e.faces[1] : e.faces[0];
    }

    long euler_characteristic() const { return euler_; }
    int connected_components() const { return components_; }
    int genus() const { return static_cast<int>((2L * components_ - euler_) / 2); }

    Vec3 face_normal(int t) const {
        const auto& f = raw_.triangles[t];
        return (vertex(f[1]) - vertex(f[0])).cross(vertex(f[2]) - vertex(f[0])).normalized();
    }

    double area(int t) const {
        const auto& f = raw_.triangles[t];
        return 0.5 * (vertex(f[1]) - vertex(f[0])).cross(vertex(f[2]) - vertex(f[0])).norm();
    }

    double total_area() const {
        double a = 0.0;
        for (int t = 0; t < num_triangles(); ++t) a += area(t);
        return a;
    }

    Vec3 centroid(int t) const {
        const auto& f = raw_.triangles[t];
        return (vertex(f[0]) + vertex(f[1]) + vertex(f[2])) / 3.0;
    }

    /// Longest edge of triangle t.
    double diameter(int t) const {
        const auto& f = raw_.triangles[t];
        return std::max({(vertex(f[0]) - vertex(f[1])).norm(), (vertex(f[1]) - vertex(f[2])).norm(),
                         (vertex(f[2]) - vertex(f[0])).norm()});
    }

    double h_max() const {
        double h = 0.0;
        for (int t = 0; t < num_triangles(); ++t) h = std::max(h, diameter(t));
        return h;
    }

    /// Diagonal of the axis-aligned bounding box.
    double bbox_diameter() const {
        if (raw_.vertices.empty()) return 0.0;
        Vec3 lo = raw_.vertices.front(), hi = lo;
        for (const auto& p : raw_.vertices) {
            lo = lo.cwiseMin(p);
            hi = hi.cwiseMax(p);
        }
        return (hi - lo).norm();
    }

    int nearest_vertex(const Vec3& p) const {
        int best = 0;
        double best_d = std::numeric_limits<double>::infinity();
        for (int i = 0; i < num_vertices(); ++i) {
            const double d = (vertex(i) - p).squaredNorm();
            if (d < best_d) {
                best_d = d;
                best = i;
            }
        }
        return best;
    }

    /// Vertex -> incident triangles.
    std::vector<std::vector<int>> vertex_triangles() const {
        std::vector<std::vector<int>> out(num_vertices());
        for (int t = 0; t < num_triangles(); ++t)
            for (int v : raw_.triangles[t]) out[v].push_back(t);
        return out;
    }

private:
    void build_adjacency() {
        std::unordered_map<std::uint64_t, int> index;
        index.reserve(raw_.triangles.size() * 2);
        tri_edges_.resize(raw_.triangles.size());
        for (int t = 0; t < num_triangles(); ++t) {
            const auto& f = raw_.triangles[t];
            for (int k = 0; k < 3; ++k) {
                const int a = f[k], b = f[(k + 1) % 3];
                auto [it, inserted] = index.try_emplace(detail::edge_key(a, b), num_edges());
                if (inserted) {
                    edges_.push_back({std::min(a, b), std::max(a, b), {t, -1}});
                } else {
                    edges_[it->second].faces[1] = t;
                }
                tri_edges_[t][k] = it->second;
            }
        }
    }

    RawMesh raw_;
    std::vector<Edge> edges_;
    std::vector<std::array<int, 3>> tri_edges_;
    long euler_ = 0;
    int components_ = 0;
};

// ---------------------------------------------------------------------------
// Tangent frames

struct TangentFrame {
    Vec3 e1, e2, n;

    /// Coordinates of a 3D vector in (e1, e2).
    Vec2 project(const Vec3& v) const { return {v.dot(e1), v.dot(e2)}; }
    Vec3 lift(const Vec2& w) const { return w.x() * e1 + w.y() * e2; }
};

/// e1 runs from the lowest-index vertex of the face to its successor in the
/// face's cyclic order; n follows the face orientation and e2 = n x e1.
inline TangentFrame tangent_frame(const SurfaceMesh& mesh, int t) {
    const auto& f = mesh.triangle(t);
    const int k = static_cast<int>(std::min_element(f.begin(), f.end()) - f.begin());
    const Vec3& p0 = mesh.vertex(f[k]);
    const Vec3& p1 = mesh.vertex(f[(k + 1) % 3]);
    const Vec3& p2 = mesh.vertex(f[(k + 2) % 3]);
    TangentFrame fr;
    fr.e1 = (p1 - p0).normalized();
    fr.n = (p1 - p0).cross(p2 - p0).normalized();
    fr.e2 = fr.n.cross(fr.e1);
    return fr;
}

inline std::vector<TangentFrame> tangent_frames(const SurfaceMesh& mesh) {
    std::vector<TangentFrame> out;
    out.reserve(mesh.num_triangles());
    for (int t = 0; t < mesh.num_triangles(); ++t) out.push_back(tangent_frame(mesh, t));
    return out;
}

// ---------------------------------------------------------------------------
// Quality report

struct MeshReport {
    int vertices = 0;
    int faces = 0;
    long edges = 0;
    long euler = 0;
    int genus = 0;
    int components = 0;
    double h_max = 0.0;
    double h_min = 0.0;
    double min_angle = 0.0;  // radians
    double area = 0.0;
    double quasi_uniformity = 0.0;  // h_max / h_min
    bool closed = false;
    bool manifold = false;
    bool oriented = false;
    bool nondegenerate = false;
    bool unique_vertices = false;
    bool euler_valid = false;
    std::vector<std::string> violations;

    bool valid() const {
        return closed && manifold && oriented && nondegenerate && unique_vertices && euler_valid && violations.empty();
    }

    /// Flat `key=value` record, one per line.
    std::string to_key_value() const {
        std::ostringstream os;
        os.precision(17);
        os << "vertices=" << vertices << '\n'
           << "faces=" << faces << '\n'
           << "edges=" << edges << '\n'
           << "euler=" << euler << '\n'
           << "genus=" << genus << '\n'
           << "components=" << components << '\n'
           << "h_max=" << h_max << '\n'
           << "h_min=" << h_min << '\n'
           << "min_angle=" << min_angle << '\n'
           << "area=" << area << '\n'
           << "quasi_uniformity=" << quasi_uniformity << '\n'
           << "closed=" << closed << '\n'
           << "manifold=" << manifold << '\n'
           << "oriented=" << oriented << '\n'
           << "nondegenerate=" << nondegenerate << '\n'
           << "unique_vertices=" << unique_vertices << '\n'
           << "euler_valid=" << euler_valid << '\n'
           << "valid=" << valid() << '\n';
        return os.str();
    }
};

inline MeshReport validate(const RawMesh& raw) {
    MeshReport r;
    const auto v = find_violations(raw);
    r.vertices = static_cast<int>(raw.vertices.size());
    r.faces = static_cast<int>(raw.triangles.size());
    r.edges = v.edge_count;
    r.euler = v.euler;
    r.components = v.components;
    r.genus = static_cast<int>((2L * v.components - v.euler) / 2);
    r.closed = v.closed;
    r.manifold = v.manifold;
    r.oriented = v.oriented;
    r.nondegenerate = v.nondegenerate;
    r.unique_vertices = v.unique_vertices;
    r.euler_valid = v.euler_valid;
    r.violations = v.parse;
    r.violations.insert(r.violations.end(), v.topology.begin(), v.topology.end());
    r.violations.insert(r.violations.end(), v.geometry.begin(), v.geometry.end());
    if (!v.parse.empty()) return r;

    r.h_min = std::numeric_limits<double>::infinity();
    r.min_angle = std::numbers::pi;
    for (const auto& f : raw.triangles) {
        const Vec3 &a = raw.vertices[f[0]], &b = raw.vertices[f[1]], &c = raw.vertices[f[2]];
        const double diam = std::max({(a - b).norm(), (b - c).norm(), (c - a).norm()});
        r.h_max = std::max(r.h_max, diam);
        r.h_min = std::min(r.h_min, diam);
        r.area += 0.5 * (b - a).cross(c - a).norm();
        const std::array<Vec3, 3> p{a, b, c};
        for (int k = 0; k < 3; ++k) {
            const Vec3 u = p[(k + 1) % 3] - p[k], w = p[(k + 2) % 3] - p[k];
            const double nu = u.norm(), nw = w.norm();
            if (nu > 0 && nw > 0) {
                r.min_angle = std::min(r.min_angle, std::acos(std::clamp(u.dot(w) / (nu * nw), -1.0, 1.0)));
            } else {
                r.min_angle = 0.0;
            }
        }
    }
    if (raw.triangles.empty()) r.h_min = 0.0;
    r.quasi_uniformity = r.h_min > 0 ? r.h_max / r.h_min : std::numeric_limits<double>::infinity();
    return r;
}

inline MeshReport validate(const SurfaceMesh& mesh) { return validate(mesh.raw()); }

// ---------------------------------------------------------------------------
// Generators

/// Icosahedron with vertices at (0,0,+-1), subdivided 1->4 `subdivisions`
/// times with every new vertex pushed onto the sphere.
inline SurfaceMesh generate_sphere(double radius, int subdivisions, const Vec3& center = Vec3::Zero()) {
    require(radius > 0.0, "sphere radius must be positive");
    require(subdivisions >= 0, "subdivision count must be >= 0");

    RawMesh m;
    const double z = 1.0 / std::sqrt(5.0), rho = 2.0 / std::sqrt(5.0);
    m.vertices.emplace_back(0, 0, 1);
    for (int k = 0; k < 5; ++k) {
        const double a = 2.0 * std::numbers::pi * k / 5.0;
        m.vertices.emplace_back(rho * std::cos(a), rho * std::sin(a), z);
    }
    for (int k = 0; k < 5; ++k) {
        const double a = 2.0 * std::numbers::pi * (k + 0.5) / 5.0;
        m.vertices.emplace_back(rho * std::cos(a), rho * std::sin(a), -z);
    }
    m.vertices.emplace_back(0, 0, -1);
    for (int k = 0; k < 5; ++k) {
        const int u0 = 1 + k, u1 = 1 + (k + 1) % 5;
        const int l0 = 6 + k, l1 = 6 + (k + 1) % 5;
        m.triangles.push_back({0, u0, u1});
        m.triangles.push_back({u0, l0, u1});
        m.triangles.push_back({u1, l0, l1});
        m.triangles.push_back({11, l1, l0});
    }

    for (int s = 0; s < subdivisions; ++s) {
        std::unordered_map<std::uint64_t, int> mid;
        std::vector<Tri> next;
        next.reserve(m.triangles.size() * 4);
        auto midpoint = [&](int a, int b) {
            auto [it, inserted] = mid.try_emplace(detail::edge_key(a, b), static_cast<int>(m.vertices.size()));
            if (inserted) m.vertices.push_back((m.vertices[a] + m.vertices[b]).normalized());
            return it->second;
        };
        for (const auto& f : m.triangles) {
            const int ab = midpoint(f[0], f[1]), bc = midpoint(f[1], f[2]), ca = midpoint(f[2], f[0]);
            next.push_back({f[0], ab, ca});
            next.push_back({ab, f[1], bc});
            next.push_back({ca, bc, f[2]});
            next.push_back({ab, bc, ca});
        }
        m.triangles = std::move(next);
    }
    for (auto& p : m.vertices) p = center + radius * p;
    return SurfaceMesh(std::move(m));
}

/// Structured torus of revolution about the z axis; vertex (i, j) sits at
/// u = 2 pi i / nu, v = 2 pi j / nv and has index i * nv + j. Quad diagonals
/// alternate with the parity of i + j, so for even nu and nv the mesh is
/// symmetric under y -> -y and z -> -z.
inline SurfaceMesh generate_torus(double major, double minor, int nu, int nv) {
    require(major > minor && minor > 0.0, "torus requires R > r > 0");
    require(nu >= 3 && nv >= 3, "torus grid needs nu >= 3 and nv >= 3");

    RawMesh m;
    m.vertices.reserve(static_cast<std::size_t>(nu) * nv);
    for (int i = 0; i < nu; ++i) {
        const double u = 2.0 * std::numbers::pi * i / nu;
        for (int j = 0; j < nv; ++j) {
            const double v = 2.0 * std::numbers::pi * j / nv;
            const double w = major + minor * std::cos(v);
            m.vertices.emplace_back(w * std::cos(u), w * std::sin(u), minor * std::sin(v));
        }
    }
    auto id = [&](int i, int j) { return ((i % nu) * nv) + (j % nv); };
    for (int i = 0; i < nu; ++i) {
        for (int j = 0; j < nv; ++j) {
            const int a = id(i, j), b = id(i + 1, j), c = id(i + 1, j + 1), d = id(i, j + 1);
            if ((i + j) % 2 == 0) {
                m.triangles.push_back({a, b, c});
                m.triangles.push_back({a, c, d});
            } else {
                m.triangles.push_back({a, b, d});
                m.triangles.push_back({b, c, d});
            }
        }
    }
    return SurfaceMesh(std::move(m));
}

}  // namespace cutlocus
