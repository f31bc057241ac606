#pragma once

#include <cmath>
#include <limits>
#include <unordered_map>
#include <variant>

#include "cutlocus/error.hpp"
#include "cutlocus/mesh.hpp"

namespace cutlocus {

struct Sphere {
    Vec3 center = Vec3::Zero();
    double radius = 1.0;

    double signed_distance(const Vec3& x) const { return (x - center).norm() - radius; }
    Vec3 normal_at(const Vec3& surface_point) const { return (surface_point - center).normalized(); }
    double reach() const { return radius; }
    Vec3 closest_point(const Vec3& x) const { return center + radius * (x - center).normalized(); }
};

/// Torus of revolution about the z axis through the origin.
struct Torus {
    double major = 2.0;
    double minor = 1.0;

    Vec3 core_point(const Vec3& x) const {
        const double rho = std::hypot(x.x(), x.y());
        return {major * x.x() / rho, major * x.y() / rho, 0.0};
    }
    double signed_distance(const Vec3& x) const { return (x - core_point(x)).norm() - minor; }
    Vec3 normal_at(const Vec3& surface_point) const { return (surface_point - core_point(surface_point)).normalized(); }
    double reach() const { return minor; }
    Vec3 closest_point(const Vec3& x) const {
        const Vec3 c = core_point(x);
        return c + minor * (x - c).normalized();
    }
};

/// Closed analytic surface with closed-form signed distance d and closest-point
/// map a, valid on the tubular neighborhood |d| < reach.
class AnalyticSurface {
public:
    AnalyticSurface(Sphere s) : shape_(s) {}  // NOLINT(google-explicit-constructor)
    AnalyticSurface(Torus t) : shape_(t) {
        require(t.major > t.minor && t.minor > 0.0, "torus requires R > r > 0");
    }

    double signed_distance(const Vec3& x) const {
        return std::visit([&](const auto& s) { return s.signed_distance(x); }, shape_);
    }

    double reach() const {
        return std::visit([](const auto& s) { return s.reach(); }, shape_);
    }

    bool in_tube(const Vec3& x) const {
        if (std::holds_alternative<Torus>(shape_) && std::hypot(x.x(), x.y()) <= 0.0) return false;
        if (const auto* s = std::get_if<Sphere>(&shape_)) {
            if ((x - s->center).norm() <= 0.0) return false;
        }
        return std::abs(signed_distance(x)) < reach();
    }

    /// Closest point a(x) on the surface; throws Projection outside the tube.
    Vec3 project(const Vec3& x) const {
        if (!in_tube(x)) {
            throw Error(ErrorKind::Projection, "point (" + std::to_string(x.x()) + ", " + std::to_string(x.y()) + ", " +
                                                   std::to_string(x.z()) + ") is outside the tubular neighborhood");
        }
        return std::visit([&](const auto& s) { return s.closest_point(x); }, shape_);
    }

    /// Outward unit normal at a point of the surface.
    Vec3 normal(const Vec3& surface_point) const {
        return std::visit([&](const auto& s) { return s.normal_at(surface_point); }, shape_);
    }

    const Sphere* sphere() const { return std::get_if<Sphere>(&shape_); }
    const Torus* torus() const { return std::get_if<Torus>(&shape_); }

private:
    std::variant<Sphere, Torus> shape_;
};

/// 1->4 midpoint subdivision with every new vertex mapped onto the surface by
/// the closest-point projection. Existing vertices keep their indices and
/// positions, new ones are appended in order of first use.
inline SurfaceMesh refine_project(const SurfaceMesh& mesh, const AnalyticSurface& surface) {
    for (int i = 0; i < mesh.num_vertices(); ++i) surface.project(mesh.vertex(i));

    RawMesh out;
    out.vertices = mesh.vertices();
    out.triangles.reserve(static_cast<std::size_t>(mesh.num_triangles()) * 4);
    std::vector<int> mid(mesh.num_edges(), -1);
    auto midpoint = [&](int t, int k) {
        const int e = mesh.triangle_edge(t, k);
        if (mid[e] < 0) {
            const auto& edge = mesh.edges()[e];
            mid[e] = static_cast<int>(out.vertices.size());
            out.vertices.push_back(surface.project(0.5 * (mesh.vertex(edge.v0) + mesh.vertex(edge.v1))));
        }
        return mid[e];
    };
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& f = mesh.triangle(t);
        const int ab = midpoint(t, 0), bc = midpoint(t, 1), ca = midpoint(t, 2);
        out.triangles.push_back({f[0], ab, ca});
        out.triangles.push_back({ab, f[1], bc});
        out.triangles.push_back({ca, bc, f[2]});
        out.triangles.push_back({ab, bc, ca});
    }
    return SurfaceMesh(std::move(out));
}

}  // namespace cutlocus
