#pragma once

#include <array>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <vector>

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include "cutlocus/error.hpp"
#include "cutlocus/mesh.hpp"

namespace cutlocus {

using Vector = Eigen::VectorXd;
using SparseMatrix = Eigen::SparseMatrix<double>;

// ---------------------------------------------------------------------------
// Symmetric triangle quadrature

/// Points in barycentric coordinates, weights summing to one (multiply by the
/// triangle area to integrate).
struct TriangleRule {
    int degree = 0;
    std::vector<Eigen::Vector3d> points;
    std::vector<double> weights;

    int size() const { return static_cast<int>(points.size()); }
};

namespace detail {

inline void add_orbit3(TriangleRule& r, double a, double w) {
    const double b = 1.0 - 2.0 * a;
    r.points.emplace_back(b, a, a);
    r.points.emplace_back(a, b, a);
    r.points.emplace_back(a, a, b);
    r.weights.insert(r.weights.end(), 3, w);
}

}  // namespace detail

/// Dunavant rules: 1 point (degree 1), 3 (degree 2), 6 (degree 4), 7 (degree 5).
inline TriangleRule rule_by_points(int n) {
    TriangleRule r;
    switch (n) {
        case 1:
            r.degree = 1;
            r.points.emplace_back(1.0 / 3, 1.0 / 3, 1.0 / 3);
            r.weights.push_back(1.0);
            break;
        case 3:
            r.degree = 2;
            detail::add_orbit3(r, 1.0 / 6, 1.0 / 3);
            break;
        case 6:
            r.degree = 4;
            detail::add_orbit3(r, 0.445948490915965, 0.223381589678011);
            detail::add_orbit3(r, 0.091576213509771, 0.109951743655322);
            break;
        case 7:
            r.degree = 5;
            r.points.emplace_back(1.0 / 3, 1.0 / 3, 1.0 / 3);
            r.weights.push_back(0.225);
            detail::add_orbit3(r, 0.470142064105115, 0.132394152788506);
            detail::add_orbit3(r, 0.101286507323456, 0.125939180544827);
            break;
        default:
            throw Error(ErrorKind::Validation, "no symmetric triangle rule with " + std::to_string(n) + " points");
    }
    return r;
}

/// Smallest available rule exact for polynomials of the given degree.
inline TriangleRule rule_by_degree(int degree) {
    if (degree <= 1) return rule_by_points(1);
    if (degree == 2) return rule_by_points(3);
    if (degree <= 4) return rule_by_points(6);
    if (degree == 5) return rule_by_points(7);
    throw Error(ErrorKind::Validation, "quadrature degree " + std::to_string(degree) + " not available (max 5)");
}

// ---------------------------------------------------------------------------
// Lagrange space

/// Lagrange space of order 1 or 2 on the affine mesh. Local dofs per triangle:
/// the three vertices, then (order 2) the midpoints of edges 0, 1, 2 where
/// edge k joins local vertices k and k+1.
class FunctionSpace {
public:
    struct ConstraintPoint {
        int triangle;
        Eigen::Vector3d bary;
        Vec3 position;
    };

    int order() const { return order_; }
    int num_dofs() const { return static_cast<int>(nodes_.size()); }
    int local_dofs() const { return order_ == 1 ? 3 : 6; }
    int points_per_triangle() const { return constraint_rule_.size(); }
    int num_constraint_points() const { return mesh_->num_triangles() * points_per_triangle(); }

    const SurfaceMesh& mesh() const { return *mesh_; }
    const std::vector<TangentFrame>& frames() const { return frames_; }
    const TriangleRule& quadrature() const { return quadrature_; }
    const TriangleRule& constraint_rule() const { return constraint_rule_; }

    /// Physical location of dof i (vertex, or straight edge midpoint).
    const Vec3& node(int i) const { return nodes_[i]; }
    const std::vector<Vec3>& nodes() const { return nodes_; }

    std::span<const int> triangle_dofs(int t) const {
        return {dofs_.data() + static_cast<std::size_t>(t) * local_dofs(), static_cast<std::size_t>(local_dofs())};
    }

    ConstraintPoint constraint_point(int p) const {
        const int g = points_per_triangle();
        const int t = p / g;
        const auto& bary = constraint_rule_.points[p % g];
        const auto& f = mesh_->triangle(t);
        return {t, bary, bary[0] * mesh_->vertex(f[0]) + bary[1] * mesh_->vertex(f[1]) + bary[2] * mesh_->vertex(f[2])};
    }

    /// Basis values at a barycentric point.
    Eigen::VectorXd shape_values(const Eigen::Vector3d& l) const {
        Eigen::VectorXd v(local_dofs());
        if (order_ == 1) {
            v << l[0], l[1], l[2];
        } else {
            v << l[0] * (2 * l[0] - 1), l[1] * (2 * l[1] - 1), l[2] * (2 * l[2] - 1), 4 * l[0] * l[1], 4 * l[1] * l[2],
                4 * l[2] * l[0];
        }
        return v;
    }

    /// 2 x local_dofs map from local coefficients to the gradient in the
    /// triangle's tangent frame.
    Eigen::MatrixXd shape_gradients(int t, const Eigen::Vector3d& l) const {
        const auto& gl = bary_gradients_[t];  // columns: grad lambda_0..2
        Eigen::MatrixXd g(2, local_dofs());
        if (order_ == 1) {
            g = gl;
        } else {
            for (int i = 0; i < 3; ++i) g.col(i) = (4 * l[i] - 1) * gl.col(i);
            for (int k = 0; k < 3; ++k) {
                const int i = k, j = (k + 1) % 3;
                g.col(3 + k) = 4 * (l[i] * gl.col(j) + l[j] * gl.col(i));
            }
        }
        return g;
    }

    /// Gradient map at constraint point p (cached).
    const Eigen::MatrixXd& gradient_map(int p) const { return gradient_maps_[p]; }

    /// Value shape functions at constraint point p (cached).
    const Eigen::VectorXd& value_map(int p) const { return value_maps_[p]; }

    double triangle_area(int t) const { return areas_[t]; }

    friend FunctionSpace build_space(const SurfaceMesh& mesh, int order, int g, int quadrature_degree);

private:
    std::shared_ptr<const SurfaceMesh> mesh_;
    int order_ = 1;
    std::vector<Vec3> nodes_;
    std::vector<int> dofs_;
    std::vector<TangentFrame> frames_;
    std::vector<Eigen::Matrix<double, 2, 3>> bary_gradients_;
    std::vector<double> areas_;
    TriangleRule quadrature_;
    TriangleRule constraint_rule_;
    std::vector<Eigen::MatrixXd> gradient_maps_;
    std::vector<Eigen::VectorXd> value_maps_;
};

/// order 1: one constraint point per triangle (g ignored). order 2: g in {3, 6, 7}.
inline FunctionSpace build_space(const SurfaceMesh& mesh, int order, int g = 6, int quadrature_degree = 4) {
    if (order != 1 && order != 2) {
        throw Error(ErrorKind::Validation, "unsupported element order " + std::to_string(order) + " (expected 1 or 2)");
    }
    if (order == 2 && g != 3 && g != 6 && g != 7) {
        throw Error(ErrorKind::Validation, "order-2 spaces need g in {3, 6, 7}, got " + std::to_string(g));
    }
    // Stiffness needs degree 2r-2, load needs degree r.
    require(quadrature_degree >= order, "quadrature degree must be at least the element order");

    FunctionSpace s;
    s.mesh_ = std::make_shared<const SurfaceMesh>(mesh);
    s.order_ = order;
    s.quadrature_ = rule_by_degree(quadrature_degree);
    s.constraint_rule_ = order == 1 ? rule_by_points(1) : rule_by_points(g);

    const int nv = mesh.num_vertices(), nt = mesh.num_triangles();
    s.nodes_ = mesh.vertices();
    if (order == 2) {
        for (const auto& e : mesh.edges()) s.nodes_.push_back(0.5 * (mesh.vertex(e.v0) + mesh.vertex(e.v1)));
    }
    const int nloc = s.local_dofs();
    s.dofs_.resize(static_cast<std::size_t>(nt) * nloc);
    for (int t = 0; t < nt; ++t) {
        const auto& f = mesh.triangle(t);
        for (int k = 0; k < 3; ++k) s.dofs_[t * nloc + k] = f[k];
        if (order == 2) {
            for (int k = 0; k < 3; ++k) s.dofs_[t * nloc + 3 + k] = nv + mesh.triangle_edge(t, k);
        }
    }

    s.frames_ = tangent_frames(mesh);
    s.bary_gradients_.resize(nt);
    s.areas_.resize(nt);
    for (int t = 0; t < nt; ++t) {
        const auto& f = mesh.triangle(t);
        const auto& fr = s.frames_[t];
        const Vec2 d1 = fr.project(mesh.vertex(f[1]) - mesh.vertex(f[0]));
        const Vec2 d2 = fr.project(mesh.vertex(f[2]) - mesh.vertex(f[0]));
        Eigen::Matrix2d jac;
        jac << d1, d2;
        const Eigen::Matrix2d inv = jac.inverse();
        auto& gl = s.bary_gradients_[t];
        gl.col(1) = inv.row(0).transpose();
        gl.col(2) = inv.row(1).transpose();
        gl.col(0) = -gl.col(1) - gl.col(2);
        s.areas_[t] = 0.5 * std::abs(jac.determinant());
    }

    const int np = s.num_constraint_points();
    s.gradient_maps_.resize(np);
    s.value_maps_.resize(np);
    const int g_eff = s.points_per_triangle();
    for (int t = 0; t < nt; ++t) {
        for (int q = 0; q < g_eff; ++q) {
            const auto& l = s.constraint_rule_.points[q];
            s.gradient_maps_[t * g_eff + q] = s.shape_gradients(t, l);
            s.value_maps_[t * g_eff + q] = s.shape_values(l);
        }
    }
    return s;
}

// ---------------------------------------------------------------------------
// Assembly

/// Energy terms: K[i][j] = integral of grad phi_i . grad phi_j, load[i] = integral of phi_i.
struct QuadraticForm {
    SparseMatrix stiffness;
    Vector load;
    double area = 0.0;

    /// Coordinate-format dump (row col value), lower triangle included.
    void write_coo(std::ostream& os) const {
        os.precision(17);
        for (int k = 0; k < stiffness.outerSize(); ++k)
            for (SparseMatrix::InnerIterator it(stiffness, k); it; ++it)
                os << it.row() << ' ' << it.col() << ' ' << it.value() << '\n';
    }
};

inline QuadraticForm assemble(const FunctionSpace& space) {
    const auto& mesh = space.mesh();
    const int n = space.num_dofs(), nloc = space.local_dofs();
    const auto& rule = space.quadrature();

    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(mesh.num_triangles()) * nloc * nloc);
    QuadraticForm form;
    form.load = Vector::Zero(n);
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const double area = space.triangle_area(t);
        Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(nloc, nloc);
        Eigen::VectorXd le = Eigen::VectorXd::Zero(nloc);
        for (int q = 0; q < rule.size(); ++q) {
            const Eigen::MatrixXd b = space.shape_gradients(t, rule.points[q]);
            ke.noalias() += rule.weights[q] * area * b.transpose() * b;
            le += rule.weights[q] * area * space.shape_values(rule.points[q]);
        }
        const auto dofs = space.triangle_dofs(t);
        for (int i = 0; i < nloc; ++i) {
            form.load[dofs[i]] += le[i];
            for (int j = 0; j < nloc; ++j) trip.emplace_back(dofs[i], dofs[j], ke(i, j));
        }
        form.area += area;
    }
    form.stiffness.resize(n, n);
    form.stiffness.setFromTriplets(trip.begin(), trip.end());
    return form;
}

/// Local stiffness matrix of one triangle (exposed for element-level checks).
inline Eigen::MatrixXd local_stiffness(const FunctionSpace& space, int t) {
    const auto& rule = space.quadrature();
    Eigen::MatrixXd ke = Eigen::MatrixXd::Zero(space.local_dofs(), space.local_dofs());
    for (int q = 0; q < rule.size(); ++q) {
        const Eigen::MatrixXd b = space.shape_gradients(t, rule.points[q]);
        ke.noalias() += rule.weights[q] * space.triangle_area(t) * b.transpose() * b;
    }
    return ke;
}

// ---------------------------------------------------------------------------
// Evaluation

inline void check_dims(const FunctionSpace& space, const Vector& coeffs) {
    if (coeffs.size() != space.num_dofs()) {
        throw Error(ErrorKind::Dimension, "coefficient vector has length " + std::to_string(coeffs.size()) +
                                              ", space has " + std::to_string(space.num_dofs()) + " dofs");
    }
}

inline Eigen::VectorXd gather(const FunctionSpace& space, const Vector& coeffs, int t) {
    const auto dofs = space.triangle_dofs(t);
    Eigen::VectorXd local(dofs.size());
    for (std::size_t i = 0; i < dofs.size(); ++i) local[static_cast<Eigen::Index>(i)] = coeffs[dofs[i]];
    return local;
}

/// Tangent-frame gradient at every constraint point.
inline std::vector<Vec2> gradient_at_constraints(const FunctionSpace& space, const Vector& coeffs) {
    check_dims(space, coeffs);
    const int g = space.points_per_triangle();
    std::vector<Vec2> out(space.num_constraint_points());
    for (int t = 0; t < space.mesh().num_triangles(); ++t) {
        const Eigen::VectorXd local = gather(space, coeffs, t);
        for (int q = 0; q < g; ++q) out[t * g + q] = space.gradient_map(t * g + q) * local;
    }
    return out;
}

/// Element interpolant value at every constraint point.
inline Vector value_at_constraints(const FunctionSpace& space, const Vector& coeffs) {
    check_dims(space, coeffs);
    const int g = space.points_per_triangle();
    Vector out(space.num_constraint_points());
    for (int t = 0; t < space.mesh().num_triangles(); ++t) {
        const Eigen::VectorXd local = gather(space, coeffs, t);
        for (int q = 0; q < g; ++q) out[t * g + q] = space.value_map(t * g + q).dot(local);
    }
    return out;
}

/// Value and 3D (ambient) gradient at an arbitrary barycentric point of triangle t.
inline std::pair<double, Vec3> evaluate(const FunctionSpace& space, const Vector& coeffs, int t,
                                        const Eigen::Vector3d& bary) {
    const Eigen::VectorXd local = gather(space, coeffs, t);
    const double value = space.shape_values(bary).dot(local);
    const Vec2 g = space.shape_gradients(t, bary) * local;
    return {value, space.frames()[t].lift(g)};
}

/// Stacked global gradient operator: rows 2p, 2p+1 give the tangent gradient at constraint point p.
inline SparseMatrix gradient_operator(const FunctionSpace& space) {
    const int g = space.points_per_triangle(), nloc = space.local_dofs();
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(static_cast<std::size_t>(space.num_constraint_points()) * 2 * nloc);
    for (int t = 0; t < space.mesh().num_triangles(); ++t) {
        const auto dofs = space.triangle_dofs(t);
        for (int q = 0; q < g; ++q) {
            const int p = t * g + q;
            const auto& map = space.gradient_map(p);
            for (int i = 0; i < nloc; ++i) {
                trip.emplace_back(2 * p, dofs[i], map(0, i));
                trip.emplace_back(2 * p + 1, dofs[i], map(1, i));
            }
        }
    }
    SparseMatrix op(2 * space.num_constraint_points(), space.num_dofs());
    op.setFromTriplets(trip.begin(), trip.end());
    return op;
}

/// Lagrange interpolation: coeffs[i] = f(node_i).
inline Vector interpolate(const FunctionSpace& space, const std::function<double(const Vec3&)>& f) {
    Vector c(space.num_dofs());
    for (int i = 0; i < space.num_dofs(); ++i) c[i] = f(space.node(i));
    return c;
}

/// Max gradient norm on a barycentric lattice of the given resolution in every
/// triangle. For order 2 this audits the constraint between the points where
/// it is imposed.
inline double audit_max_gradient(const FunctionSpace& space, const Vector& coeffs, int resolution = 4) {
    check_dims(space, coeffs);
    double worst = 0.0;
    for (int t = 0; t < space.mesh().num_triangles(); ++t) {
        const Eigen::VectorXd local = gather(space, coeffs, t);
        for (int i = 0; i <= resolution; ++i) {
            for (int j = 0; i + j <= resolution; ++j) {
                const Eigen::Vector3d l(double(resolution - i - j) / resolution, double(i) / resolution,
                                        double(j) / resolution);
                worst = std::max(worst, (space.shape_gradients(t, l) * local).norm());
            }
        }
    }
    return worst;
}

}  // namespace cutlocus
