#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <sstream>

#include <Eigen/Dense>

#include "cutlocus/fem.hpp"
#include "support.hpp"

namespace {

using namespace cutlocus;
using cutlocus::testing::octahedron;

double factorial(int n) { return n <= 1 ? 1.0 : n * factorial(n - 1); }

Eigen::MatrixXd dense(const SparseMatrix& m) { return Eigen::MatrixXd(m); }

Vector random_vector(int n, std::mt19937_64& rng) {
    std::normal_distribution<double> d;
    Vector v(n);
    for (int i = 0; i < n; ++i) v[i] = d(rng);
    return v;
}

/// Flat right triangle (0,0,0), (1,0,0), (0,1,0) as face 0 of a tetrahedron.
SurfaceMesh corner_tetrahedron() {
    return SurfaceMesh({{0, 0, 0}, {1, 0, 0}, {0, 1, 0}, {0, 0, 1}}, {{{0, 1, 2}}, {{0, 3, 1}}, {{0, 2, 3}}, {{1, 3, 2}}});
}

TEST(Quadrature, ExactToDeclaredDegree) {
    for (int n : {1, 3, 6, 7}) {
        const TriangleRule r = rule_by_points(n);
        double wsum = 0.0;
        for (double w : r.weights) wsum += w;
        EXPECT_NEAR(wsum, 1.0, 1e-12);
        for (int a = 0; a <= r.degree; ++a) {
            for (int b = 0; a + b <= r.degree; ++b) {
                double q = 0.0;
                for (int i = 0; i < r.size(); ++i) q += r.weights[i] * std::pow(r.points[i][1], a) * std::pow(r.points[i][2], b);
                const double exact = factorial(a) * factorial(b) / factorial(a + b + 2);
                EXPECT_NEAR(0.5 * q, exact, 1e-12) << n << " points, x^" << a << " y^" << b;
            }
        }
        for (const auto& p : r.points) EXPECT_NEAR(p.sum(), 1.0, 1e-15);
    }
    EXPECT_EQ(rule_by_degree(4).size(), 6);
    EXPECT_THROW(rule_by_points(4), Error);
    EXPECT_THROW(rule_by_degree(6), Error);
}

TEST(Space, OctahedronCounts) {
    const SurfaceMesh m = octahedron();
    const FunctionSpace p1 = build_space(m, 1);
    EXPECT_EQ(p1.num_dofs(), 6);
    EXPECT_EQ(p1.num_constraint_points(), 8);
    const FunctionSpace p2 = build_space(m, 2, 3);
    EXPECT_EQ(p2.num_dofs(), 18);
    EXPECT_EQ(p2.num_constraint_points(), 24);
    EXPECT_EQ(build_space(m, 1, 7).points_per_triangle(), 1);
    EXPECT_EQ(build_space(m, 2, 6).points_per_triangle(), 6);
    EXPECT_EQ(build_space(m, 2, 7).points_per_triangle(), 7);
}

TEST(Space, RejectsUnsupportedConfigurations) {
    const SurfaceMesh m = octahedron();
    EXPECT_THROW(build_space(m, 3), Error);
    EXPECT_THROW(build_space(m, 0), Error);
    EXPECT_THROW(build_space(m, 2, 4), Error);
    EXPECT_THROW(build_space(m, 2, 6, 1), Error);
}

TEST(Space, DofTableIsConforming) {
    const SurfaceMesh m = generate_torus(2, 1, 10, 6);
    const FunctionSpace s = build_space(m, 2, 6);
    std::vector<int> uses(s.num_dofs(), 0);
    for (int t = 0; t < m.num_triangles(); ++t)
        for (int d : s.triangle_dofs(t)) ++uses[d];
    for (int u : uses) EXPECT_GE(u, 1);

    // Both triangles on an edge see the same midpoint dof, located at the edge midpoint.
    for (int t = 0; t < m.num_triangles(); ++t) {
        const auto& f = m.triangle(t);
        for (int k = 0; k < 3; ++k) {
            const int a = f[k], b = f[(k + 1) % 3];
            const int dof = s.triangle_dofs(t)[3 + k];
            EXPECT_LT((s.node(dof) - 0.5 * (m.vertex(a) + m.vertex(b))).norm(), 1e-15);
            const int other = m.neighbor(t, k);
            const auto& g = m.triangle(other);
            int found = 0;
            for (int j = 0; j < 3; ++j) {
                const int c = g[j], d = g[(j + 1) % 3];
                if ((c == a && d == b) || (c == b && d == a)) {
                    EXPECT_EQ(s.triangle_dofs(other)[3 + j], dof);
                    ++found;
                }
            }
            EXPECT_EQ(found, 1);
        }
        for (int k = 0; k < 3; ++k) EXPECT_EQ(s.triangle_dofs(t)[k], f[k]);
    }
}

TEST(Space, ConstraintPointsInsideTriangles) {
    const SurfaceMesh m = generate_sphere(1.0, 1);
    for (int g : {3, 6, 7}) {
        const FunctionSpace s = build_space(m, 2, g);
        for (int p = 0; p < s.num_constraint_points(); ++p) {
            const auto cp = s.constraint_point(p);
            EXPECT_EQ(cp.triangle, p / g);
            EXPECT_GT(cp.bary.minCoeff(), 0.0);
            const auto& f = m.triangle(cp.triangle);
            const Vec3 x = cp.bary[0] * m.vertex(f[0]) + cp.bary[1] * m.vertex(f[1]) + cp.bary[2] * m.vertex(f[2]);
            EXPECT_LT((x - cp.position).norm(), 1e-15);
        }
    }
}

TEST(Gradient, ConstantsHaveZeroGradient) {
    const SurfaceMesh m = generate_sphere(1.0, 2);
    for (int order : {1, 2}) {
        const FunctionSpace s = build_space(m, order, 6);
        for (int p = 0; p < s.num_constraint_points(); ++p)
            EXPECT_LT((s.gradient_map(p) * Eigen::VectorXd::Ones(s.local_dofs())).norm(), 1e-12);
        const Vector c = Vector::Constant(s.num_dofs(), 3.7);
        for (const auto& g : gradient_at_constraints(s, c)) EXPECT_LT(g.norm(), 1e-11);
    }
}

TEST(Gradient, LinearFunctionsReproduceTangentialProjection) {
    const SurfaceMesh m = corner_tetrahedron();
    const Vec3 v(0.3, -1.2, 2.5);
    for (int order : {1, 2}) {
        const FunctionSpace s = build_space(m, order, 7);
        const Vector c = interpolate(s, [&](const Vec3& x) { return x.dot(v) + 0.4; });
        const auto grads = gradient_at_constraints(s, c);
        for (int p = 0; p < s.num_constraint_points(); ++p) {
            const int t = p / s.points_per_triangle();
            const Vec3 n = m.face_normal(t);
            const Vec3 expected = v - v.dot(n) * n;
            EXPECT_LT((s.frames()[t].lift(grads[p]) - expected).norm(), 1e-12) << "order " << order << " point " << p;
        }
    }
}

TEST(Gradient, HeightFunctionOnSphereIsOneLipschitz) {
    const SurfaceMesh m = generate_sphere(1.0, 3);
    for (int order : {1, 2}) {
        const FunctionSpace s = build_space(m, order, 6);
        const Vector c = interpolate(s, [](const Vec3& x) { return x.z(); });
        const auto grads = gradient_at_constraints(s, c);
        const double h = m.h_max();
        for (const auto& g : grads) EXPECT_LE(g.norm(), 1.0 + h * h);
    }
}

TEST(Gradient, IsLinearInCoefficients) {
    std::mt19937_64 rng(11);
    const SurfaceMesh m = generate_torus(2, 1, 8, 6);
    for (int order : {1, 2}) {
        const FunctionSpace s = build_space(m, order, 3);
        const Vector a = random_vector(s.num_dofs(), rng), b = random_vector(s.num_dofs(), rng);
        const double alpha = 1.7, beta = -0.4;
        const auto ga = gradient_at_constraints(s, a), gb = gradient_at_constraints(s, b);
        const auto gab = gradient_at_constraints(s, alpha * a + beta * b);
        for (std::size_t p = 0; p < ga.size(); ++p) EXPECT_LT((gab[p] - alpha * ga[p] - beta * gb[p]).norm(), 1e-11);
    }
}

TEST(Gradient, OperatorMatchesPointwiseEvaluation) {
    std::mt19937_64 rng(5);
    const SurfaceMesh m = generate_sphere(1.0, 1);
    for (int order : {1, 2}) {
        const FunctionSpace s = build_space(m, order, 6);
        const Vector c = random_vector(s.num_dofs(), rng);
        const Vector stacked = gradient_operator(s) * c;
        const auto grads = gradient_at_constraints(s, c);
        for (std::size_t p = 0; p < grads.size(); ++p) {
            EXPECT_NEAR(stacked[2 * p], grads[p].x(), 1e-12);
            EXPECT_NEAR(stacked[2 * p + 1], grads[p].y(), 1e-12);
        }
    }
}

TEST(Gradient, DimensionMismatchIsReported) {
    const FunctionSpace s = build_space(octahedron(), 1);
    try {
        gradient_at_constraints(s, Vector::Zero(5));
        FAIL() << "short vector accepted";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::Dimension);
    }
    EXPECT_THROW(value_at_constraints(s, Vector::Zero(7)), Error);
}

TEST(Interpolate, ZeroAndOne) {
    const FunctionSpace s = build_space(generate_sphere(1.0, 2), 2, 6);
    EXPECT_EQ(interpolate(s, [](const Vec3&) { return 0.0; }), Vector::Zero(s.num_dofs()));
    const Vector one = interpolate(s, [](const Vec3&) { return 1.0; });
    EXPECT_EQ(one, Vector::Ones(s.num_dofs()));
    const QuadraticForm f = assemble(s);
    EXPECT_NEAR(one.dot(f.stiffness * one), 0.0, 1e-12);
}

TEST(Interpolate, GeodesicDistanceIsNearlyOneLipschitz) {
    // The distance from the north pole is a cone at both poles. On the regular
    // five-triangle fan there, the interpolant has slope 1/cos(pi/5) at every h.
    const double fan = 1.0 / std::cos(std::numbers::pi / 5);
    double previous_excess = 1.0;
    for (int level : {3, 4, 5}) {
        const SurfaceMesh m = generate_sphere(1.0, level);
        const FunctionSpace s = build_space(m, 1);
        auto polar = [](const Vec3& x) { return std::acos(std::clamp(x.z() / x.norm(), -1.0, 1.0)); };
        const Vector c = interpolate(s, polar);
        const auto grads = gradient_at_constraints(s, c);
        double worst = 0.0, worst_far = 0.0, worst_mid = 0.0;
        for (int t = 0; t < m.num_triangles(); ++t) {
            double to_pole = std::numbers::pi;
            for (int v : m.triangle(t)) {
                const double a = polar(m.vertex(v));
                to_pole = std::min({to_pole, a, std::numbers::pi - a});
            }
            const double g = grads[t].norm();
            worst = std::max(worst, g);
            if (to_pole >= 0.2) worst_mid = std::max(worst_mid, g);
            if (to_pole >= 0.4) worst_far = std::max(worst_far, g);
        }
        EXPECT_LE(worst, fan + 1e-9) << "level " << level;
        EXPECT_GT(worst, fan - 1e-3) << "level " << level;
        EXPECT_LE(worst_far, 1.05) << "level " << level;
        EXPECT_LT(worst_mid - 1.0, 0.75 * previous_excess) << "level " << level;
        previous_excess = worst_mid - 1.0;
    }
}

TEST(Assemble, ConstantsInKernelAndLoadSumsToArea) {
    for (const SurfaceMesh& m : {octahedron(), generate_sphere(1.0, 3), generate_torus(2, 1, 16, 8)}) {
        for (int order : {1, 2}) {
            const QuadraticForm f = assemble(build_space(m, order, 6));
            const Vector k1 = f.stiffness * Vector::Ones(f.load.size());
            const double kmax = dense(f.stiffness).cwiseAbs().maxCoeff();
            EXPECT_LE(k1.cwiseAbs().maxCoeff(), 1e-12 * kmax);
            EXPECT_NEAR(f.load.sum(), m.total_area(), 1e-12 * m.total_area());
            EXPECT_NEAR(f.area, m.total_area(), 1e-12 * m.total_area());
            EXPECT_LT((dense(f.stiffness) - dense(f.stiffness).transpose()).cwiseAbs().maxCoeff(), 1e-14 * kmax);
        }
    }
}

TEST(Assemble, IcosphereLoadMatchesSphereArea) {
    const SurfaceMesh m = generate_sphere(1.0, 3);
    const QuadraticForm f = assemble(build_space(m, 1));
    double area = 0.0;
    for (const auto& t : m.triangles())
        area += 0.5 * (m.vertex(t[1]) - m.vertex(t[0])).cross(m.vertex(t[2]) - m.vertex(t[0])).norm();
    EXPECT_NEAR(f.load.sum(), area, 1e-12);
    EXPECT_LT(std::abs(f.load.sum() - 4 * std::numbers::pi) / (4 * std::numbers::pi), 0.02);
}

TEST(Assemble, ReferenceTriangleLocalStiffness) {
    const FunctionSpace s = build_space(corner_tetrahedron(), 1);
    Eigen::Matrix3d expected;
    expected << 1, -0.5, -0.5, -0.5, 0.5, 0, -0.5, 0, 0.5;
    EXPECT_LT((local_stiffness(s, 0) - expected).cwiseAbs().maxCoeff(), 1e-14);
}

TEST(Assemble, PositiveSemidefinite) {
    std::mt19937_64 rng(3);
    for (int order : {1, 2}) {
        const QuadraticForm f = assemble(build_space(generate_torus(2, 1, 12, 6), order, 6));
        for (int i = 0; i < 100; ++i) {
            const Vector v = random_vector(f.load.size(), rng);
            EXPECT_GE(v.dot(f.stiffness * v), -1e-10 * v.squaredNorm());
        }
    }
}

TEST(Assemble, KernelIsExactlyTheConstants) {
    for (const SurfaceMesh& m : {octahedron(), generate_sphere(1.0, 1), generate_torus(2, 1, 6, 4)}) {
        for (int order : {1, 2}) {
            const QuadraticForm f = assemble(build_space(m, order, 6));
            const Eigen::VectorXd ev = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(dense(f.stiffness)).eigenvalues();
            const double scale = ev.cwiseAbs().maxCoeff();
            EXPECT_LT(std::abs(ev[0]), 1e-12 * scale);
            EXPECT_GT(ev[1], 1e-8 * scale);
        }
    }
}

TEST(Assemble, EnergyMatchesPerTriangleFormula) {
    std::mt19937_64 rng(17);
    for (const SurfaceMesh& m : {octahedron(), generate_sphere(1.0, 2), generate_torus(2, 1, 12, 8)}) {
        const QuadraticForm f = assemble(build_space(m, 1));
        for (int i = 0; i < 5; ++i) {
            const Vector c = random_vector(m.num_vertices(), rng);
            const auto [energy, integral] = cutlocus::testing::p1_energy_and_integral(m, c);
            EXPECT_NEAR(c.dot(f.stiffness * c), energy, 1e-10 * energy);
            EXPECT_NEAR(f.load.dot(c), integral, 1e-10 * std::max(1.0, std::abs(integral)));
        }
    }
}

TEST(Assemble, P2EnergyMatchesGradientQuadrature) {
    // |grad u|^2 is quadratic for P2, so the 3-point rule integrates it exactly.
    std::mt19937_64 rng(23);
    const SurfaceMesh m = generate_sphere(1.0, 1);
    const FunctionSpace s = build_space(m, 2, 6);
    const QuadraticForm f = assemble(s);
    const TriangleRule r3 = rule_by_points(3);
    const Vector c = random_vector(s.num_dofs(), rng);
    double energy = 0.0, integral = 0.0;
    for (int t = 0; t < m.num_triangles(); ++t) {
        for (int q = 0; q < r3.size(); ++q) {
            const auto [u, g] = evaluate(s, c, t, r3.points[q]);
            energy += r3.weights[q] * m.area(t) * g.squaredNorm();
            integral += r3.weights[q] * m.area(t) * u;
        }
    }
    EXPECT_NEAR(c.dot(f.stiffness * c), energy, 1e-10 * energy);
    EXPECT_NEAR(f.load.dot(c), integral, 1e-10 * std::max(1.0, std::abs(integral)));
}

TEST(Assemble, IndependentOfTriangleOrder) {
    const SurfaceMesh m = generate_torus(2, 1, 10, 6);
    RawMesh shuffled = m.raw();
    std::mt19937_64 rng(2);
    std::shuffle(shuffled.triangles.begin(), shuffled.triangles.end(), rng);
    const QuadraticForm a = assemble(build_space(m, 1));
    const QuadraticForm b = assemble(build_space(SurfaceMesh(shuffled), 1));
    const double scale = dense(a.stiffness).cwiseAbs().maxCoeff();
    EXPECT_LE((dense(a.stiffness) - dense(b.stiffness)).cwiseAbs().maxCoeff(), 1e-12 * scale);
    EXPECT_LE((a.load - b.load).cwiseAbs().maxCoeff(), 1e-12 * a.load.cwiseAbs().maxCoeff());
}

TEST(Assemble, CoordinateDumpRebuildsMatrix) {
    const QuadraticForm f = assemble(build_space(octahedron(), 2, 3));
    std::ostringstream os;
    f.write_coo(os);
    std::istringstream in(os.str());
    Eigen::MatrixXd rebuilt = Eigen::MatrixXd::Zero(f.load.size(), f.load.size());
    int r, c;
    double v;
    while (in >> r >> c >> v) rebuilt(r, c) += v;
    EXPECT_EQ(rebuilt, dense(f.stiffness));
}

TEST(Audit, MatchesConstraintPointsForP1) {
    std::mt19937_64 rng(8);
    const FunctionSpace s = build_space(generate_sphere(1.0, 2), 1);
    const Vector c = random_vector(s.num_dofs(), rng);
    double worst = 0.0;
    for (const auto& g : gradient_at_constraints(s, c)) worst = std::max(worst, g.norm());
    EXPECT_NEAR(audit_max_gradient(s, c), worst, 1e-12 * worst);

    const FunctionSpace s2 = build_space(generate_sphere(1.0, 2), 2, 3);
    const Vector c2 = random_vector(s2.num_dofs(), rng);
    double worst2 = 0.0;
    for (const auto& g : gradient_at_constraints(s2, c2)) worst2 = std::max(worst2, g.norm());
    EXPECT_GE(audit_max_gradient(s2, c2), worst2 * (1 - 1e-12));
}

}  // namespace
