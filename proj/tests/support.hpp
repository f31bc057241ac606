#pragma once

#include <cmath>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "cutlocus/fem.hpp"
#include "cutlocus/mesh.hpp"

namespace cutlocus::testing {

inline std::filesystem::path asset_dir() { return CUTLOCUS_ASSET_DIR; }
inline std::filesystem::path fixture_dir() { return CUTLOCUS_FIXTURE_DIR; }

/// Unit octahedron, vertex 0 at the north pole (0,0,1), vertex 5 at the south pole.
inline RawMesh octahedron_raw() {
    RawMesh m;
    m.vertices = {{0, 0, 1}, {1, 0, 0}, {0, 1, 0}, {-1, 0, 0}, {0, -1, 0}, {0, 0, -1}};
    m.triangles = {{0, 1, 2}, {0, 2, 3}, {0, 3, 4}, {0, 4, 1}, {5, 2, 1}, {5, 3, 2}, {5, 4, 3}, {5, 1, 4}};
    return m;
}

inline SurfaceMesh octahedron() { return SurfaceMesh(octahedron_raw()); }

inline std::string off_text(const RawMesh& m) {
    std::ostringstream os;
    os.precision(17);
    os << "OFF\n" << m.vertices.size() << ' ' << m.triangles.size() << " 0\n";
    for (const auto& p : m.vertices) os << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
    for (const auto& t : m.triangles) os << "3 " << t[0] << ' ' << t[1] << ' ' << t[2] << '\n';
    return os.str();
}

inline std::string read_text(const std::filesystem::path& p) {
    std::ifstream in(p, std::ios::binary);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
    std::ofstream out(p, std::ios::binary);
    out << s;
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    explicit TempDir(const std::string& tag) {
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() / ("cutlocus_" + tag + "_" + std::to_string(rd()));
        std::filesystem::create_directories(path_);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const { return path_; }
    std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

private:
    std::filesystem::path path_;
};

// ---------------------------------------------------------------------------
// Per-triangle formulas that bypass FunctionSpace

/// Ambient gradient of the linear interpolant of (c0, c1, c2) on triangle (a, b, c):
/// grad = sum_i c_i (n x e_i) / (2A), e_i the edge opposite vertex i.
inline Vec3 p1_gradient(const Vec3& a, const Vec3& b, const Vec3& c, double c0, double c1, double c2) {
    const Vec3 cross = (b - a).cross(c - a);
    const double twice_area = cross.norm();
    const Vec3 n = cross / twice_area;
    return (c0 * n.cross(c - b) + c1 * n.cross(a - c) + c2 * n.cross(b - a)) / twice_area;
}

/// Dirichlet energy and integral of a P1 field, triangle by triangle.
inline std::pair<double, double> p1_energy_and_integral(const SurfaceMesh& mesh, const Vector& c) {
    double energy = 0.0, integral = 0.0;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& f = mesh.triangle(t);
        const Vec3 &a = mesh.vertex(f[0]), &b = mesh.vertex(f[1]), &d = mesh.vertex(f[2]);
        const double area = 0.5 * (b - a).cross(d - a).norm();
        energy += area * p1_gradient(a, b, d, c[f[0]], c[f[1]], c[f[2]]).squaredNorm();
        integral += area * (c[f[0]] + c[f[1]] + c[f[2]]) / 3.0;
    }
    return {energy, integral};
}

// ---------------------------------------------------------------------------
// Dense reference minimizer for tiny P1 instances

/// Euclidean projection of v onto {x : |A x| <= 1} for a 2 x n matrix A.
inline Eigen::VectorXd project_elliptic_cylinder(const Eigen::MatrixXd& A, const Eigen::VectorXd& v) {
    if ((A * v).norm() <= 1.0) return v;
    Eigen::JacobiSVD<Eigen::MatrixXd> svd(A, Eigen::ComputeFullV);
    const Eigen::VectorXd s = svd.singularValues();
    const Eigen::MatrixXd V = svd.matrixV();
    const Eigen::VectorXd w = V.transpose() * v;
    auto norm2 = [&](double mu) {
        double acc = 0.0;
        for (int i = 0; i < s.size(); ++i) acc += std::pow(s[i] * w[i] / (1.0 + mu * s[i] * s[i]), 2);
        return acc;
    };
    double lo = 0.0, hi = 1.0;
    while (norm2(hi) > 1.0) hi *= 2.0;
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        (norm2(mid) > 1.0 ? lo : hi) = mid;
    }
    Eigen::VectorXd x = w;
    for (int i = 0; i < s.size(); ++i) x[i] = w[i] / (1.0 + hi * s[i] * s[i]);
    return V * x;
}

/// Dykstra's alternating projection onto the intersection of elliptic cylinders.
inline Eigen::VectorXd dykstra(const std::vector<Eigen::MatrixXd>& sets, const Eigen::VectorXd& v, double tol = 1e-15,
                               int max_cycles = 200000) {
    const int k = static_cast<int>(sets.size());
    std::vector<Eigen::VectorXd> incr(k, Eigen::VectorXd::Zero(v.size()));
    Eigen::VectorXd x = v;
    for (int cycle = 0; cycle < max_cycles; ++cycle) {
        const Eigen::VectorXd start = x;
        for (int i = 0; i < k; ++i) {
            const Eigen::VectorXd y = project_elliptic_cylinder(sets[i], x + incr[i]);
            incr[i] = x + incr[i] - y;
            x = y;
        }
        if ((x - start).norm() <= tol) break;
    }
    return x;
}

struct DenseReference {
    Eigen::VectorXd coeffs;  ///< full vector, 0 at the pinned vertex
    double objective = 0.0;
    double stationarity = 0.0;
    int iterations = 0;
};

/// Projected gradient descent for min c'Kc - m l'c over |grad c| <= 1 per
/// triangle, c[pinned] = 0. K, l and the gradients come from the per-triangle
/// formulas above, not from the library's assembly.
inline DenseReference dense_projected_gradient(const SurfaceMesh& mesh, int pinned, double m, double tol = 1e-10,
                                               int max_iters = 2000000) {
    const int n = mesh.num_vertices();
    std::vector<int> free;
    for (int i = 0; i < n; ++i)
        if (i != pinned) free.push_back(i);
    const int nf = static_cast<int>(free.size());
    std::vector<int> slot(n, -1);
    for (int k = 0; k < nf; ++k) slot[free[k]] = k;

    Eigen::MatrixXd K = Eigen::MatrixXd::Zero(nf, nf);
    Eigen::VectorXd l = Eigen::VectorXd::Zero(nf);
    std::vector<Eigen::MatrixXd> sets;
    for (int t = 0; t < mesh.num_triangles(); ++t) {
        const auto& f = mesh.triangle(t);
        const Vec3 &a = mesh.vertex(f[0]), &b = mesh.vertex(f[1]), &c = mesh.vertex(f[2]);
        const double area = 0.5 * (b - a).cross(c - a).norm();
        std::array<Vec3, 3> grads;
        for (int i = 0; i < 3; ++i) {
            double e[3] = {0, 0, 0};
            e[i] = 1;
            grads[i] = p1_gradient(a, b, c, e[0], e[1], e[2]);
        }
        const Vec3 u1 = (b - a).normalized();
        const Vec3 u2 = ((b - a).cross(c - a)).cross(b - a).normalized();
        Eigen::MatrixXd A = Eigen::MatrixXd::Zero(2, nf);
        for (int i = 0; i < 3; ++i) {
            const int si = slot[f[i]];
            if (si < 0) continue;
            l[si] += area / 3.0;
            A(0, si) += grads[i].dot(u1);
            A(1, si) += grads[i].dot(u2);
            for (int j = 0; j < 3; ++j) {
                const int sj = slot[f[j]];
                if (sj >= 0) K(si, sj) += area * grads[i].dot(grads[j]);
            }
        }
        sets.push_back(A);
    }

    const double lmax = Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd>(K).eigenvalues().maxCoeff();
    const double step = 1.0 / (2.0 * lmax);
    Eigen::VectorXd x = Eigen::VectorXd::Zero(nf);
    DenseReference out;
    for (int it = 0; it < max_iters; ++it) {
        const Eigen::VectorXd grad = 2.0 * K * x - m * l;
        const Eigen::VectorXd next = dykstra(sets, x - step * grad);
        out.stationarity = (next - x).norm() / step;
        x = next;
        out.iterations = it + 1;
        if (out.stationarity <= tol) break;
    }
    out.coeffs = Eigen::VectorXd::Zero(n);
    for (int k = 0; k < nf; ++k) out.coeffs[free[k]] = x[k];
    out.objective = x.dot(K * x) - m * l.dot(x);
    return out;
}

}  // namespace cutlocus::testing
