#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <ostream>
#include <vector>

#include "cutlocus/cutlocus.hpp"
#include "cutlocus/error.hpp"
#include "cutlocus/fem.hpp"
#include "cutlocus/mesh.hpp"
#include "cutlocus/solver.hpp"
#include "cutlocus/surface.hpp"

namespace cutlocus {

struct SurfaceLocation {
    int triangle = -1;
    Eigen::Vector3d bary = Eigen::Vector3d::Zero();
};

/// Barycentric coordinates of the point where the line s + tau * normal meets the plane of triangle t.
inline Eigen::Vector3d normal_line_bary(const SurfaceMesh& mesh, int t, const Vec3& s, const Vec3& normal) {
    const auto& f = mesh.triangle(t);
    const Vec3 &a = mesh.vertex(f[0]), &b = mesh.vertex(f[1]), &c = mesh.vertex(f[2]);
    const Vec3 n = (b - a).cross(c - a);
    const double denom = n.dot(normal);
    const double tau = std::abs(denom) > 1e-300 ? n.dot(a - s) / denom : 0.0;
    const Vec3 x = s + tau * normal;
    const double twice = n.squaredNorm();
    return {n.dot((b - x).cross(c - x)) / twice, n.dot((c - x).cross(a - x)) / twice, n.dot((a - x).cross(b - x)) / twice};
}

/// Finds the triangle of `mesh` hit by the surface normal line through s, by
/// walking across edges from `hint`. Points that fall in no triangle within the
/// step budget get the best candidate seen (least negative coordinate).
inline SurfaceLocation locate(const SurfaceMesh& mesh, const AnalyticSurface& surface, const Vec3& s, int hint) {
    const Vec3 normal = surface.normal(s);
    SurfaceLocation best;
    double best_min = -std::numeric_limits<double>::infinity();
    int t = hint;
    for (int step = 0; step < 4 * mesh.num_triangles() && step < 256; ++step) {
        const Eigen::Vector3d l = normal_line_bary(mesh, t, s, normal);
        int k = 0;
        l.minCoeff(&k);
        if (l[k] > best_min) {
            best_min = l[k];
            best = {t, l};
        }
        if (l[k] >= -1e-12) break;
        // Vertex k is opposite edge k + 1 (edge j runs v[j] -> v[j+1]).
        const int next = mesh.neighbor(t, (k + 1) % 3);
        if (next == best.triangle && best.triangle != t) break;
        t = next;
    }
    return best;
}

/// One solved level of a refinement hierarchy.
struct StudyLevel {
    int level = 0;
    FunctionSpace space;
    QuadraticForm form;
    SolutionField solution;
    CutLocusSet set;  ///< filtered
};

struct LevelComparison {
    double l1_error = 0.0;
    double l2_gradient_error = 0.0;
    double symdiff_area = 0.0;
};

/// Compares a coarse level against a finer one of the same nested hierarchy
/// (fine triangle t descends from coarse triangle t / 4^(level gap)). The coarse
/// field is lifted to the surface through the normal lines and integrated on
/// the fine mesh; gradients are compared in the tangent plane of the surface.
/// E is compared per fine triangle through its projected centroid.
inline LevelComparison compare_levels(const StudyLevel& coarse, const StudyLevel& fine, const AnalyticSurface& surface) {
    const int gap = fine.level - coarse.level;
    require(gap >= 0, "fine level must not be coarser than the coarse level");
    const auto& cm = coarse.space.mesh();
    const auto& fm = fine.space.mesh();
    require(fm.num_triangles() == cm.num_triangles() << (2 * gap), "levels are not nested");

    const auto& rule = fine.space.quadrature();
    LevelComparison out;
    double l2 = 0.0;
    for (int tf = 0; tf < fm.num_triangles(); ++tf) {
        const int hint = tf >> (2 * gap);
        const double area = fm.area(tf);
        for (int q = 0; q < rule.size(); ++q) {
            const Eigen::Vector3d& l = rule.points[q];
            const auto& f = fm.triangle(tf);
            const Vec3 y = l[0] * fm.vertex(f[0]) + l[1] * fm.vertex(f[1]) + l[2] * fm.vertex(f[2]);
            const Vec3 s = surface.project(y);
            const auto loc = locate(cm, surface, s, hint);
            const auto [uc, gc] = evaluate(coarse.space, coarse.solution.coeffs, loc.triangle, loc.bary);
            const auto [uf, gf] = evaluate(fine.space, fine.solution.coeffs, tf, l);
            const Vec3 nu = surface.normal(s);
            Vec3 d = gc - gf;
            d -= nu.dot(d) * nu;
            out.l1_error += rule.weights[q] * area * std::abs(uc - uf);
            l2 += rule.weights[q] * area * d.squaredNorm();
        }
        const auto& f = fm.triangle(tf);
        const Vec3 centroid = surface.project((fm.vertex(f[0]) + fm.vertex(f[1]) + fm.vertex(f[2])) / 3.0);
        const int tc = locate(cm, surface, centroid, hint).triangle;
        if (fine.set.triangle_flags[tf] != coarse.set.triangle_flags[tc]) out.symdiff_area += area;
    }
    out.l2_gradient_error = std::sqrt(l2);
    return out;
}

/// Least-squares slope of log(error) against log(h); points with error <= 0 are skipped.
struct ConvergenceFit {
    double slope = std::numeric_limits<double>::quiet_NaN();
    double intercept = std::numeric_limits<double>::quiet_NaN();
    int points = 0;

    bool valid() const { return points >= 2 && std::isfinite(slope); }
};

inline ConvergenceFit fit_order(const std::vector<double>& h, const std::vector<double>& error) {
    require(h.size() == error.size(), "fit needs matching h and error lists", ErrorKind::Dimension);
    std::vector<double> x, y;
    for (std::size_t i = 0; i < h.size(); ++i) {
        if (h[i] > 0.0 && error[i] > 0.0) {
            x.push_back(std::log(h[i]));
            y.push_back(std::log(error[i]));
        }
    }
    ConvergenceFit fit;
    fit.points = static_cast<int>(x.size());
    if (fit.points < 2) return fit;
    const double n = fit.points;
    double sx = 0, sy = 0, sxx = 0, sxy = 0;
    for (std::size_t i = 0; i < x.size(); ++i) {
        sx += x[i];
        sy += y[i];
        sxx += x[i] * x[i];
        sxy += x[i] * y[i];
    }
    const double det = n * sxx - sx * sx;
    if (std::abs(det) < 1e-300) return fit;
    fit.slope = (n * sxy - sx * sy) / det;
    fit.intercept = (sy - fit.slope * sx) / n;
    return fit;
}

struct StudyOptions {
    std::vector<int> levels;          ///< refinement levels, ascending; the first is the base mesh
    std::vector<double> m_values;
    double lambda = 0.1;
    double filter_fraction = 1e-3;
    int order = 1;
    int g = 6;
    int quadrature_degree = 4;
    Vec3 source_point = Vec3(0, 0, 1);  ///< snapped to the nearest vertex on every level
    SolveParams params;                 ///< m is taken from m_values

    void validate() const {
        require(!levels.empty(), "study needs at least one level");
        require(std::is_sorted(levels.begin(), levels.end()) &&
                    std::adjacent_find(levels.begin(), levels.end()) == levels.end(),
                "study levels must be strictly increasing");
        require(!m_values.empty(), "study needs at least one m value");
        for (double m : m_values) require(m > 0.0, "m must be positive");
        require(lambda > 0.0, "lambda must be positive");
    }
};

struct StudyRow {
    double m = 0.0;
    int level = 0;
    double h = 0.0;
    int triangles = 0;
    int dofs = 0;
    double objective = 0.0;
    double objective_gap = 0.0;  ///< |F_h - F_finest|
    double l1_error = 0.0;
    double l2_gradient_error = 0.0;
    double symdiff_area = 0.0;
    double flagged_area = 0.0;
    int components = 0;
    int iterations = 0;
    bool converged = false;
};

struct StudyFits {
    double m = 0.0;
    ConvergenceFit l1;
    ConvergenceFit l2_gradient;
    ConvergenceFit objective;
    ConvergenceFit symdiff;
};

struct StudyReport {
    std::vector<StudyRow> rows;  ///< grouped by m, levels ascending
    std::vector<StudyFits> fits;
};

inline StudyLevel solve_level(const SurfaceMesh& mesh, int level, double m, const StudyOptions& opt) {
    StudyLevel out{level, build_space(mesh, opt.order, opt.g, opt.quadrature_degree), {}, {}, {}};
    out.form = assemble(out.space);
    SolveParams p = opt.params;
    p.m = m;
    const SourceSet sources({mesh.nearest_vertex(opt.source_point)}, out.space.num_dofs());
    out.solution = solve(out.form, out.space, sources, p);
    out.set = filter(extract(out.solution, out.space, opt.lambda), mesh, opt.filter_fraction);
    return out;
}

/// Nested hierarchy: `base` is level opt.levels.front(); every further level is
/// obtained by refine_project. Errors are measured against the finest level.
inline StudyReport run_convergence_study(const SurfaceMesh& base, const AnalyticSurface& surface, const StudyOptions& opt) {
    opt.validate();
    std::vector<SurfaceMesh> meshes{base};
    for (int l = opt.levels.front() + 1; l <= opt.levels.back(); ++l) meshes.push_back(refine_project(meshes.back(), surface));

    StudyReport report;
    for (double m : opt.m_values) {
        std::vector<StudyLevel> solved;
        for (int l : opt.levels) solved.push_back(solve_level(meshes[l - opt.levels.front()], l, m, opt));
        const StudyLevel& finest = solved.back();

        std::vector<double> hs, l1, l2, gap, sd;
        for (const auto& lv : solved) {
            StudyRow row;
            row.m = m;
            row.level = lv.level;
            row.h = lv.space.mesh().h_max();
            row.triangles = lv.space.mesh().num_triangles();
            row.dofs = lv.space.num_dofs();
            row.objective = lv.solution.objective;
            row.objective_gap = std::abs(lv.solution.objective - finest.solution.objective);
            if (&lv != &finest) {
                const auto cmp = compare_levels(lv, finest, surface);
                row.l1_error = cmp.l1_error;
                row.l2_gradient_error = cmp.l2_gradient_error;
                row.symdiff_area = cmp.symdiff_area;
                hs.push_back(row.h);
                l1.push_back(row.l1_error);
                l2.push_back(row.l2_gradient_error);
                gap.push_back(row.objective_gap);
                sd.push_back(row.symdiff_area);
            }
            row.flagged_area = lv.set.flagged_area;
            row.components = static_cast<int>(lv.set.components.size());
            row.iterations = lv.solution.iterations;
            row.converged = lv.solution.converged;
            report.rows.push_back(row);
        }
        report.fits.push_back({m, fit_order(hs, l1), fit_order(hs, l2), fit_order(hs, gap), fit_order(hs, sd)});
    }
    return report;
}

inline void write_study_csv(std::ostream& os, const StudyReport& report) {
    os.precision(17);
    os << "m,level,h,triangles,dofs,objective,objective_gap,l1_error,l2_gradient_error,symdiff_area,flagged_area,"
          "components,iterations,converged\n";
    for (const auto& r : report.rows) {
        os << r.m << ',' << r.level << ',' << r.h << ',' << r.triangles << ',' << r.dofs << ',' << r.objective << ','
           << r.objective_gap << ',' << r.l1_error << ',' << r.l2_gradient_error << ',' << r.symdiff_area << ','
           << r.flagged_area << ',' << r.components << ',' << r.iterations << ',' << (r.converged ? 1 : 0) << '\n';
    }
}

inline void write_fit_csv(std::ostream& os, const StudyReport& report) {
    os.precision(17);
    os << "m,quantity,order,intercept,points\n";
    for (const auto& f : report.fits) {
        const std::pair<const char*, const ConvergenceFit*> items[] = {
            {"l1", &f.l1}, {"l2_gradient", &f.l2_gradient}, {"objective", &f.objective}, {"symdiff", &f.symdiff}};
        for (const auto& [name, fit] : items)
            os << f.m << ',' << name << ',' << fit->slope << ',' << fit->intercept << ',' << fit->points << '\n';
    }
}

}  // namespace cutlocus
