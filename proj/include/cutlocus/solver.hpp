#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>
#include <string>
#include <vector>

#include <Eigen/SparseCholesky>
#include <Eigen/SparseCore>

#include "cutlocus/error.hpp"
#include "cutlocus/fem.hpp"

namespace cutlocus {

struct SolveParams {
    double m = 1.0;                  ///< weight of the volume term
    double rho = 0.0;                ///< penalty; <= 0 selects 2 * area / num_dofs
    double tol_primal = 1e-7;        ///< RMS constraint mismatch per point
    double tol_dual = 1e-7;          ///< dual residual relative to the load
    int max_iters = 50000;
    double over_relaxation = 1.6;    ///< alpha in [1, 1.9]
    bool adaptive_rho = true;
    int max_rho_updates = 10;
    int rho_update_interval = 25;
    double residual_balance = 300.0; ///< target dual / primal ratio for the adaptive penalty
    bool area_weighted = true;       ///< scale each point's penalty by its quadrature weight
    bool record_history = false;

    void validate() const {
        require(m > 0.0, "m must be positive");
        require(std::isfinite(m), "m must be finite");
        require(tol_primal >= 0.0 && tol_dual >= 0.0, "tolerances must be nonnegative");
        require(max_iters >= 1, "max_iters must be >= 1");
        require(over_relaxation >= 1.0 && over_relaxation <= 1.9, "over_relaxation must lie in [1, 1.9]");
        require(max_rho_updates >= 0 && rho_update_interval >= 1, "invalid adaptive penalty schedule");
        require(residual_balance > 0.0, "residual_balance must be positive");
    }
};

/// Pinned dofs (u = 0). Nonempty, distinct, in range.
class SourceSet {
public:
    SourceSet() = default;
    SourceSet(std::vector<int> dofs, int num_dofs) : dofs_(std::move(dofs)) {
        require(!dofs_.empty(), "source set must not be empty");
        std::vector<int> sorted = dofs_;
        std::sort(sorted.begin(), sorted.end());
        require(std::adjacent_find(sorted.begin(), sorted.end()) == sorted.end(), "source set contains duplicates");
        require(sorted.front() >= 0 && sorted.back() < num_dofs, "source index out of range");
    }

    const std::vector<int>& indices() const { return dofs_; }
    int size() const { return static_cast<int>(dofs_.size()); }
    bool contains(int dof) const { return std::find(dofs_.begin(), dofs_.end(), dof) != dofs_.end(); }

private:
    std::vector<int> dofs_;
};

struct IterationRecord {
    int iter;
    double objective;          ///< best feasible objective so far
    double iterate_objective;  ///< objective of the current iterate after the feasibility rescale
    double primal;
    double dual;
    double rho;
};

struct SolutionField {
    Vector coeffs;
    std::vector<Vec2> gradients;      ///< per constraint point, tangent frame
    std::vector<double> gradient_norms;
    double max_gradient_norm = 0.0;
    double raw_max_gradient_norm = 0.0;  ///< before the final feasibility rescale
    double objective = 0.0;
    int iterations = 0;
    double primal_residual = 0.0;
    double dual_residual = 0.0;
    bool converged = false;
    double final_rho = 0.0;
    int rho_updates = 0;
    SolveParams params;
    SourceSet sources;
    std::vector<IterationRecord> history;
};

struct NormalizedSolution {
    Vector coeffs;
    double scale = 1.0;
    std::vector<Vec2> gradients;
    std::vector<double> gradient_norms;
};

/// Euclidean projection onto the closed unit disc.
inline Vec2 project_ball(const Vec2& v) {
    const double n = v.norm();
    return n <= 1.0 ? v : Vec2(v / n);
}

/// c^T K c - m l^T c.
inline double objective(const QuadraticForm& form, double m, const Vector& coeffs) {
    if (coeffs.size() != form.load.size()) {
        throw Error(ErrorKind::Dimension, "coefficient vector has length " + std::to_string(coeffs.size()) +
                                              ", form has " + std::to_string(form.load.size()));
    }
    return coeffs.dot(form.stiffness * coeffs) - m * form.load.dot(coeffs);
}

namespace detail {

/// Column selection matrix for the free (non-source) dofs: full = S * free.
inline SparseMatrix free_selector(int n, const std::vector<int>& free_dofs) {
    std::vector<Eigen::Triplet<double>> trip;
    trip.reserve(free_dofs.size());
    for (std::size_t k = 0; k < free_dofs.size(); ++k) trip.emplace_back(free_dofs[k], static_cast<int>(k), 1.0);
    SparseMatrix s(n, static_cast<int>(free_dofs.size()));
    s.setFromTriplets(trip.begin(), trip.end());
    return s;
}

inline void fill_gradients(const FunctionSpace& space, const Vector& c, std::vector<Vec2>& grads,
                           std::vector<double>& norms, double& max_norm) {
    grads = gradient_at_constraints(space, c);
    norms.resize(grads.size());
    max_norm = 0.0;
    for (std::size_t p = 0; p < grads.size(); ++p) {
        norms[p] = grads[p].norm();
        max_norm = std::max(max_norm, norms[p]);
    }
}

}  // namespace detail

/// Minimizes c^T K c - m l^T c subject to |grad c| <= 1 at every constraint
/// point and c = 0 on the sources.
///
/// Splitting: one auxiliary 2-vector z_p per constraint point with the
/// coupling G c = z. Each sweep solves the fixed SPD system
/// (2K + rho G^T G) c = m l + rho G^T (z - y) on the free dofs, projects
/// alpha G c + (1 - alpha) z + y onto the unit disc pointwise, and updates
/// the scaled multiplier y. Source dofs are eliminated, so pinning is exact.
/// The returned field is divided by its max gradient norm when that exceeds
/// one, so it is always feasible; raw_max_gradient_norm keeps the unscaled value.
/// Without convergence the best feasible iterate seen is returned.
inline SolutionField solve(const QuadraticForm& form, const FunctionSpace& space, const SourceSet& sources,
                           const SolveParams& params) {
    params.validate();
    const int n = space.num_dofs();
    require(form.load.size() == n && form.stiffness.rows() == n, "form and space have different dimensions",
            ErrorKind::Dimension);
    require(!sources.indices().empty(), "source set must not be empty");
    for (int s : sources.indices()) require(s >= 0 && s < n, "source index out of range");

    std::vector<char> pinned(n, 0);
    for (int s : sources.indices()) pinned[s] = 1;
    std::vector<int> free_dofs;
    free_dofs.reserve(n);
    for (int i = 0; i < n; ++i)
        if (!pinned[i]) free_dofs.push_back(i);
    const int nf = static_cast<int>(free_dofs.size());
    const int np = space.num_constraint_points();

    SolutionField sol;
    sol.params = params;
    sol.sources = sources;

    const SparseMatrix select = detail::free_selector(n, free_dofs);
    const SparseMatrix g_full = gradient_operator(space);
    const SparseMatrix g_free = g_full * select;
    const SparseMatrix g_free_t = g_free.transpose();
    const SparseMatrix k_free = select.transpose() * form.stiffness * select;
    // Per-point penalty weights omega_p, normalized to mean one.
    Vector omega = Vector::Ones(2 * np);
    if (params.area_weighted && np > 0) {
        const int g = space.points_per_triangle();
        const double mean = form.area / np;
        for (int p = 0; p < np; ++p) {
            const double w = space.triangle_area(p / g) * space.constraint_rule().weights[p % g] / mean;
            omega[2 * p] = omega[2 * p + 1] = w;
        }
    }
    const SparseMatrix gtg = g_free_t * omega.asDiagonal() * g_free;
    const Vector load_free = params.m * (select.transpose() * form.load);

    double rho = params.rho > 0.0 ? params.rho : 2.0 * form.area / n;

    Vector c = Vector::Zero(nf);
    Vector gc = Vector::Zero(2 * np);
    Vector z = Vector::Zero(2 * np);
    Vector y = Vector::Zero(2 * np);

    if (nf > 0) {
        Eigen::SimplicialLDLT<SparseMatrix> ldlt;
        SparseMatrix system = 2.0 * k_free + rho * gtg;
        ldlt.compute(system);
        if (ldlt.info() != Eigen::Success) {
            throw Error(ErrorKind::Validation, "reduced system could not be factorized");
        }
        bool refine = false;
        bool refine_checked = false;
        auto linear_solve = [&](const Vector& rhs) {
            Vector x = ldlt.solve(rhs);
            if (!refine_checked) {
                refine_checked = true;
                const double rel = (system * x - rhs).norm() / std::max(rhs.norm(), 1e-300);
                refine = rel > 1e-10;
            }
            if (refine) {
                for (int k = 0; k < 3; ++k) x += ldlt.solve(rhs - system * x);
            }
            return x;
        };

        const double sqrt_np = std::sqrt(static_cast<double>(std::max(np, 1)));
        const double load_norm = std::max(load_free.norm(), 1e-300);
        const double alpha = params.over_relaxation;
        Vector z_old(2 * np);
        Vector best = c;
        double best_obj = 0.0;
        int it = 0;
        for (it = 1; it <= params.max_iters; ++it) {
            c = linear_solve(load_free + rho * (g_free_t * omega.cwiseProduct(z - y)));
            gc = g_free * c;
            const Vector relaxed = alpha * gc + (1.0 - alpha) * z;
            z_old = z;
            z = relaxed + y;
            for (int p = 0; p < np; ++p) z.segment<2>(2 * p) = project_ball(z.segment<2>(2 * p));
            y += relaxed - z;

            const double primal = (gc - z).norm() / sqrt_np;
            const double dual = rho * (g_free_t * omega.cwiseProduct(z - z_old)).norm() /
                                std::max(load_norm, rho * (g_free_t * omega.cwiseProduct(y)).norm());
            sol.primal_residual = primal;
            sol.dual_residual = dual;

            // Feasible rescaling c / max(1, max |grad c|) and the incumbent.
            double max_sq = 1.0;
            for (int p = 0; p < np; ++p) max_sq = std::max(max_sq, gc.segment<2>(2 * p).squaredNorm());
            const double scale = 1.0 / std::sqrt(max_sq);
            const double obj = scale * scale * c.dot(k_free * c) - scale * load_free.dot(c);
            if (obj < best_obj) {
                best_obj = obj;
                best = scale * c;
            }
            if (params.record_history) sol.history.push_back({it, best_obj, obj, primal, dual, rho});
            if (primal <= params.tol_primal && dual <= params.tol_dual) {
                sol.converged = true;
                break;
            }
            if (params.adaptive_rho && sol.rho_updates < params.max_rho_updates && it % params.rho_update_interval == 0) {
                double factor = 1.0;
                const double target = params.residual_balance * primal;
                if (dual * 10.0 < target) factor = 2.0;
                if (dual > 10.0 * target) factor = 0.5;
                if (factor != 1.0) {
                    rho *= factor;
                    y /= factor;
                    system = 2.0 * k_free + rho * gtg;
                    ldlt.factorize(system);
                    if (ldlt.info() != Eigen::Success) {
                        throw Error(ErrorKind::Validation, "reduced system could not be refactorized");
                    }
                    refine_checked = false;
                    ++sol.rho_updates;
                }
            }
        }
        sol.iterations = std::min(it, params.max_iters);
        if (!sol.converged) c = best;
    } else {
        sol.converged = true;
    }
    sol.final_rho = rho;

    sol.coeffs = select * c;
    detail::fill_gradients(space, sol.coeffs, sol.gradients, sol.gradient_norms, sol.max_gradient_norm);
    sol.raw_max_gradient_norm = sol.max_gradient_norm;
    if (sol.max_gradient_norm > 1.0) {
        const double s = 1.0 / sol.max_gradient_norm;
        sol.coeffs *= s;
        detail::fill_gradients(space, sol.coeffs, sol.gradients, sol.gradient_norms, sol.max_gradient_norm);
    }
    sol.objective = objective(form, params.m, sol.coeffs);
    return sol;
}

/// Divides the field by its max constraint-point gradient norm (exact
/// division, so an already feasible field is scaled up).
inline NormalizedSolution normalize_lipschitz(const Vector& coeffs, const FunctionSpace& space) {
    NormalizedSolution out;
    double max_norm = 0.0;
    std::vector<Vec2> grads;
    std::vector<double> norms;
    detail::fill_gradients(space, coeffs, grads, norms, max_norm);
    if (!(max_norm > 0.0)) throw Error(ErrorKind::Validation, "cannot normalize a field with zero gradient");
    out.scale = 1.0 / max_norm;
    out.coeffs = coeffs * out.scale;
    detail::fill_gradients(space, out.coeffs, out.gradients, out.gradient_norms, max_norm);
    return out;
}

inline NormalizedSolution normalize_lipschitz(const SolutionField& sol, const FunctionSpace& space) {
    return normalize_lipschitz(sol.coeffs, space);
}

// ---------------------------------------------------------------------------
// Persistence

inline void write_iteration_log(std::ostream& os, const std::vector<IterationRecord>& history) {
    os.precision(17);
    os << "iter,objective,iterate_objective,primal_residual,dual_residual,rho\n";
    for (const auto& r : history)
        os << r.iter << ',' << r.objective << ',' << r.iterate_objective << ',' << r.primal << ',' << r.dual << ',' << r.rho << '\n';
}

constexpr const char* kSolutionMagic = "cutlocus-solution";
constexpr int kSolutionVersion = 1;

/// Versioned ASCII container: header lines `key value`, then `coeffs N` and N values.
inline void write_solution(std::ostream& os, const SolutionField& sol, int order, int g = 6) {
    os.precision(17);
    os << kSolutionMagic << ' ' << kSolutionVersion << '\n'
       << "order " << order << '\n'
       << "g " << g << '\n'
       << "m " << sol.params.m << '\n'
       << "rho " << sol.final_rho << '\n'
       << "objective " << sol.objective << '\n'
       << "iterations " << sol.iterations << '\n'
       << "primal_residual " << sol.primal_residual << '\n'
       << "dual_residual " << sol.dual_residual << '\n'
       << "converged " << (sol.converged ? 1 : 0) << '\n'
       << "max_gradient_norm " << sol.max_gradient_norm << '\n'
       << "sources " << sol.sources.size();
    for (int s : sol.sources.indices()) os << ' ' << s;
    os << "\ncoeffs " << sol.coeffs.size() << '\n';
    for (Eigen::Index i = 0; i < sol.coeffs.size(); ++i) os << sol.coeffs[i] << '\n';
}

struct StoredSolution {
    int order = 1;
    int g = 6;
    double m = 0.0;
    double objective = 0.0;
    bool converged = false;
    std::vector<int> sources;
    Vector coeffs;
};

inline StoredSolution read_solution(std::istream& in) {
    std::string magic;
    int version = 0;
    in >> magic >> version;
    if (magic != kSolutionMagic) throw Error(ErrorKind::Parse, "not a solution file");
    if (version != kSolutionVersion) throw Error(ErrorKind::Parse, "unsupported solution version " + std::to_string(version));
    StoredSolution s;
    std::string key;
    while (in >> key) {
        if (key == "order") {
            in >> s.order;
        } else if (key == "g") {
            in >> s.g;
        } else if (key == "m") {
            in >> s.m;
        } else if (key == "objective") {
            in >> s.objective;
        } else if (key == "converged") {
            int v;
            in >> v;
            s.converged = v != 0;
        } else if (key == "sources") {
            int k;
            in >> k;
            s.sources.resize(k);
            for (auto& v : s.sources) in >> v;
        } else if (key == "coeffs") {
            long n;
            in >> n;
            s.coeffs.resize(n);
            for (long i = 0; i < n; ++i) in >> s.coeffs[i];
            break;
        } else {
            std::string ignored;
            in >> ignored;
        }
    }
    if (!in) throw Error(ErrorKind::Parse, "truncated solution file");
    return s;
}

}  // namespace cutlocus
