#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "srl/core.hpp"
#include "srl/errors.hpp"
#include "srl/lp.hpp"

namespace srl {

inline constexpr double kDefaultRecTol = 1e-6;

struct RecoveryResult {
    Vector xhat;
    double objective = std::numeric_limits<double>::quiet_NaN();
    LpStatus status = LpStatus::Infeasible;
    bool has_reference = false;
    bool recovered = false;  // linf_error <= rec_tol, only with a reference
    double l2_error = std::numeric_limits<double>::quiet_NaN();
    double linf_error = std::numeric_limits<double>::quiet_NaN();
    std::size_t iterations = 0;
};

struct RecoveryOptions {
    SimplexOptions lp;
    double rec_tol = kDefaultRecTol;
};

namespace detail {

inline void fill_errors(RecoveryResult& r, const std::optional<Vector>& x0_ref, double rec_tol) {
    if (!x0_ref || r.xhat.empty()) return;
    if (x0_ref->size() != r.xhat.size()) throw std::invalid_argument("reference signal has wrong length");
    const Vector diff = subtract(r.xhat, *x0_ref);
    r.has_reference = true;
    r.l2_error = norm(diff, NormKind::L2);
    r.linf_error = norm(diff, NormKind::Linf);
    r.recovered = r.linf_error <= rec_tol;
}

}  // namespace detail

/// min ||t||_1 s.t. Gamma t = y, solved as an LP over t = t+ - t-.
/// An infeasible system is reported through status, not thrown.
inline RecoveryResult basis_pursuit(const DenseMatrix& gamma, std::span<const double> y,
                                    const std::optional<Vector>& x0_ref = std::nullopt,
                                    const RecoveryOptions& opt = {}) {
    if (gamma.rows() != y.size()) throw std::invalid_argument("basis_pursuit: rows(Gamma) != len(y)");
    const std::size_t m = gamma.rows();
    const std::size_t n = gamma.cols();
    LpProblem lp;
    lp.c.assign(2 * n, 1.0);
    lp.a = DenseMatrix(m, 2 * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            lp.a(i, j) = gamma(i, j);
            lp.a(i, n + j) = -gamma(i, j);
        }
    lp.b.assign(y.begin(), y.end());
    const LpSolution s = simplex_solve(lp, opt.lp);
    RecoveryResult r;
    r.status = s.status;
    r.iterations = s.iterations;
    if (s.status != LpStatus::Optimal) return r;
    r.xhat.resize(n);
    for (std::size_t j = 0; j < n; ++j) r.xhat[j] = s.x[j] - s.x[n + j];
    r.objective = norm(r.xhat, NormKind::L1);
    detail::fill_errors(r, x0_ref, opt.rec_tol);
    return r;
}

struct CompetitorResult {
    double norm = std::numeric_limits<double>::infinity();  // +inf when infeasible
    std::optional<Vector> witness;                          // full length n, zero on J
};

/// min ||w||_1 s.t. Gamma w = Gamma v, w vanishing on J, with v normalised to
/// unit l1 norm. A value <= 1 exhibits a competitor at least as good as v for
/// Basis Pursuit, so exact reconstruction of order |J| fails.
inline CompetitorResult competitor_norm(const DenseMatrix& gamma, std::span<const double> v, const IndexSet& J,
                                        const SimplexOptions& opt = {}) {
    const std::size_t n = gamma.cols();
    if (v.size() != n) throw std::invalid_argument("competitor_norm: len(v) != cols(Gamma)");
    std::vector<bool> in_j(n, false);
    for (std::size_t j : J) {
        if (j >= n) throw std::invalid_argument("competitor_norm: index outside 0..n-1");
        in_j[j] = true;
    }
    const double l1 = norm(v, NormKind::L1);
    if (!(l1 > 0.0)) throw std::invalid_argument("competitor_norm: v must be nonzero");
    Vector vn(v.begin(), v.end());
    for (std::size_t j = 0; j < n; ++j) {
        if (!in_j[j] && std::abs(vn[j]) > 0.0)
            throw std::invalid_argument("competitor_norm: v must be supported in J");
        vn[j] /= l1;
    }
    IndexSet rest;
    for (std::size_t j = 0; j < n; ++j)
        if (!in_j[j]) rest.push_back(j);
    CompetitorResult out;
    if (rest.empty()) return out;
    const Vector target = gamma.apply(vn);
    const auto w = min_l1_solution(gamma.select_columns(rest), target, opt);
    if (!w) return out;
    out.norm = norm(*w, NormKind::L1);
    Vector full(n, 0.0);
    for (std::size_t k = 0; k < rest.size(); ++k) full[rest[k]] = (*w)[k];
    out.witness = std::move(full);
    return out;
}

inline Vector basis_vector(std::size_t n, std::size_t k, double value = 1.0) {
    Vector e(n, 0.0);
    e[k] = value;
    return e;
}

struct L0Result {
    std::vector<Vector> solutions;
    std::size_t sparsity = 0;
    bool unique = false;
};

/// Sparsest t with Gamma t = y by enumerating supports of increasing size. A
/// support S is feasible when the least-squares residual of Gamma_S against
/// y is at most feas_tol * (1 + ||y||_2). All feasible supports of the first
/// feasible cardinality are returned.
inline L0Result l0_min(const DenseMatrix& gamma, std::span<const double> y, std::size_t max_support,
                       double feas_tol = 1e-9) {
    if (gamma.rows() != y.size()) throw std::invalid_argument("l0_min: rows(Gamma) != len(y)");
    const std::size_t n = gamma.cols();
    if (max_support > std::min<std::size_t>(gamma.rows(), 12) || max_support > n)
        throw std::invalid_argument("l0_min: max_support must not exceed min(rows, cols, 12)");
    const double ynorm = norm(y, NormKind::L2);
    const double tol = feas_tol * (1.0 + ynorm);
    L0Result out;
    if (ynorm <= tol) {
        out.solutions.push_back(Vector(n, 0.0));
        out.sparsity = 0;
        out.unique = true;
        return out;
    }
    for (std::size_t k = 1; k <= max_support; ++k) {
        IndexSet s = first_combination(k);
        do {
            const auto ls = least_squares_residual(gamma.select_columns(s), y);
            if (ls.residual_l2 <= tol && ls.rank == k) {
                Vector x(n, 0.0);
                for (std::size_t q = 0; q < k; ++q) x[s[q]] = ls.x[q];
                out.solutions.push_back(std::move(x));
            }
        } while (next_combination(s, n));
        if (!out.solutions.empty()) {
            out.sparsity = k;
            out.unique = out.solutions.size() == 1;
            return out;
        }
    }
    throw GuardError("l0_min: no solution with support size <= " + std::to_string(max_support));
}

struct LassoOptions {
    std::size_t max_iter = 200000;
    double kkt_tol = 1e-8;
    double rec_tol = kDefaultRecTol;
    /// Called with the objective after every iteration when set.
    std::function<void(std::size_t, double)> on_iteration;
};

/// (1/N) ||z - X x||_2^2 + lambda ||x||_1
inline double lasso_objective(const DenseMatrix& x_rows, std::span<const double> z, std::span<const double> x,
                              double lambda) {
    const Vector r = subtract(z, x_rows.apply(x));
    const double n_rows = static_cast<double>(x_rows.rows());
    return dot(r, r) / n_rows + lambda * norm(x, NormKind::L1);
}

namespace detail {

// Gradient of the quadratic part: (2/N) X^T (X x - z).
inline Vector lasso_gradient(const DenseMatrix& x_rows, std::span<const double> z, std::span<const double> x) {
    Vector g = x_rows.apply_transpose(subtract(x_rows.apply(x), z));
    const double f = 2.0 / static_cast<double>(x_rows.rows());
    for (double& v : g) v *= f;
    return g;
}

inline double kkt_violation(std::span<const double> grad, std::span<const double> x, double lambda) {
    double worst = 0.0;
    for (std::size_t j = 0; j < x.size(); ++j) {
        const double v = x[j] != 0.0 ? std::abs(grad[j] + lambda * (x[j] > 0.0 ? 1.0 : -1.0))
                                     : std::max(0.0, std::abs(grad[j]) - lambda);
        worst = std::max(worst, v);
    }
    return worst;
}

}  // namespace detail

/// Largest violation of the l1 subgradient optimality conditions at x.
inline double lasso_kkt_violation(const DenseMatrix& x_rows, std::span<const double> z, std::span<const double> x,
                                  double lambda) {
    return detail::kkt_violation(detail::lasso_gradient(x_rows, z, x), x, lambda);
}

inline double soft_threshold(double v, double t) noexcept {
    if (v > t) return v - t;
    if (v < -t) return v + t;
    return 0.0;
}

/// LASSO by proximal gradient (ISTA) with fixed step 1/L, L = 2 sigma_max(X)^2 / N,
/// started from 0. Stops when the subgradient conditions hold within kkt_tol;
/// throws ConvergenceError after max_iter iterations otherwise.
inline RecoveryResult lasso(const DenseMatrix& x_rows, std::span<const double> z, double lambda,
                            const std::optional<Vector>& x0_ref = std::nullopt, const LassoOptions& opt = {}) {
    if (!(lambda >= 0.0)) throw std::invalid_argument("lasso: lambda must be >= 0");
    if (x_rows.rows() != z.size()) throw std::invalid_argument("lasso: rows(X) != len(z)");
    const std::size_t n = x_rows.cols();
    const double n_rows = static_cast<double>(x_rows.rows());
    const double smax = singular_extremes(x_rows).sigma_max;
    RecoveryResult r;
    r.status = LpStatus::Optimal;
    Vector x(n, 0.0);
    if (smax == 0.0) {
        r.xhat = x;
        r.objective = lasso_objective(x_rows, z, x, lambda);
        detail::fill_errors(r, x0_ref, opt.rec_tol);
        return r;
    }
    const double lip = 2.0 * smax * smax / n_rows;
    const double step = 1.0 / lip;
    std::size_t it = 0;
    for (; it < opt.max_iter; ++it) {
        const Vector grad = detail::lasso_gradient(x_rows, z, x);
        if (detail::kkt_violation(grad, x, lambda) <= opt.kkt_tol) break;
        for (std::size_t j = 0; j < n; ++j) x[j] = soft_threshold(x[j] - step * grad[j], step * lambda);
        if (opt.on_iteration) opt.on_iteration(it, lasso_objective(x_rows, z, x, lambda));
    }
    if (it == opt.max_iter)
        throw ConvergenceError("lasso: KKT tolerance " + std::to_string(opt.kkt_tol) + " not reached in " +
                               std::to_string(opt.max_iter) + " iterations");
    r.xhat = std::move(x);
    r.iterations = it;
    r.objective = lasso_objective(x_rows, z, r.xhat, lambda);
    detail::fill_errors(r, x0_ref, opt.rec_tol);
    return r;
}

}  // namespace srl
