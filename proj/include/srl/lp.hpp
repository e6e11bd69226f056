#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "srl/core.hpp"
#include "srl/errors.hpp"

namespace srl {

/// min c^T x  s.t.  A x = b,  lower <= x <= upper.
/// Empty lower means all zeros; empty upper means no upper bounds. Entries of
/// upper may be +inf.
struct LpProblem {
    Vector c;
    DenseMatrix a;
    Vector b;
    Vector lower;
    Vector upper;
};

enum class LpStatus { Optimal, Infeasible, Unbounded };

inline const char* to_string(LpStatus s) noexcept {
    switch (s) {
        case LpStatus::Optimal: return "Optimal";
        case LpStatus::Infeasible: return "Infeasible";
        case LpStatus::Unbounded: return "Unbounded";
    }
    return "?";
}

struct LpSolution {
    LpStatus status = LpStatus::Infeasible;
    Vector x;  // filled when Optimal
    double objective_value = std::numeric_limits<double>::quiet_NaN();
    std::size_t iterations = 0;
};

struct SimplexOptions {
    double feas_tol = 1e-9;
    double opt_tol = 1e-9;
};

namespace detail {

// Dense tableau for  min c^T x, A x = b (b >= 0), x >= 0, with one artificial
// per row appended. Row `m` holds reduced costs; column `width-1` holds the
// right-hand side.
class Tableau {
public:
    Tableau(const DenseMatrix& a, const Vector& b, std::size_t iteration_cap)
        : m_(a.rows()), nx_(a.cols()), width_(a.cols() + a.rows() + 1),
          t_((a.rows() + 1) * width_, 0.0), basis_(a.rows()), cap_(iteration_cap) {
        for (std::size_t i = 0; i < m_; ++i) {
            const double sgn = b[i] < 0.0 ? -1.0 : 1.0;
            for (std::size_t j = 0; j < nx_; ++j) at(i, j) = sgn * a(i, j);
            at(i, nx_ + i) = 1.0;
            at(i, rhs()) = sgn * b[i];
            basis_[i] = nx_ + i;
        }
        active_.assign(m_, true);
    }

    std::size_t iterations() const noexcept { return iterations_; }

    // Phase 1: minimise the sum of artificials. Returns the optimal value.
    double phase_one(double opt_tol) {
        std::fill(cost_row(), cost_row() + width_, 0.0);
        // reduced cost of x_j = -sum_i a_ij; artificials 0; objective -sum b_i
        for (std::size_t i = 0; i < m_; ++i)
            for (std::size_t j = 0; j < width_; ++j)
                if (j < nx_ || j == rhs()) at(m_, j) -= at(i, j);
        allow_artificial_entry_ = false;
        iterate(opt_tol);  // bounded below by 0
        return -at(m_, rhs());
    }

    // Pivots remaining artificials out of the basis; rows with no usable
    // pivot are redundant and deactivated.
    void drive_out_artificials(double pivot_tol) {
        for (std::size_t i = 0; i < m_; ++i) {
            if (!active_[i] || basis_[i] < nx_) continue;
            std::size_t best = nx_;
            double best_abs = pivot_tol;
            for (std::size_t j = 0; j < nx_; ++j) {
                if (std::abs(at(i, j)) > best_abs) {
                    best_abs = std::abs(at(i, j));
                    best = j;
                }
            }
            if (best < nx_) {
                pivot(i, best);
            } else {
                active_[i] = false;
            }
        }
    }

    // Phase 2 with the true costs. Returns false when unbounded.
    bool phase_two(const Vector& c, double opt_tol) {
        for (std::size_t j = 0; j < width_; ++j) at(m_, j) = 0.0;
        for (std::size_t j = 0; j < nx_; ++j) at(m_, j) = c[j];
        for (std::size_t i = 0; i < m_; ++i) {
            if (!active_[i]) continue;
            const std::size_t bj = basis_[i];
            const double cb = bj < nx_ ? c[bj] : 0.0;
            if (cb == 0.0) continue;
            for (std::size_t j = 0; j < width_; ++j) at(m_, j) -= cb * at(i, j);
        }
        allow_artificial_entry_ = false;
        return iterate(opt_tol);
    }

    const std::vector<std::size_t>& basis() const noexcept { return basis_; }
    const std::vector<bool>& active() const noexcept { return active_; }
    double basic_value(std::size_t i) const noexcept { return at(i, rhs()); }

private:
    double& at(std::size_t i, std::size_t j) noexcept { return t_[i * width_ + j]; }
    double at(std::size_t i, std::size_t j) const noexcept { return t_[i * width_ + j]; }
    double* cost_row() noexcept { return t_.data() + m_ * width_; }
    std::size_t rhs() const noexcept { return width_ - 1; }

    // Bland's rule: lowest-index improving column enters; among rows tied on
    // the minimum ratio, the one whose basic variable has the lowest index
    // leaves.
    bool iterate(double opt_tol) {
        constexpr double pivot_tol = 1e-11;
        while (true) {
            std::size_t enter = width_;
            const std::size_t limit = allow_artificial_entry_ ? nx_ + m_ : nx_;
            for (std::size_t j = 0; j < limit; ++j) {
                if (at(m_, j) < -opt_tol) {
                    enter = j;
                    break;
                }
            }
            if (enter == width_) return true;
            std::size_t leave = m_;
            double best_ratio = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < m_; ++i) {
                if (!active_[i]) continue;
                const double aij = at(i, enter);
                if (aij <= pivot_tol) continue;
                const double ratio = std::max(at(i, rhs()), 0.0) / aij;
                if (leave == m_) {
                    leave = i;
                    best_ratio = ratio;
                    continue;
                }
                const double tie = 1e-12 * std::max(1.0, best_ratio);
                if (ratio < best_ratio - tie) {
                    leave = i;
                    best_ratio = ratio;
                } else if (ratio <= best_ratio + tie && basis_[i] < basis_[leave]) {
                    leave = i;
                }
            }
            if (leave == m_) return false;
            if (++iterations_ > cap_)
                throw IterationLimitError("simplex_solve: iteration cap of " + std::to_string(cap_) +
                                          " pivots exceeded");
            pivot(leave, enter);
        }
    }

    void pivot(std::size_t pr, std::size_t pc) {
        double* prow = t_.data() + pr * width_;
        const double inv = 1.0 / prow[pc];
        for (std::size_t j = 0; j < width_; ++j) prow[j] *= inv;
        prow[pc] = 1.0;
        for (std::size_t i = 0; i <= m_; ++i) {
            if (i == pr) continue;
            double* row = t_.data() + i * width_;
            const double f = row[pc];
            if (f == 0.0) continue;
            for (std::size_t j = 0; j < width_; ++j) row[j] -= f * prow[j];
            row[pc] = 0.0;
        }
        basis_[pr] = pc;
    }

    std::size_t m_;
    std::size_t nx_;
    std::size_t width_;
    std::vector<double> t_;
    std::vector<std::size_t> basis_;
    std::vector<bool> active_;
    std::size_t cap_;
    std::size_t iterations_ = 0;
    bool allow_artificial_entry_ = false;
};

}  // namespace detail

/// Two-phase primal simplex on a dense tableau with Bland's anti-cycling
/// rule.
///
/// Bounds are handled by shifting x = lower + x' and, for finite upper
/// bounds, appending rows x'_j + s_j = upper_j - lower_j. At the optimum the
/// basic variables are recomputed from the original columns to remove
/// accumulated pivoting error.
///
/// Throws std::invalid_argument on inconsistent dimensions or bounds, and
/// IterationLimitError once 50 * (rows + cols) pivots have been spent.
inline LpSolution simplex_solve(const LpProblem& p, const SimplexOptions& opt = {}) {
    const std::size_t m0 = p.a.rows();
    const std::size_t n0 = p.a.cols();
    if (p.c.size() != n0 || p.b.size() != m0)
        throw std::invalid_argument("simplex_solve: dimension mismatch between c, A and b");
    if (!p.lower.empty() && p.lower.size() != n0)
        throw std::invalid_argument("simplex_solve: lower bound size mismatch");
    if (!p.upper.empty() && p.upper.size() != n0)
        throw std::invalid_argument("simplex_solve: upper bound size mismatch");
    if (!(opt.feas_tol > 0.0) || !(opt.opt_tol > 0.0))
        throw std::invalid_argument("simplex_solve: tolerances must be positive");
    if (!all_finite(p.c) || !all_finite(p.b) || !p.a.is_finite())
        throw GuardError("simplex_solve: non-finite problem data");

    Vector lower = p.lower.empty() ? Vector(n0, 0.0) : p.lower;
    for (double l : lower)
        if (!std::isfinite(l)) throw std::invalid_argument("simplex_solve: lower bounds must be finite");
    std::vector<std::size_t> bounded;
    for (std::size_t j = 0; j < n0 && !p.upper.empty(); ++j) {
        if (p.upper[j] < lower[j]) throw std::invalid_argument("simplex_solve: lower > upper");
        if (std::isfinite(p.upper[j])) bounded.push_back(j);
    }

    const std::size_t m = m0 + bounded.size();
    const std::size_t n = n0 + bounded.size();
    DenseMatrix a(m, n);
    Vector b(m), c(n, 0.0);
    for (std::size_t i = 0; i < m0; ++i) {
        double shift = 0.0;
        for (std::size_t j = 0; j < n0; ++j) {
            a(i, j) = p.a(i, j);
            shift += p.a(i, j) * lower[j];
        }
        b[i] = p.b[i] - shift;
    }
    for (std::size_t k = 0; k < bounded.size(); ++k) {
        const std::size_t j = bounded[k];
        a(m0 + k, j) = 1.0;
        a(m0 + k, n0 + k) = 1.0;
        b[m0 + k] = p.upper[j] - lower[j];
    }
    for (std::size_t j = 0; j < n0; ++j) c[j] = p.c[j];

    LpSolution sol;
    if (m == 0) {
        // No constraints: optimal at the lower bounds unless some cost is
        // negative on an unbounded variable.
        for (std::size_t j = 0; j < n0; ++j)
            if (c[j] < -opt.opt_tol) {
                sol.status = LpStatus::Unbounded;
                return sol;
            }
        sol.status = LpStatus::Optimal;
        sol.x = lower;
        sol.objective_value = dot(p.c, sol.x);
        return sol;
    }

    const std::size_t cap = 50 * (m + n);
    detail::Tableau tab(a, b, cap);
    const double infeas = tab.phase_one(opt.opt_tol);
    if (infeas > opt.feas_tol) {
        sol.status = LpStatus::Infeasible;
        sol.iterations = tab.iterations();
        return sol;
    }
    tab.drive_out_artificials(1e-9);
    const bool ok = tab.phase_two(c, opt.opt_tol);
    sol.iterations = tab.iterations();
    if (!ok) {
        sol.status = LpStatus::Unbounded;
        return sol;
    }

    // Recompute basic values from the original data.
    std::vector<std::size_t> rows, cols;
    for (std::size_t i = 0; i < m; ++i) {
        if (!tab.active()[i]) continue;
        rows.push_back(i);
        cols.push_back(tab.basis()[i]);
    }
    Vector xs(n, 0.0);
    bool refined = false;
    if (std::all_of(cols.begin(), cols.end(), [&](std::size_t j) { return j < n; })) {
        DenseMatrix bmat(rows.size(), rows.size());
        Vector rhs(rows.size());
        for (std::size_t r = 0; r < rows.size(); ++r) {
            rhs[r] = b[rows[r]];
            for (std::size_t k = 0; k < cols.size(); ++k) bmat(r, k) = a(rows[r], cols[k]);
        }
        if (solve_square(bmat, rhs) && all_finite(rhs)) {
            for (std::size_t k = 0; k < cols.size(); ++k) xs[cols[k]] = rhs[k];
            refined = true;
        }
    }
    if (!refined) {
        for (std::size_t r = 0; r < rows.size(); ++r)
            if (cols[r] < n) xs[cols[r]] = tab.basic_value(rows[r]);
    }
    for (double& v : xs)
        if (v < 0.0 && v > -opt.feas_tol) v = 0.0;

    sol.status = LpStatus::Optimal;
    sol.x.resize(n0);
    for (std::size_t j = 0; j < n0; ++j) sol.x[j] = lower[j] + xs[j];
    sol.objective_value = dot(p.c, sol.x);
    return sol;
}

/// ||A x - b||_inf
inline double lp_residual(const LpProblem& p, std::span<const double> x) {
    return norm(subtract(p.a.apply(x), p.b), NormKind::Linf);
}

struct L1Feasibility {
    bool feasible = false;
    std::optional<Vector> witness;
    double min_l1 = std::numeric_limits<double>::infinity();
};

/// min ||w||_1 s.t. A w = b via the split w = w+ - w-. Returns the optimal
/// LP solution mapped back to w, or nullopt when A w = b has no solution.
inline std::optional<Vector> min_l1_solution(const DenseMatrix& a, std::span<const double> b,
                                             const SimplexOptions& opt = {}) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    if (b.size() != m) throw std::invalid_argument("min_l1_solution: rows(A) != len(b)");
    LpProblem lp;
    lp.c.assign(2 * n, 1.0);
    lp.a = DenseMatrix(m, 2 * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            lp.a(i, j) = a(i, j);
            lp.a(i, n + j) = -a(i, j);
        }
    lp.b.assign(b.begin(), b.end());
    const LpSolution s = simplex_solve(lp, opt);
    if (s.status != LpStatus::Optimal) return std::nullopt;
    Vector w(n);
    for (std::size_t j = 0; j < n; ++j) w[j] = s.x[j] - s.x[n + j];
    return w;
}

/// Decides whether some w with A w = b has ||w||_1 <= l1_budget.
inline L1Feasibility lp_feasible(const DenseMatrix& a, std::span<const double> b, double l1_budget,
                                 const SimplexOptions& opt = {}) {
    if (l1_budget < 0.0) throw std::invalid_argument("lp_feasible: negative l1 budget");
    L1Feasibility out;
    auto w = min_l1_solution(a, b, opt);
    if (!w) return out;
    out.min_l1 = norm(*w, NormKind::L1);
    out.feasible = out.min_l1 <= l1_budget + opt.feas_tol;
    if (out.feasible) out.witness = std::move(w);
    return out;
}

}  // namespace srl
