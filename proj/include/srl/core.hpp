#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <numeric>
#include <span>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "srl/errors.hpp"
#include "srl/rng.hpp"

namespace srl {

using Vector = std::vector<double>;
using IndexSet = std::vector<std::size_t>;

inline constexpr double kDefaultZeroTol = 1e-10;

/// Dense row-major matrix of doubles. rows() is the measurement count N,
/// cols() the ambient dimension n.
class DenseMatrix {
public:
    DenseMatrix() = default;

    DenseMatrix(std::size_t rows, std::size_t cols, double fill = 0.0)
        : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

    DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> row_major)
        : rows_(rows), cols_(cols), data_(std::move(row_major)) {
        if (data_.size() != rows_ * cols_)
            throw std::invalid_argument("DenseMatrix: storage size does not match rows*cols");
        if (!is_finite()) throw GuardError("DenseMatrix: non-finite entry");
    }

    static DenseMatrix identity(std::size_t n) {
        DenseMatrix m(n, n);
        for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
        return m;
    }

    /// Matrix whose columns are the given vectors (all of equal length).
    static DenseMatrix from_columns(std::span<const Vector> columns) {
        if (columns.empty()) return {};
        DenseMatrix m(columns.front().size(), columns.size());
        for (std::size_t j = 0; j < columns.size(); ++j) {
            if (columns[j].size() != m.rows_)
                throw std::invalid_argument("DenseMatrix::from_columns: ragged columns");
            for (std::size_t i = 0; i < m.rows_; ++i) m(i, j) = columns[j][i];
        }
        return m;
    }

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    bool empty() const noexcept { return data_.empty(); }

    double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
    double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

    std::span<double> row(std::size_t i) noexcept { return {data_.data() + i * cols_, cols_}; }
    std::span<const double> row(std::size_t i) const noexcept {
        return {data_.data() + i * cols_, cols_};
    }

    std::span<const double> data() const noexcept { return data_; }

    Vector column(std::size_t j) const {
        Vector c(rows_);
        for (std::size_t i = 0; i < rows_; ++i) c[i] = (*this)(i, j);
        return c;
    }

    double column_norm_sq(std::size_t j) const noexcept {
        double acc = 0.0;
        for (std::size_t i = 0; i < rows_; ++i) acc += (*this)(i, j) * (*this)(i, j);
        return acc;
    }

    DenseMatrix select_columns(std::span<const std::size_t> idx) const {
        DenseMatrix m(rows_, idx.size());
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t k = 0; k < idx.size(); ++k) m(i, k) = (*this)(i, idx[k]);
        return m;
    }

    DenseMatrix transpose() const {
        DenseMatrix t(cols_, rows_);
        for (std::size_t i = 0; i < rows_; ++i)
            for (std::size_t j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
        return t;
    }

    /// A x
    Vector apply(std::span<const double> x) const {
        if (x.size() != cols_) throw std::invalid_argument("DenseMatrix::apply: size mismatch");
        Vector y(rows_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            const double* r = data_.data() + i * cols_;
            double acc = 0.0;
            for (std::size_t j = 0; j < cols_; ++j) acc += r[j] * x[j];
            y[i] = acc;
        }
        return y;
    }

    /// A^T y
    Vector apply_transpose(std::span<const double> y) const {
        if (y.size() != rows_)
            throw std::invalid_argument("DenseMatrix::apply_transpose: size mismatch");
        Vector x(cols_, 0.0);
        for (std::size_t i = 0; i < rows_; ++i) {
            const double* r = data_.data() + i * cols_;
            const double yi = y[i];
            if (yi == 0.0) continue;
            for (std::size_t j = 0; j < cols_; ++j) x[j] += r[j] * yi;
        }
        return x;
    }

    DenseMatrix& operator*=(double a) noexcept {
        for (double& v : data_) v *= a;
        return *this;
    }

    bool is_finite() const noexcept {
        return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const DenseMatrix&, const DenseMatrix&) = default;

private:
    std::size_t rows_ = 0;
    std::size_t cols_ = 0;
    std::vector<double> data_;
};

enum class NormKind { L0, L1, L2, Linf };

inline double norm(std::span<const double> v, NormKind kind, double zero_tol = kDefaultZeroTol) {
    switch (kind) {
        case NormKind::L0:
            return static_cast<double>(
                std::count_if(v.begin(), v.end(), [&](double x) { return std::abs(x) > zero_tol; }));
        case NormKind::L1:
            return std::accumulate(v.begin(), v.end(), 0.0,
                                   [](double a, double x) { return a + std::abs(x); });
        case NormKind::L2: {
            double scale = 0.0;
            for (double x : v) scale = std::max(scale, std::abs(x));
            if (scale == 0.0) return 0.0;
            double acc = 0.0;
            for (double x : v) acc += (x / scale) * (x / scale);
            return scale * std::sqrt(acc);
        }
        case NormKind::Linf: {
            double m = 0.0;
            for (double x : v) m = std::max(m, std::abs(x));
            return m;
        }
    }
    return 0.0;
}

inline double dot(std::span<const double> a, std::span<const double> b) noexcept {
    double acc = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) acc += a[i] * b[i];
    return acc;
}

inline Vector subtract(std::span<const double> a, std::span<const double> b) {
    Vector r(a.size());
    for (std::size_t i = 0; i < a.size(); ++i) r[i] = a[i] - b[i];
    return r;
}

inline bool all_finite(std::span<const double> v) noexcept {
    return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

/// Indices i with |v_i| > zero_tol.
inline IndexSet support_of(std::span<const double> v, double zero_tol = kDefaultZeroTol) {
    IndexSet s;
    for (std::size_t i = 0; i < v.size(); ++i)
        if (std::abs(v[i]) > zero_tol) s.push_back(i);
    return s;
}

// ---------------------------------------------------------------------------
// Singular values
// ---------------------------------------------------------------------------

struct JacobiSvd {
    Vector singular_values;  // one per column of A, descending
    DenseMatrix v;           // n x n orthogonal; column k pairs with singular_values[k]
};

/// One-sided (Hestenes) Jacobi SVD. Orthogonalises the columns of A by plane
/// rotations; the final column norms are the singular values and the
/// accumulated rotations the right singular vectors. When cols > rows the
/// surplus singular values come out as (numerical) zeros.
inline JacobiSvd jacobi_svd(const DenseMatrix& a, bool want_v = true) {
    if (!a.is_finite()) throw GuardError("jacobi_svd: non-finite entry");
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    // Column-major working copy.
    std::vector<double> u(m * n);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) u[j * m + i] = a(i, j);
    std::vector<double> v;
    if (want_v) {
        v.assign(n * n, 0.0);
        for (std::size_t j = 0; j < n; ++j) v[j * n + j] = 1.0;
    }
    constexpr double eps = 1e-15;
    constexpr int max_sweeps = 80;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        bool rotated = false;
        for (std::size_t p = 0; p + 1 < n; ++p) {
            double* up = u.data() + p * m;
            for (std::size_t q = p + 1; q < n; ++q) {
                double* uq = u.data() + q * m;
                double alpha = 0.0, beta = 0.0, gamma = 0.0;
                for (std::size_t i = 0; i < m; ++i) {
                    alpha += up[i] * up[i];
                    beta += uq[i] * uq[i];
                    gamma += up[i] * uq[i];
                }
                if (gamma == 0.0 || std::abs(gamma) <= eps * std::sqrt(alpha * beta)) continue;
                rotated = true;
                const double zeta = (beta - alpha) / (2.0 * gamma);
                const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = c * t;
                for (std::size_t i = 0; i < m; ++i) {
                    const double x = up[i];
                    const double y = uq[i];
                    up[i] = c * x - s * y;
                    uq[i] = s * x + c * y;
                }
                if (want_v) {
                    double* vp = v.data() + p * n;
                    double* vq = v.data() + q * n;
                    for (std::size_t i = 0; i < n; ++i) {
                        const double x = vp[i];
                        const double y = vq[i];
                        vp[i] = c * x - s * y;
                        vq[i] = s * x + c * y;
                    }
                }
            }
        }
        if (!rotated) break;
    }
    Vector sv(n);
    for (std::size_t j = 0; j < n; ++j) {
        double acc = 0.0;
        for (std::size_t i = 0; i < m; ++i) acc += u[j * m + i] * u[j * m + i];
        sv[j] = std::sqrt(acc);
    }
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t x, std::size_t y) { return sv[x] > sv[y]; });
    JacobiSvd out;
    out.singular_values.resize(n);
    if (want_v) out.v = DenseMatrix(n, n);
    for (std::size_t k = 0; k < n; ++k) {
        out.singular_values[k] = sv[order[k]];
        if (want_v)
            for (std::size_t i = 0; i < n; ++i) out.v(i, k) = v[order[k] * n + i];
    }
    return out;
}

struct SingularExtremes {
    double sigma_min = 0.0;
    double sigma_max = 0.0;
};

/// sigma_min is inf over unit x of ||Ax||_2, so it is 0 whenever cols > rows.
inline SingularExtremes singular_extremes(const DenseMatrix& a) {
    if (a.empty()) throw std::invalid_argument("singular_extremes: empty matrix");
    if (a.cols() > a.rows()) {
        const auto svd = jacobi_svd(a.transpose(), false);
        return {0.0, svd.singular_values.front()};
    }
    const auto svd = jacobi_svd(a, false);
    return {svd.singular_values.back(), svd.singular_values.front()};
}

/// Orthonormal basis of ker(A). rank_tol <= 0 selects 1e-10 * sigma_max.
inline std::vector<Vector> nullspace_basis(const DenseMatrix& a, double rank_tol = -1.0) {
    const auto svd = jacobi_svd(a, true);
    const double smax = svd.singular_values.empty() ? 0.0 : svd.singular_values.front();
    const double tol = rank_tol > 0.0 ? rank_tol : 1e-10 * smax;
    std::vector<Vector> basis;
    for (std::size_t k = 0; k < a.cols(); ++k) {
        if (svd.singular_values[k] <= tol) basis.push_back(svd.v.column(k));
    }
    return basis;
}

// ---------------------------------------------------------------------------
// Least squares
// ---------------------------------------------------------------------------

struct LeastSquares {
    Vector x;
    double residual_l2 = 0.0;
    std::size_t rank = 0;
};

/// min ||Ax - y||_2 by Householder QR with column pivoting. Rank-deficient
/// systems get the basic solution (zeros on the dropped pivots).
inline LeastSquares least_squares_residual(const DenseMatrix& a, std::span<const double> y) {
    const std::size_t m = a.rows();
    const std::size_t n = a.cols();
    if (y.size() != m) throw std::invalid_argument("least_squares_residual: rows(A) != len(y)");
    DenseMatrix r = a;
    Vector qty(y.begin(), y.end());
    std::vector<std::size_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    Vector colnorm(n);
    for (std::size_t j = 0; j < n; ++j) colnorm[j] = r.column_norm_sq(j);

    const std::size_t steps = std::min(m, n);
    double first_pivot = 0.0;
    std::size_t rank = 0;
    for (std::size_t k = 0; k < steps; ++k) {
        std::size_t best = k;
        for (std::size_t j = k + 1; j < n; ++j)
            if (colnorm[j] > colnorm[best]) best = j;
        if (best != k) {
            for (std::size_t i = 0; i < m; ++i) std::swap(r(i, k), r(i, best));
            std::swap(colnorm[k], colnorm[best]);
            std::swap(perm[k], perm[best]);
        }
        double alpha = 0.0;
        for (std::size_t i = k; i < m; ++i) alpha += r(i, k) * r(i, k);
        alpha = std::sqrt(alpha);
        if (k == 0) first_pivot = alpha;
        if (alpha <= 1e-12 * std::max(first_pivot, 1e-300)) break;
        ++rank;
        const double sign = r(k, k) >= 0.0 ? 1.0 : -1.0;
        Vector h(m - k);
        for (std::size_t i = k; i < m; ++i) h[i - k] = r(i, k);
        h[0] += sign * alpha;
        const double hnorm2 = dot(h, h);
        if (hnorm2 > 0.0) {
            for (std::size_t j = k; j < n; ++j) {
                double s = 0.0;
                for (std::size_t i = k; i < m; ++i) s += h[i - k] * r(i, j);
                s = 2.0 * s / hnorm2;
                for (std::size_t i = k; i < m; ++i) r(i, j) -= s * h[i - k];
            }
            double s = 0.0;
            for (std::size_t i = k; i < m; ++i) s += h[i - k] * qty[i];
            s = 2.0 * s / hnorm2;
            for (std::size_t i = k; i < m; ++i) qty[i] -= s * h[i - k];
        }
        for (std::size_t j = k + 1; j < n; ++j) {
            double acc = 0.0;
            for (std::size_t i = k + 1; i < m; ++i) acc += r(i, j) * r(i, j);
            colnorm[j] = acc;
        }
    }
    Vector z(n, 0.0);
    for (std::size_t kk = rank; kk-- > 0;) {
        double acc = qty[kk];
        for (std::size_t j = kk + 1; j < rank; ++j) acc -= r(kk, j) * z[j];
        z[kk] = acc / r(kk, kk);
    }
    LeastSquares out;
    out.x.assign(n, 0.0);
    for (std::size_t k = 0; k < n; ++k) out.x[perm[k]] = z[k];
    const Vector ax = a.apply(out.x);
    out.residual_l2 = norm(subtract(ax, y), NormKind::L2);
    out.rank = rank;
    return out;
}

/// Solves the square system B x = rhs by Gaussian elimination with partial
/// pivoting. Returns false when B is numerically singular.
inline bool solve_square(DenseMatrix b, Vector& rhs) {
    const std::size_t m = b.rows();
    for (std::size_t k = 0; k < m; ++k) {
        std::size_t piv = k;
        for (std::size_t i = k + 1; i < m; ++i)
            if (std::abs(b(i, k)) > std::abs(b(piv, k))) piv = i;
        if (std::abs(b(piv, k)) < 1e-300) return false;
        if (piv != k) {
            for (std::size_t j = 0; j < m; ++j) std::swap(b(k, j), b(piv, j));
            std::swap(rhs[k], rhs[piv]);
        }
        for (std::size_t i = k + 1; i < m; ++i) {
            const double f = b(i, k) / b(k, k);
            if (f == 0.0) continue;
            for (std::size_t j = k; j < m; ++j) b(i, j) -= f * b(k, j);
            rhs[i] -= f * rhs[k];
        }
    }
    for (std::size_t k = m; k-- > 0;) {
        double acc = rhs[k];
        for (std::size_t j = k + 1; j < m; ++j) acc -= b(k, j) * rhs[j];
        rhs[k] = acc / b(k, k);
    }
    return true;
}

// ---------------------------------------------------------------------------
// Combinatorics
// ---------------------------------------------------------------------------

/// C(n, k) as a double (exact below 2^53).
inline double binomial(std::size_t n, std::size_t k) {
    if (k > n) return 0.0;
    k = std::min(k, n - k);
    double r = 1.0;
    for (std::size_t i = 1; i <= k; ++i) r = r * static_cast<double>(n - k + i) / static_cast<double>(i);
    return std::round(r);
}

/// Advances a sorted k-subset of {0..n-1} to the next one in lexicographic
/// order. Returns false after the last subset.
inline bool next_combination(IndexSet& c, std::size_t n) {
    const std::size_t k = c.size();
    for (std::size_t i = k; i-- > 0;) {
        if (c[i] < n - k + i) {
            ++c[i];
            for (std::size_t j = i + 1; j < k; ++j) c[j] = c[j - 1] + 1;
            return true;
        }
    }
    return false;
}

inline IndexSet first_combination(std::size_t k) {
    IndexSet c(k);
    std::iota(c.begin(), c.end(), 0);
    return c;
}

/// Uniform random k-subset of {0..n-1}, sorted (partial Fisher-Yates).
inline IndexSet random_support(std::size_t n, std::size_t k, RngStream& rng) {
    IndexSet pool(n);
    std::iota(pool.begin(), pool.end(), 0);
    for (std::size_t i = 0; i < k; ++i) {
        const std::size_t j = i + static_cast<std::size_t>(rng.below(n - i));
        std::swap(pool[i], pool[j]);
    }
    pool.resize(k);
    std::sort(pool.begin(), pool.end());
    return pool;
}

}  // namespace srl
