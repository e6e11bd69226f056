#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "srl/core.hpp"
#include "srl/ensembles.hpp"
#include "srl/errors.hpp"
#include "srl/lp.hpp"
#include "srl/rng.hpp"
#include "srl/solvers.hpp"

namespace srl {

inline constexpr double kSupportGuard = 1e6;  // max number of supports enumerated
inline constexpr double kLpGuard = 1e6;       // max number of LPs per family
inline constexpr double kNspMarginTol = 1e-8;

namespace detail {

inline void check_support_guard(const char* who, std::size_t n, std::size_t s, double per_support = 1.0) {
    const double count = binomial(n, s) * per_support;
    if (count > kSupportGuard)
        throw GuardError(std::string(who) + ": C(n,s) * sign patterns = " + std::to_string(count) +
                         " exceeds the enumeration guard of " + std::to_string(kSupportGuard));
}

inline void check_index_set(const char* who, const IndexSet& s, std::size_t n) {
    std::vector<bool> seen(n, false);
    for (std::size_t i : s) {
        if (i >= n) throw std::invalid_argument(std::string(who) + ": index outside 0..n-1");
        if (seen[i]) throw std::invalid_argument(std::string(who) + ": repeated index");
        seen[i] = true;
    }
}

// Sign patterns over k coordinates with the first sign fixed to +1. The
// excluded half are negatives of these and give identical answers for every
// symmetric problem below.
inline std::vector<std::vector<double>> half_sign_patterns(std::size_t k) {
    std::vector<std::vector<double>> out;
    if (k == 0) return out;
    const std::size_t count = std::size_t{1} << (k - 1);
    for (std::size_t mask = 0; mask < count; ++mask) {
        std::vector<double> sg(k, 1.0);
        for (std::size_t b = 1; b < k; ++b)
            if ((mask >> (b - 1)) & 1U) sg[b] = -1.0;
        out.push_back(std::move(sg));
    }
    return out;
}

struct KernelMass {
    double value = 0.0;  // max sigma^T v_S over Gamma v = 0, ||v||_1 <= 1
    Vector v;
};

// max sigma^T v_S  s.t.  Gamma v = 0, ||v||_1 <= 1.
inline KernelMass kernel_mass(const DenseMatrix& gamma, const IndexSet& s, std::span<const double> signs,
                              const SimplexOptions& opt) {
    const std::size_t m = gamma.rows();
    const std::size_t n = gamma.cols();
    LpProblem lp;
    lp.c.assign(2 * n + 1, 0.0);
    for (std::size_t k = 0; k < s.size(); ++k) {
        lp.c[s[k]] = -signs[k];
        lp.c[n + s[k]] = signs[k];
    }
    lp.a = DenseMatrix(m + 1, 2 * n + 1);
    for (std::size_t i = 0; i < m; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            lp.a(i, j) = gamma(i, j);
            lp.a(i, n + j) = -gamma(i, j);
        }
    for (std::size_t j = 0; j < 2 * n + 1; ++j) lp.a(m, j) = 1.0;
    lp.b.assign(m + 1, 0.0);
    lp.b[m] = 1.0;
    const LpSolution sol = simplex_solve(lp, opt);
    if (sol.status != LpStatus::Optimal)
        throw GuardError("kernel_mass: LP unexpectedly " + std::string(to_string(sol.status)));
    KernelMass out;
    out.v.resize(n);
    for (std::size_t j = 0; j < n; ++j) out.v[j] = sol.x[j] - sol.x[n + j];
    out.value = -sol.objective_value;
    return out;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Restricted singular values
// ---------------------------------------------------------------------------

struct RestrictedExtremes {
    double sigma_min = std::numeric_limits<double>::infinity();
    double sigma_max = 0.0;
    IndexSet argmin_support;
    IndexSet argmax_support;
    std::size_t supports = 0;
};

/// Exact min and max of the extreme singular values of Gamma_S over all
/// supports |S| = s. sigma_min^2 is the smallest value of ||Gamma t||_2^2
/// over s-sparse unit t.
inline RestrictedExtremes restricted_sigma_extremes(const DenseMatrix& gamma, std::size_t s) {
    const std::size_t n = gamma.cols();
    if (s < 1 || s > std::min<std::size_t>(n, 14))
        throw std::invalid_argument("restricted_sigma_extremes: requires 1 <= s <= min(n, 14)");
    detail::check_support_guard("restricted_sigma_extremes", n, s);
    RestrictedExtremes out;
    IndexSet S = first_combination(s);
    do {
        const auto ext = singular_extremes(gamma.select_columns(S));
        if (ext.sigma_min < out.sigma_min) {
            out.sigma_min = ext.sigma_min;
            out.argmin_support = S;
        }
        if (ext.sigma_max > out.sigma_max) {
            out.sigma_max = ext.sigma_max;
            out.argmax_support = S;
        }
        ++out.supports;
    } while (next_combination(S, n));
    return out;
}

inline double rip_delta(double sigma_min, double sigma_max) {
    return std::max(1.0 - sigma_min, sigma_max - 1.0);
}

// ---------------------------------------------------------------------------
// Null space property
// ---------------------------------------------------------------------------

struct NspResult {
    bool holds = false;
    double worst_ratio = 0.0;  // max over |S| = s of ||v_S||_1 / ||v||_1 on ker(Gamma)
    IndexSet worst_support;
    std::vector<double> worst_signs;
    Vector worst_kernel_vector;  // unit l1 norm; zero when the kernel is trivial
    std::size_t lps_solved = 0;
};

/// Null space property of order s, decided exactly by one LP per support and
/// sign pattern: max sigma^T v_S over Gamma v = 0, ||v||_1 <= 1. Holds when
/// the worst value stays below 1/2 by margin_tol. Only |S| = s is enumerated;
/// smaller supports can never give a larger value.
inline NspResult nsp_order_s(const DenseMatrix& gamma, std::size_t s, double margin_tol = kNspMarginTol,
                             const SimplexOptions& opt = {}) {
    const std::size_t n = gamma.cols();
    if (s < 1 || s > n) throw std::invalid_argument("nsp_order_s: requires 1 <= s <= n");
    detail::check_support_guard("nsp_order_s", n, s, std::ldexp(1.0, static_cast<int>(s) - 1));
    NspResult out;
    out.worst_ratio = -1.0;
    const auto patterns = detail::half_sign_patterns(s);
    IndexSet S = first_combination(s);
    do {
        for (const auto& sg : patterns) {
            const auto km = detail::kernel_mass(gamma, S, sg, opt);
            ++out.lps_solved;
            if (km.value > out.worst_ratio) {
                out.worst_ratio = km.value;
                out.worst_support = S;
                out.worst_signs = sg;
                out.worst_kernel_vector = km.v;
            }
        }
    } while (next_combination(S, n));
    out.worst_ratio = std::max(out.worst_ratio, 0.0);
    out.holds = out.worst_ratio < 0.5 - margin_tol;
    return out;
}

// ---------------------------------------------------------------------------
// Kernel / cone intersection
// ---------------------------------------------------------------------------

struct ConeIntersection {
    bool intersects = false;
    double max_mass = 0.0;  // max ||v_S||_1 over unit-l1 kernel vectors
    std::optional<Vector> witness;
};

/// Is there a nonzero v in ker(Gamma) with ||v_{S^c}||_1 <= c0 ||v_S||_1?
/// Equivalently: does the kernel mass on S reach 1/(1+c0)?
inline ConeIntersection kernel_cone_intersect(const DenseMatrix& gamma, const IndexSet& S, double c0,
                                              const SimplexOptions& opt = {}) {
    const std::size_t n = gamma.cols();
    detail::check_index_set("kernel_cone_intersect", S, n);
    if (S.empty() || S.size() > 20) throw std::invalid_argument("kernel_cone_intersect: requires 1 <= |S| <= 20");
    if (!(c0 >= 0.0)) throw std::invalid_argument("kernel_cone_intersect: requires c0 >= 0");
    ConeIntersection out;
    Vector best_v;
    for (const auto& sg : detail::half_sign_patterns(S.size())) {
        const auto km = detail::kernel_mass(gamma, S, sg, opt);
        if (km.value > out.max_mass || best_v.empty()) {
            out.max_mass = std::max(km.value, 0.0);
            best_v = km.v;
        }
    }
    out.intersects = out.max_mass >= 1.0 / (1.0 + c0) - opt.feas_tol && out.max_mass > opt.feas_tol;
    if (out.intersects) out.witness = best_v;
    return out;
}

// ---------------------------------------------------------------------------
// Small-ball estimate
// ---------------------------------------------------------------------------

struct SmallBallEstimate {
    double beta_hat = 1.0;   // min over sampled directions of the tail fraction
    double beta_mean = 0.0;  // mean over sampled directions
    std::size_t directions = 0;
    std::size_t samples = 0;
    bool exact = false;
};

/// Monte Carlo estimate of inf_t P(|<X,t>| > u ||t||_2) over s-sparse unit t:
/// each direction has a uniform random support and a uniform direction on
/// that sphere, and its tail fraction is measured on `samples` fresh draws
/// of X.
inline SmallBallEstimate small_ball_beta(const EnsembleSpec& spec, std::size_t n, std::size_t s, double u,
                                         std::size_t directions, std::size_t samples, RngStream& rng) {
    if (directions < 100 || samples < 100)
        throw std::invalid_argument("small_ball_beta: requires directions, samples >= 100");
    if (s < 1 || s > n) throw std::invalid_argument("small_ball_beta: requires 1 <= s <= n");
    SmallBallEstimate out;
    out.directions = directions;
    out.samples = samples;
    double total = 0.0;
    for (std::size_t d = 0; d < directions; ++d) {
        const IndexSet S = random_support(n, s, rng);
        Vector t(s);
        for (double& x : t) x = rng.gaussian();
        const double tn = norm(t, NormKind::L2);
        for (double& x : t) x /= tn;
        std::size_t hits = 0;
        for (std::size_t k = 0; k < samples; ++k) {
            double acc = 0.0;
            for (std::size_t q = 0; q < s; ++q) acc += sample_scalar(spec, rng) * t[q];
            if (std::abs(acc) > u) ++hits;
        }
        const double frac = static_cast<double>(hits) / static_cast<double>(samples);
        out.beta_hat = std::min(out.beta_hat, frac);
        total += frac;
    }
    out.beta_mean = total / static_cast<double>(directions);
    return out;
}

// ---------------------------------------------------------------------------
// Compatibility constant
// ---------------------------------------------------------------------------

struct CompatibilityOptions {
    std::size_t max_iter = 50000;
    double gap_tol = 1e-14;
};

struct CompatibilityResult {
    double phi_upper = std::numeric_limits<double>::infinity();
    double phi_lower = 0.0;  // from the Frank-Wolfe duality gap
    double gap = std::numeric_limits<double>::infinity();
    bool converged = false;
    Vector zeta_s;   // minimiser part on S, unit l1 norm
    Vector zeta_sc;  // minimiser part on S^c, l1 norm <= L
};

namespace detail {

struct FwResult {
    double value = 0.0;  // ||Gamma x||^2
    double gap = 0.0;
    bool converged = false;
    Vector x;
};

// Away-step Frank-Wolfe for min ||Gamma x||^2 over the product of
//   conv{ sign_k e_{S_k} }            (face of the l1 sphere on S)
//   conv{ 0, +-L e_j : j not in S }   (L times the l1 ball on S^c)
// with exact line search.
inline FwResult compatibility_fw(const DenseMatrix& gamma, const IndexSet& S, std::span<const double> signs,
                                 double L, const CompatibilityOptions& opt) {
    const std::size_t n = gamma.cols();
    const std::size_t N = gamma.rows();
    std::vector<bool> in_s(n, false);
    for (std::size_t i : S) in_s[i] = true;
    IndexSet rest;
    for (std::size_t j = 0; j < n; ++j)
        if (!in_s[j]) rest.push_back(j);

    // Atoms: S block id k -> sign_k e_{S_k}; S^c block id 0 -> zero,
    // 1 + 2q -> +L e_{rest_q}, 2 + 2q -> -L e_{rest_q}.
    std::map<std::size_t, double> w_s{{0, 1.0}};
    std::map<std::size_t, double> w_c{{0, 1.0}};
    auto atom_s = [&](std::size_t k, Vector& img) {
        for (std::size_t i = 0; i < N; ++i) img[i] = signs[k] * gamma(i, S[k]);
    };
    auto atom_c = [&](std::size_t id, Vector& img) {
        if (id == 0) {
            std::fill(img.begin(), img.end(), 0.0);
            return;
        }
        const std::size_t q = (id - 1) / 2;
        const double sg = (id % 2 == 1) ? L : -L;
        for (std::size_t i = 0; i < N; ++i) img[i] = sg * gamma(i, rest[q]);
    };
    auto atom_c_dot = [&](std::size_t id, const Vector& g) {
        if (id == 0) return 0.0;
        const std::size_t q = (id - 1) / 2;
        return ((id % 2 == 1) ? L : -L) * g[rest[q]];
    };

    Vector r_s(N), r_c(N, 0.0), img(N), img2(N);
    atom_s(0, r_s);
    FwResult out;
    std::size_t it = 0;
    for (;; ++it) {
        Vector r(N);
        for (std::size_t i = 0; i < N; ++i) r[i] = r_s[i] + r_c[i];
        Vector g = gamma.apply_transpose(r);
        for (double& v : g) v *= 2.0;
        const double f = dot(r, r);

        // <g, x> per block
        double gx_s = 0.0;
        for (const auto& [k, w] : w_s) gx_s += w * signs[k] * g[S[k]];
        double gx_c = 0.0;
        for (const auto& [id, w] : w_c) gx_c += w * atom_c_dot(id, g);

        // FW atoms
        std::size_t fw_s = 0;
        double fw_s_val = std::numeric_limits<double>::infinity();
        for (std::size_t k = 0; k < S.size(); ++k) {
            const double v = signs[k] * g[S[k]];
            if (v < fw_s_val) {
                fw_s_val = v;
                fw_s = k;
            }
        }
        std::size_t fw_c = 0;
        double fw_c_val = 0.0;
        for (std::size_t q = 0; q < rest.size(); ++q) {
            const double a = -L * std::abs(g[rest[q]]);
            if (a < fw_c_val) {
                fw_c_val = a;
                fw_c = g[rest[q]] > 0.0 ? 2 + 2 * q : 1 + 2 * q;
            }
        }
        // Away atoms
        std::size_t aw_s = w_s.begin()->first;
        double aw_s_val = -std::numeric_limits<double>::infinity();
        for (const auto& [k, w] : w_s) {
            const double v = signs[k] * g[S[k]];
            if (v > aw_s_val) {
                aw_s_val = v;
                aw_s = k;
            }
        }
        std::size_t aw_c = w_c.begin()->first;
        double aw_c_val = -std::numeric_limits<double>::infinity();
        for (const auto& [id, w] : w_c) {
            const double v = atom_c_dot(id, g);
            if (v > aw_c_val) {
                aw_c_val = v;
                aw_c = id;
            }
        }
        const double gap_fw_s = gx_s - fw_s_val;
        const double gap_fw_c = gx_c - fw_c_val;
        const double gap_aw_s = aw_s_val - gx_s;
        const double gap_aw_c = aw_c_val - gx_c;
        const double gap = std::max(0.0, gap_fw_s) + std::max(0.0, gap_fw_c);

        out.value = f;
        out.gap = gap;
        if (gap <= opt.gap_tol) {
            out.converged = true;
            break;
        }
        if (it >= opt.max_iter) break;

        // Pick the move with the largest first-order decrease.
        enum { FwS, FwC, AwS, AwC } move = FwS;
        double best = gap_fw_s;
        if (gap_fw_c > best) { best = gap_fw_c; move = FwC; }
        if (w_s.size() > 1 && gap_aw_s > best) { best = gap_aw_s; move = AwS; }
        if (w_c.size() > 1 && gap_aw_c > best) { best = gap_aw_c; move = AwC; }

        // direction image d = Gamma * (direction), and max step
        Vector d(N);
        double gmax = 1.0;
        if (move == FwS) {
            atom_s(fw_s, img);
            for (std::size_t i = 0; i < N; ++i) d[i] = img[i] - r_s[i];
        } else if (move == FwC) {
            atom_c(fw_c, img);
            for (std::size_t i = 0; i < N; ++i) d[i] = img[i] - r_c[i];
        } else if (move == AwS) {
            atom_s(aw_s, img);
            for (std::size_t i = 0; i < N; ++i) d[i] = r_s[i] - img[i];
            const double a = w_s[aw_s];
            gmax = a / (1.0 - a);
        } else {
            atom_c(aw_c, img);
            for (std::size_t i = 0; i < N; ++i) d[i] = r_c[i] - img[i];
            const double a = w_c[aw_c];
            gmax = a / (1.0 - a);
        }
        const double dd = dot(d, d);
        const double rd = dot(r, d);
        double step = dd > 0.0 ? std::clamp(-rd / dd, 0.0, gmax) : gmax;
        if (!(step > 0.0)) {
            // No progress possible along the chosen direction; the gap is then
            // numerical noise.
            out.converged = gap <= 1e-10 * std::max(1.0, f);
            break;
        }

        auto& weights = (move == FwS || move == AwS) ? w_s : w_c;
        Vector& rb = (move == FwS || move == AwS) ? r_s : r_c;
        if (move == FwS || move == FwC) {
            const std::size_t id = move == FwS ? fw_s : fw_c;
            for (auto& [k, w] : weights) w *= (1.0 - step);
            weights[id] += step;
            if (step >= 1.0) {
                weights.clear();
                weights[id] = 1.0;
            }
            for (std::size_t i = 0; i < N; ++i) rb[i] = (1.0 - step) * rb[i] + step * img[i];
        } else {
            const std::size_t id = move == AwS ? aw_s : aw_c;
            for (auto& [k, w] : weights) w *= (1.0 + step);
            weights[id] -= step;
            if (step >= gmax || weights[id] <= 1e-15) weights.erase(id);
            for (std::size_t i = 0; i < N; ++i) rb[i] = (1.0 + step) * rb[i] - step * img[i];
        }
        // Refresh block images from weights occasionally to limit drift.
        if (it % 64 == 63) {
            std::fill(r_s.begin(), r_s.end(), 0.0);
            for (const auto& [k, w] : w_s) {
                atom_s(k, img2);
                for (std::size_t i = 0; i < N; ++i) r_s[i] += w * img2[i];
            }
            std::fill(r_c.begin(), r_c.end(), 0.0);
            for (const auto& [id, w] : w_c) {
                atom_c(id, img2);
                for (std::size_t i = 0; i < N; ++i) r_c[i] += w * img2[i];
            }
        }
    }
    out.x.assign(n, 0.0);
    for (const auto& [k, w] : w_s) out.x[S[k]] += w * signs[k];
    for (const auto& [id, w] : w_c) {
        if (id == 0) continue;
        const std::size_t q = (id - 1) / 2;
        out.x[rest[q]] += w * ((id % 2 == 1) ? L : -L);
    }
    return out;
}

}  // namespace detail

/// Compatibility constant
///   phi(L, S) = sqrt|S| * min ||Gamma zeta_S - Gamma zeta_{S^c}||_2
/// over ||zeta_S||_1 = 1 and ||zeta_{S^c}||_1 <= L. The unit-sphere
/// constraint is split into its sign-pattern faces, each a convex problem
/// solved by away-step Frank-Wolfe; phi_upper comes from the best feasible
/// point, phi_lower from the duality gap.
inline CompatibilityResult compatibility_phi(const DenseMatrix& gamma, double L, const IndexSet& S,
                                             const CompatibilityOptions& opt = {}) {
    const std::size_t n = gamma.cols();
    detail::check_index_set("compatibility_phi", S, n);
    if (S.empty() || S.size() > 10) throw std::invalid_argument("compatibility_phi: requires 1 <= |S| <= 10");
    if (!(L > 0.0)) throw std::invalid_argument("compatibility_phi: requires L > 0");
    const double scale = std::sqrt(static_cast<double>(S.size()));
    CompatibilityResult out;
    out.converged = true;
    out.phi_lower = std::numeric_limits<double>::infinity();
    double best_gap = 0.0;
    for (const auto& sg : detail::half_sign_patterns(S.size())) {
        const auto fw = detail::compatibility_fw(gamma, S, sg, L, opt);
        const double up = scale * std::sqrt(std::max(fw.value, 0.0));
        const double lo = scale * std::sqrt(std::max(fw.value - fw.gap, 0.0));
        out.converged = out.converged && fw.converged;
        out.phi_lower = std::min(out.phi_lower, lo);
        if (up < out.phi_upper) {
            out.phi_upper = up;
            best_gap = fw.gap;
            out.zeta_s.assign(n, 0.0);
            out.zeta_sc.assign(n, 0.0);
            std::vector<bool> in_s(n, false);
            for (std::size_t i : S) in_s[i] = true;
            // x = zeta_S - zeta_{S^c}
            for (std::size_t j = 0; j < n; ++j) {
                if (in_s[j]) out.zeta_s[j] = fw.x[j];
                else out.zeta_sc[j] = -fw.x[j];
            }
        }
    }
    out.gap = best_gap;
    return out;
}

// ---------------------------------------------------------------------------
// Restricted eigenvalue constant
// ---------------------------------------------------------------------------

struct KappaEstimate {
    double kappa_upper = std::numeric_limits<double>::infinity();
    bool exact = false;  // true only when a kernel witness forces kappa = 0
    std::size_t restarts = 0;
    Vector best_x;
    IndexSet best_s0;
};

/// ||x_{S01}||_2 with S01 = S0 plus the m largest |x_i| outside S0.
inline double restricted_head_norm(std::span<const double> x, const IndexSet& s0, std::size_t m) {
    std::vector<bool> in_s0(x.size(), false);
    double acc = 0.0;
    for (std::size_t i : s0) {
        in_s0[i] = true;
        acc += x[i] * x[i];
    }
    std::vector<double> outside;
    for (std::size_t i = 0; i < x.size(); ++i)
        if (!in_s0[i]) outside.push_back(x[i] * x[i]);
    const std::size_t take = std::min(m, outside.size());
    std::partial_sort(outside.begin(), outside.begin() + static_cast<std::ptrdiff_t>(take), outside.end(),
                      std::greater<>());
    for (std::size_t k = 0; k < take; ++k) acc += outside[k];
    return std::sqrt(acc);
}

/// Cone membership ||x_{S0^c}||_1 <= c0 ||x_{S0}||_1 (with relative slack).
inline bool in_restricted_cone(std::span<const double> x, const IndexSet& s0, double c0, double slack = 1e-12) {
    std::vector<bool> in_s0(x.size(), false);
    double on = 0.0, off = 0.0;
    for (std::size_t i : s0) in_s0[i] = true;
    for (std::size_t i = 0; i < x.size(); ++i) (in_s0[i] ? on : off) += std::abs(x[i]);
    return on > 0.0 && off <= c0 * on * (1.0 + slack);
}

namespace detail {

inline void retract_to_cone(Vector& x, const std::vector<bool>& in_s0, double c0) {
    double on = 0.0, off = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) (in_s0[i] ? on : off) += std::abs(x[i]);
    if (off > c0 * on && off > 0.0) {
        const double f = c0 * on / off * (1.0 - 1e-12);
        for (std::size_t i = 0; i < x.size(); ++i)
            if (!in_s0[i]) x[i] *= f;
    }
}

}  // namespace detail

/// Upper bound on the restricted eigenvalue constant
///   kappa(s, m, c0) = min ||Gamma x||_2 / ||x_{S01}||_2
/// over |S0| <= s and the cone ||x_{S0^c}||_1 <= c0 ||x_{S0}||_1.
///
/// When the supports can be enumerated, an exact kernel check runs first and
/// a witness gives kappa = 0 (exact). Otherwise, or when no witness exists,
/// the value is the best ratio found by multi-start projected descent (S1
/// recomputed each step; infeasible iterates scaled back into the cone). Every
/// reported ratio is attained at a cone point, so the result is an upper
/// bound.
inline KappaEstimate rec_kappa_upper(const DenseMatrix& gamma, std::size_t s, std::size_t m, double c0,
                                     std::size_t restarts, RngStream& rng, std::size_t steps_per_restart = 300) {
    const std::size_t n = gamma.cols();
    if (s < 1 || m < 1 || s + m > n) throw std::invalid_argument("rec_kappa_upper: requires s, m >= 1 and s + m <= n");
    if (!(c0 >= 0.0)) throw std::invalid_argument("rec_kappa_upper: requires c0 >= 0");
    KappaEstimate out;

    const double lp_count = binomial(n, s) * std::ldexp(1.0, static_cast<int>(s) - 1);
    if (lp_count <= 2000.0) {
        IndexSet S = first_combination(s);
        do {
            const auto ci = kernel_cone_intersect(gamma, S, c0);
            if (ci.intersects) {
                out.kappa_upper = 0.0;
                out.exact = true;
                out.best_x = *ci.witness;
                out.best_s0 = S;
                return out;
            }
        } while (next_combination(S, n));
    }

    auto ratio = [&](const Vector& x, const IndexSet& s0) {
        const double head = restricted_head_norm(x, s0, m);
        if (!(head > 0.0)) return std::numeric_limits<double>::infinity();
        return norm(gamma.apply(x), NormKind::L2) / head;
    };

    for (std::size_t r = 0; r < restarts; ++r) {
        ++out.restarts;
        const IndexSet s0 = random_support(n, s, rng);
        std::vector<bool> in_s0(n, false);
        for (std::size_t i : s0) in_s0[i] = true;
        Vector x(n);
        for (double& v : x) v = rng.gaussian();
        detail::retract_to_cone(x, in_s0, c0);
        double cur = ratio(x, s0);
        double step = 0.1;
        for (std::size_t it = 0; it < steps_per_restart && step > 1e-12; ++it) {
            // gradient of ||Gamma x||^2 / ||x_{S01}||^2 with S01 frozen
            const double head = restricted_head_norm(x, s0, m);
            std::vector<double> sq(n);
            for (std::size_t i = 0; i < n; ++i) sq[i] = x[i] * x[i];
            std::vector<bool> in_head = in_s0;
            {
                std::vector<std::size_t> idx;
                for (std::size_t i = 0; i < n; ++i)
                    if (!in_s0[i]) idx.push_back(i);
                const std::size_t take = std::min(m, idx.size());
                std::partial_sort(idx.begin(), idx.begin() + static_cast<std::ptrdiff_t>(take), idx.end(),
                                  [&](std::size_t a, std::size_t b) { return sq[a] > sq[b]; });
                for (std::size_t k = 0; k < take; ++k) in_head[idx[k]] = true;
            }
            const Vector gx = gamma.apply(x);
            const double num = dot(gx, gx);
            const double den = head * head;
            Vector grad = gamma.apply_transpose(gx);
            for (std::size_t i = 0; i < n; ++i) {
                grad[i] = 2.0 * grad[i] / den - (in_head[i] ? 2.0 * num * x[i] / (den * den) : 0.0);
            }
            const double xn = norm(x, NormKind::L2);
            const double gn = norm(grad, NormKind::L2);
            if (!(gn > 0.0)) break;
            Vector trial(n);
            for (std::size_t i = 0; i < n; ++i) trial[i] = x[i] - step * xn * grad[i] / gn;
            detail::retract_to_cone(trial, in_s0, c0);
            const double tr = ratio(trial, s0);
            if (tr < cur) {
                x = std::move(trial);
                const double tn = norm(x, NormKind::L2);
                for (double& v : x) v /= tn;
                cur = tr;
                step *= 1.5;
            } else {
                step *= 0.5;
            }
        }
        if (cur < out.kappa_upper && in_restricted_cone(x, s0, c0, 1e-9)) {
            out.kappa_upper = cur;
            out.best_x = x;
            out.best_s0 = s0;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Sparsity certificate from a restricted lower bound and column norms
// ---------------------------------------------------------------------------

struct RecoveryOrderCertificate {
    double c0 = 0.0;       // min ||Gamma x||_2 / ||x||_2 over s-sparse x
    double c1 = 0.0;       // max_j ||Gamma e_j||_2
    std::size_t s1 = 0;    // certified exact-reconstruction order (0 = no guarantee)
};

inline double max_column_norm(const DenseMatrix& gamma) {
    double best = 0.0;
    for (std::size_t j = 0; j < gamma.cols(); ++j) best = std::max(best, gamma.column_norm_sq(j));
    return std::sqrt(best);
}

/// s1 = floor(c0^2 (s-1) / (4 c1^2)) - 1, floored at 0.
inline std::size_t certified_order(double c0, double c1, std::size_t s) {
    if (!(c0 > 0.0) || !(c1 > 0.0) || s < 2) return 0;
    const double raw = std::floor(c0 * c0 * static_cast<double>(s - 1) / (4.0 * c1 * c1)) - 1.0;
    return raw >= 1.0 ? static_cast<std::size_t>(raw) : 0;
}

inline RecoveryOrderCertificate recovery_order_certificate(const DenseMatrix& gamma, std::size_t s) {
    RecoveryOrderCertificate out;
    out.c0 = restricted_sigma_extremes(gamma, s).sigma_min;
    out.c1 = max_column_norm(gamma);
    out.s1 = certified_order(out.c0, out.c1, s);
    return out;
}

/// Right-hand side of the Maurey lower bound
///   ||Gamma y||^2 >= lambda^2 ||y||_2^2 - ||y||_1^2/(s-1) (sum_j ||Gamma e_j||^2 mu_j - lambda^2),
/// mu_j = |y_j| / ||y||_1, valid when ||Gamma x|| >= lambda ||x|| on s-sparse x.
inline double maurey_rhs(const DenseMatrix& gamma, std::span<const double> y, std::size_t s, double lambda) {
    if (s < 2) throw std::invalid_argument("maurey_rhs: requires s >= 2");
    if (y.size() != gamma.cols()) throw std::invalid_argument("maurey_rhs: len(y) != cols(Gamma)");
    const double l1 = norm(y, NormKind::L1);
    if (!(l1 > 0.0)) throw std::invalid_argument("maurey_rhs: y must be nonzero");
    const double l2 = norm(y, NormKind::L2);
    double w = 0.0;
    for (std::size_t j = 0; j < y.size(); ++j) w += gamma.column_norm_sq(j) * std::abs(y[j]) / l1;
    const double lam2 = lambda * lambda;
    return lam2 * l2 * l2 - (l1 * l1 / static_cast<double>(s - 1)) * (w - lam2);
}

// ---------------------------------------------------------------------------
// Polytope geometry of Gamma B_1^n
// ---------------------------------------------------------------------------

namespace detail {

// min ||w||_1 over convex weights a on {eps_i C_i : i in S} and w on S^c with
// sum a_i eps_i C_i = Gamma_{S^c} w. +inf when infeasible.
inline double separation_lp(const DenseMatrix& gamma, const IndexSet& S, std::span<const double> eps,
                            const SimplexOptions& opt) {
    const std::size_t N = gamma.rows();
    const std::size_t n = gamma.cols();
    const std::size_t k = S.size();
    std::vector<bool> in_s(n, false);
    for (std::size_t i : S) in_s[i] = true;
    IndexSet rest;
    for (std::size_t j = 0; j < n; ++j)
        if (!in_s[j]) rest.push_back(j);
    const std::size_t r = rest.size();
    LpProblem lp;
    lp.c.assign(k + 2 * r, 0.0);
    for (std::size_t q = 0; q < 2 * r; ++q) lp.c[k + q] = 1.0;
    lp.a = DenseMatrix(N + 1, k + 2 * r);
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t q = 0; q < k; ++q) lp.a(i, q) = eps[q] * gamma(i, S[q]);
        for (std::size_t q = 0; q < r; ++q) {
            lp.a(i, k + q) = -gamma(i, rest[q]);
            lp.a(i, k + r + q) = gamma(i, rest[q]);
        }
    }
    for (std::size_t q = 0; q < k; ++q) lp.a(N, q) = 1.0;
    lp.b.assign(N + 1, 0.0);
    lp.b[N] = 1.0;
    const auto sol = simplex_solve(lp, opt);
    if (sol.status != LpStatus::Optimal) return std::numeric_limits<double>::infinity();
    return sol.objective_value;
}

}  // namespace detail

/// +-Gamma e_j are vertices of Gamma B_1^n iff Gamma e_j is not in the
/// absolute convex hull of the other columns.
inline bool column_is_vertex(const DenseMatrix& gamma, std::size_t j, const SimplexOptions& opt = {}) {
    if (j >= gamma.cols()) throw std::invalid_argument("column_is_vertex: index outside 0..n-1");
    const double one = 1.0;
    return detail::separation_lp(gamma, IndexSet{j}, std::span<const double>(&one, 1), opt) > 1.0 + opt.feas_tol;
}

struct VertexCensus {
    std::size_t num_vertices = 0;
    IndexSet non_vertex_columns;
};

inline VertexCensus vertex_census(const DenseMatrix& gamma, const SimplexOptions& opt = {}) {
    if (gamma.cols() > 10000) throw GuardError("vertex_census: n exceeds 10^4 (one LP per column)");
    VertexCensus out;
    for (std::size_t j = 0; j < gamma.cols(); ++j) {
        if (column_is_vertex(gamma, j, opt)) out.num_vertices += 2;
        else out.non_vertex_columns.push_back(j);
    }
    return out;
}

struct NeighbourlyViolation {
    IndexSet support;
    std::vector<double> signs;
};

struct NeighbourlyResult {
    bool neighbourly = true;
    std::optional<NeighbourlyViolation> violating;
    double min_separation = std::numeric_limits<double>::infinity();  // min LP value over (S, eps)
    double min_phi_upper = std::numeric_limits<double>::infinity();   // filled by the cross-check
    std::size_t lps_solved = 0;
};

struct NeighbourlyOptions {
    SimplexOptions lp;
    bool cross_check = false;  // also evaluate min phi(1,S) and assert agreement
    double decide_band = 1e-5;
    CompatibilityOptions fw;
};

// phi values at or below this are treated as an exact zero
inline constexpr double kPhiZero = 1e-10;


/// Checks that conv{eps_i C_i : i in S} and absconv{C_j : j not in S} are
/// disjoint for every |S| <= s and every sign choice, one LP each; this is
/// "Gamma B_1^n has 2n vertices and is s-neighbourly". With cross_check set,
/// min_{|S|<=s} phi(1, S) is computed as well and a ConsistencyError is thrown
/// if the two routes disagree outside the decision band.
inline NeighbourlyResult neighbourly_check(const DenseMatrix& gamma, std::size_t s, const NeighbourlyOptions& opt = {}) {
    const std::size_t n = gamma.cols();
    if (s < 1 || s > n) throw std::invalid_argument("neighbourly_check: requires 1 <= s <= n");
    double lp_total = 0.0;
    for (std::size_t k = 1; k <= s; ++k) lp_total += binomial(n, k) * std::ldexp(1.0, static_cast<int>(k) - 1);
    if (lp_total > kLpGuard)
        throw GuardError("neighbourly_check: " + std::to_string(lp_total) + " LPs exceed the guard of " +
                         std::to_string(kLpGuard));
    NeighbourlyResult out;
    for (std::size_t k = 1; k <= s; ++k) {
        const auto patterns = detail::half_sign_patterns(k);
        IndexSet S = first_combination(k);
        do {
            double support_min = std::numeric_limits<double>::infinity();
            for (const auto& eps : patterns) {
                const double v = detail::separation_lp(gamma, S, eps, opt.lp);
                ++out.lps_solved;
                support_min = std::min(support_min, v);
                if (v < out.min_separation) out.min_separation = v;
                if (v <= 1.0 + opt.lp.feas_tol && out.neighbourly) {
                    out.neighbourly = false;
                    out.violating = NeighbourlyViolation{S, eps};
                }
            }
            if (opt.cross_check) {
                const auto phi = compatibility_phi(gamma, 1.0, S, opt.fw);
                out.min_phi_upper = std::min(out.min_phi_upper, phi.phi_upper);
                const bool lp_touch = support_min <= 1.0 + opt.lp.feas_tol;
                const bool lp_clear = support_min > 1.0 + opt.decide_band;
                // compare against the certified bracket [phi_lower, phi_upper]
                if (lp_touch && phi.phi_lower > opt.decide_band)
                    throw ConsistencyError("neighbourly_check: LP finds an intersection but phi(1,S) >= " +
                                           std::to_string(phi.phi_lower));
                if (lp_clear && phi.phi_upper <= kPhiZero)
                    throw ConsistencyError("neighbourly_check: LP separates but phi(1,S) <= " +
                                           std::to_string(phi.phi_upper));
            }
        } while (next_combination(S, n));
    }
    return out;
}

struct BallSupportEstimate {
    double min_support = std::numeric_limits<double>::infinity();
    Vector argmin_direction;
    std::size_t directions = 0;
    bool exact = false;
};

/// min over sampled unit w of max_j |<v_j, w>|: an upper bound on the radius
/// of the largest Euclidean ball inside absconv{v_j}.
inline BallSupportEstimate ball_in_polytope_support(std::span<const Vector> columns, std::size_t directions,
                                                    RngStream& rng) {
    if (directions < 1000) throw std::invalid_argument("ball_in_polytope_support: requires directions >= 1000");
    if (columns.empty()) throw std::invalid_argument("ball_in_polytope_support: no columns");
    const std::size_t dim = columns.front().size();
    BallSupportEstimate out;
    out.directions = directions;
    Vector w(dim);
    for (std::size_t d = 0; d < directions; ++d) {
        for (double& x : w) x = rng.gaussian();
        const double wn = norm(w, NormKind::L2);
        if (!(wn > 0.0)) continue;
        for (double& x : w) x /= wn;
        double h = 0.0;
        for (const auto& v : columns) h = std::max(h, std::abs(dot(v, w)));
        if (h < out.min_support) {
            out.min_support = h;
            out.argmin_direction = w;
        }
    }
    return out;
}

// ---------------------------------------------------------------------------
// Aggregate report
// ---------------------------------------------------------------------------

struct PhiQuery {
    double L = 1.0;
    IndexSet S;
    CompatibilityResult result;
};

struct KappaQuery {
    std::size_t s = 1;
    std::size_t m = 1;
    double c0 = 1.0;
    KappaEstimate result;
};

struct BetaQuery {
    double u = 0.0;
    std::size_t s = 1;
    SmallBallEstimate result;
};

struct ConditionReport {
    std::size_t order = 0;
    double restricted_sigma_min = 0.0;
    double restricted_sigma_max = 0.0;
    double rip_delta = 0.0;
    double nsp_worst_ratio = 0.0;
    double nsp_margin = 0.0;  // 1/2 - worst ratio
    bool nsp_holds = false;
    RecoveryOrderCertificate certificate;
    std::vector<PhiQuery> phi;
    std::vector<KappaQuery> kappa;
    std::vector<BetaQuery> beta;
    // exact flags: restricted extremes, nsp and certificate are exact; phi
    // is a certified bracket; kappa and beta are randomized.
};

/// Exact order-s quantities of Gamma. Query vectors are filled by the caller.
inline ConditionReport evaluate_conditions(const DenseMatrix& gamma, std::size_t s) {
    ConditionReport rep;
    rep.order = s;
    const auto ext = restricted_sigma_extremes(gamma, s);
    rep.restricted_sigma_min = ext.sigma_min;
    rep.restricted_sigma_max = ext.sigma_max;
    rep.rip_delta = rip_delta(ext.sigma_min, ext.sigma_max);
    const auto nsp = nsp_order_s(gamma, s);
    rep.nsp_worst_ratio = nsp.worst_ratio;
    rep.nsp_margin = 0.5 - nsp.worst_ratio;
    rep.nsp_holds = nsp.holds;
    rep.certificate.c0 = ext.sigma_min;
    rep.certificate.c1 = max_column_norm(gamma);
    rep.certificate.s1 = certified_order(rep.certificate.c0, rep.certificate.c1, s);
    return rep;
}

}  // namespace srl
