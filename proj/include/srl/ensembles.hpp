#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "srl/core.hpp"
#include "srl/errors.hpp"
#include "srl/rng.hpp"

namespace srl {

/// Parameters of the spiky coordinate law z = eps * (1 + R * eta), where eps
/// is a symmetric sign and eta a {0,1} selector with mean delta. The sampled
/// coordinate is z / l2_norm_z, which has unit variance.
struct SpikyParams {
    std::size_t n = 0;
    std::size_t N = 0;
    double delta = 0.0;
    double p = 0.0;
    double R = 0.0;
    double l2_norm_z = 1.0;

    /// (1 + ((1+R)^2 - 1) delta)^{1/2}
    static double l2_norm_of(double delta, double R) {
        return std::sqrt(1.0 + ((1.0 + R) * (1.0 + R) - 1.0) * delta);
    }

    bool consistent(double tol = 1e-12) const {
        return delta >= 0.0 && delta < 1.0 && R >= 0.0 &&
               std::abs(l2_norm_of(delta, R) - l2_norm_z) <= tol * l2_norm_z;
    }
};

/// Builds spiky parameters from explicit (delta, p); R = sqrt(p) * delta^{-1/p}.
/// delta == 0 gives the Rademacher limit with R = 0.
inline SpikyParams make_spiky_params(std::size_t n, std::size_t N, double delta, double p) {
    if (!(delta >= 0.0 && delta < 1.0)) throw std::invalid_argument("make_spiky_params: delta must lie in [0,1)");
    SpikyParams sp;
    sp.n = n;
    sp.N = N;
    sp.delta = delta;
    sp.p = p;
    sp.R = delta > 0.0 ? std::sqrt(p) * std::pow(1.0 / delta, 1.0 / p) : 0.0;
    sp.l2_norm_z = SpikyParams::l2_norm_of(sp.delta, sp.R);
    return sp;
}

struct ConstraintDiagnostic {
    std::string constraint;
    double value = 0.0;
    double bound = 0.0;
    bool satisfied = false;
};

struct DerivedSpikyParams {
    SpikyParams params;
    std::vector<ConstraintDiagnostic> diagnostics;
};

/// Pins delta = ln(N)/n, p = ln(n)/ln(N), R = sqrt(p) (1/delta)^{1/p} and
/// reports each side condition of the construction against `slack`.
inline DerivedSpikyParams derive_spiky_params(std::size_t n, std::size_t N, double slack = 2.0) {
    if (n < 16) throw std::invalid_argument("derive_spiky_params: requires n >= 16");
    if (N < 2) throw std::invalid_argument("derive_spiky_params: requires N >= 2");
    if (slack < 1.0) throw std::invalid_argument("derive_spiky_params: requires slack >= 1");
    const double ln_n = std::log(static_cast<double>(n));
    const double ln_N = std::log(static_cast<double>(N));
    const double p = ln_n / ln_N;
    if (!(p > 2.0))
        throw GuardError("derive_spiky_params: moment horizon p = ln(n)/ln(N) = " + std::to_string(p) +
                         " must exceed 2 (n too small relative to N)");
    const double delta = ln_N / static_cast<double>(n);
    if (!(delta < 1.0)) throw GuardError("derive_spiky_params: delta = ln(N)/n must be < 1");

    DerivedSpikyParams out;
    out.params = make_spiky_params(n, N, delta, p);
    const double R = out.params.R;
    const double Nd = static_cast<double>(N);
    const double window = std::min(1.0 / Nd, std::log(std::exp(1.0) * static_cast<double>(n) / Nd) / Nd);
    out.diagnostics = {
        {"R >= 2N", R, 2.0 * Nd, R >= 2.0 * Nd},
        {"delta <= slack*min(1/N, ln(en/N)/N)", delta, slack * window, delta <= slack * window},
        {"R^4*delta <= slack", std::pow(R, 4) * delta, slack, std::pow(R, 4) * delta <= slack},
        {"p <= 2*ln(1/delta)", p, 2.0 * std::log(1.0 / delta), p <= 2.0 * std::log(1.0 / delta)},
    };
    return out;
}

enum class EnsembleKind { Gaussian, Rademacher, SymExp, Spiky, Constant };

inline const char* to_string(EnsembleKind k) noexcept {
    switch (k) {
        case EnsembleKind::Gaussian: return "gaussian";
        case EnsembleKind::Rademacher: return "rademacher";
        case EnsembleKind::SymExp: return "symexp";
        case EnsembleKind::Spiky: return "spiky";
        case EnsembleKind::Constant: return "constant";
    }
    return "?";
}

/// Coordinate law of the measurement vector. All kinds except Constant have
/// mean zero and unit variance. Constant (every draw equals 1) exists only as
/// a degenerate hook for tests.
struct EnsembleSpec {
    EnsembleKind kind = EnsembleKind::Gaussian;
    SpikyParams spiky;

    static EnsembleSpec gaussian() { return {EnsembleKind::Gaussian, {}}; }
    static EnsembleSpec rademacher() { return {EnsembleKind::Rademacher, {}}; }
    static EnsembleSpec symexp() { return {EnsembleKind::SymExp, {}}; }
    static EnsembleSpec constant() { return {EnsembleKind::Constant, {}}; }
    static EnsembleSpec spiky_law(const SpikyParams& p) { return {EnsembleKind::Spiky, p}; }
};

inline double sample_scalar(const EnsembleSpec& spec, RngStream& rng) {
    switch (spec.kind) {
        case EnsembleKind::Gaussian: return rng.gaussian();
        case EnsembleKind::Rademacher: return rng.sign();
        case EnsembleKind::SymExp: return rng.sign() * rng.exponential() * std::sqrt(0.5);
        case EnsembleKind::Spiky: {
            const double eps = rng.sign();
            const double eta = rng.bernoulli(spec.spiky.delta) ? 1.0 : 0.0;
            return eps * (1.0 + spec.spiky.R * eta) / spec.spiky.l2_norm_z;
        }
        case EnsembleKind::Constant: return 1.0;
    }
    return 0.0;
}

inline Vector sample_row(const EnsembleSpec& spec, std::size_t n, RngStream& rng) {
    if (n == 0) throw std::invalid_argument("sample_row: n must be >= 1");
    Vector row(n);
    for (double& x : row) x = sample_scalar(spec, rng);
    return row;
}

/// Latent variables of a spiky matrix: epsilon in {-1,+1}, eta in {0,1}.
struct SpikyTrace {
    DenseMatrix epsilon;
    DenseMatrix eta;
    double R = 0.0;
    double l2_norm_z = 1.0;
};

struct GeneratedMatrix {
    DenseMatrix gamma;
    std::optional<SpikyTrace> trace;
};

/// Gamma = N^{-1/2} * (rows X_1..X_N), entries drawn row-major from `rng`.
/// The trace is recorded only for the Spiky kind with keep_trace set.
inline GeneratedMatrix generate_matrix(const EnsembleSpec& spec, std::size_t N, std::size_t n, RngStream& rng,
                                       bool keep_trace = false) {
    if (N == 0 || n == 0) throw std::invalid_argument("generate_matrix: N and n must be >= 1");
    GeneratedMatrix out;
    out.gamma = DenseMatrix(N, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(N));
    const bool trace = keep_trace && spec.kind == EnsembleKind::Spiky;
    if (trace) {
        out.trace = SpikyTrace{DenseMatrix(N, n), DenseMatrix(N, n), spec.spiky.R, spec.spiky.l2_norm_z};
    }
    for (std::size_t i = 0; i < N; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            if (spec.kind == EnsembleKind::Spiky) {
                const double eps = rng.sign();
                const double eta = rng.bernoulli(spec.spiky.delta) ? 1.0 : 0.0;
                out.gamma(i, j) = eps * (1.0 + spec.spiky.R * eta) / spec.spiky.l2_norm_z * scale;
                if (trace) {
                    out.trace->epsilon(i, j) = eps;
                    out.trace->eta(i, j) = eta;
                }
            } else {
                out.gamma(i, j) = sample_scalar(spec, rng) * scale;
            }
        }
    }
    return out;
}

/// Rebuilds Gamma from a spiky trace.
inline DenseMatrix reconstruct_from_trace(const SpikyTrace& t) {
    const std::size_t N = t.epsilon.rows();
    const std::size_t n = t.epsilon.cols();
    DenseMatrix g(N, n);
    const double scale = 1.0 / std::sqrt(static_cast<double>(N));
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < n; ++j)
            g(i, j) = t.epsilon(i, j) * (1.0 + t.R * t.eta(i, j)) / t.l2_norm_z * scale;
    return g;
}

/// log(exp(a) + exp(b))
inline double log_add_exp(double a, double b) {
    if (a == -INFINITY) return b;
    if (b == -INFINITY) return a;
    const double m = std::max(a, b);
    return m + std::log1p(std::exp(-std::abs(a - b)));
}

/// log ||z||_{L_q}^q = log(1 + ((1+R)^q - 1) delta), evaluated without
/// forming (1+R)^q.
inline double spiky_log_moment(double delta, double R, double q) {
    if (delta <= 0.0) return 0.0;
    const double a = q * std::log1p(R);
    // 1 + ((1+R)^q - 1) delta = delta e^a + (1 - delta)
    return log_add_exp(std::log(delta) + a, std::log1p(-delta));
}

/// ||z||_{L_q} / ||z||_{L_2} for the spiky law.
inline double spiky_lq_ratio(const SpikyParams& params, double q) {
    if (q < 2.0) throw std::invalid_argument("spiky_lq_ratio: requires q >= 2");
    const double log_q = spiky_log_moment(params.delta, params.R, q) / q;
    const double log_2 = spiky_log_moment(params.delta, params.R, 2.0) / 2.0;
    return std::exp(log_q - log_2);
}

/// (samples^{-1} sum |x_k|^q)^{1/q} over iid coordinate draws.
inline double empirical_lp_norm(const EnsembleSpec& spec, double q, std::size_t samples, RngStream& rng) {
    if (q < 1.0) throw std::invalid_argument("empirical_lp_norm: requires q >= 1");
    if (samples < 1000) throw std::invalid_argument("empirical_lp_norm: requires samples >= 1000");
    double acc = 0.0;
    for (std::size_t k = 0; k < samples; ++k) acc += std::pow(std::abs(sample_scalar(spec, rng)), q);
    return std::pow(acc / static_cast<double>(samples), 1.0 / q);
}

/// Probability that a fixed row i has a private spike: some column j >= 2
/// with eta_ij = 1 and eta_lj = 0 for l != i, namely
/// 1 - (1 - (1-delta)^{N-1} delta)^{n-1}.
inline double spike_row_event_prob(double delta, std::size_t N, std::size_t n) {
    if (!(delta >= 0.0 && delta <= 1.0)) throw std::invalid_argument("spike_row_event_prob: delta outside [0,1]");
    if (N == 0 || n == 0) throw std::invalid_argument("spike_row_event_prob: N, n must be >= 1");
    if (delta == 0.0 || n == 1) return 0.0;
    const double per_column = delta == 1.0 ? (N == 1 ? 1.0 : 0.0)
                                           : delta * std::exp(static_cast<double>(N - 1) * std::log1p(-delta));
    if (per_column >= 1.0) return 1.0;
    return -std::expm1(static_cast<double>(n - 1) * std::log1p(-per_column));
}

/// Smallest delta for which spike_row_event_prob(delta, N, n) >= target, by
/// bisection over (0, 1/N]. The per-row probability increases in delta on
/// that interval.
inline double min_delta_for_row_event(std::size_t N, std::size_t n, double target) {
    double lo = 0.0;
    double hi = 1.0 / static_cast<double>(N);
    if (spike_row_event_prob(hi, N, n) < target)
        throw GuardError("min_delta_for_row_event: target probability unreachable for these N, n");
    for (int it = 0; it < 200; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (spike_row_event_prob(mid, N, n) >= target) hi = mid;
        else lo = mid;
    }
    return hi;
}

struct PerturbationEvent {
    bool holds = false;
    std::vector<std::size_t> missing_rows;
};

namespace detail {

// rows_covered[i] set when some column j >= 1 has its only spike in row i.
inline PerturbationEvent event_from_column_counts(std::size_t N, const std::vector<std::vector<std::size_t>>& spikes_by_col) {
    std::vector<bool> covered(N, false);
    for (std::size_t j = 1; j < spikes_by_col.size(); ++j) {
        if (spikes_by_col[j].size() == 1) covered[spikes_by_col[j].front()] = true;
    }
    PerturbationEvent ev;
    for (std::size_t i = 0; i < N; ++i)
        if (!covered[i]) ev.missing_rows.push_back(i);
    ev.holds = ev.missing_rows.empty();
    return ev;
}

}  // namespace detail

/// Every row i owns some column j >= 2 (0-based j >= 1) whose only spike is
/// in row i.
inline PerturbationEvent perturbation_event_check(const SpikyTrace& trace) {
    const std::size_t N = trace.eta.rows();
    const std::size_t n = trace.eta.cols();
    if (n < 2) throw std::invalid_argument("perturbation_event_check: requires n >= 2");
    std::vector<std::vector<std::size_t>> spikes(n);
    for (std::size_t i = 0; i < N; ++i)
        for (std::size_t j = 0; j < n; ++j)
            if (trace.eta(i, j) != 0.0) spikes[j].push_back(i);
    return detail::event_from_column_counts(N, spikes);
}

/// Draws only the selector matrix eta (N x n, Bernoulli(delta) entries) by
/// geometric skipping over the column-major positions, and evaluates the
/// perturbation event on it. Equivalent in law to drawing every entry.
inline PerturbationEvent simulate_perturbation_event(double delta, std::size_t N, std::size_t n, RngStream& rng) {
    std::vector<std::vector<std::size_t>> spikes(n);
    const std::uint64_t total = static_cast<std::uint64_t>(N) * n;
    std::uint64_t pos = 0;
    while (true) {
        const std::uint64_t skip = rng.geometric_skip(delta);
        if (skip >= total - pos) break;
        pos += skip;
        spikes[pos / N].push_back(pos % N);
        ++pos;
        if (pos >= total) break;
    }
    return detail::event_from_column_counts(N, spikes);
}

}  // namespace srl
