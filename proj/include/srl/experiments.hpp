#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <variant>
#include <vector>

#include "srl/conditions.hpp"
#include "srl/core.hpp"
#include "srl/ensembles.hpp"
#include "srl/errors.hpp"
#include "srl/parallel.hpp"
#include "srl/rng.hpp"
#include "srl/solvers.hpp"

namespace srl {

using FieldValue = std::variant<bool, std::int64_t, double, std::string>;
using Fields = std::vector<std::pair<std::string, FieldValue>>;

/// One experiment outcome. Field order is part of the record.
struct TrialRecord {
    std::string experiment;
    std::uint64_t seed = 0;
    Fields params;
    Fields outcome;
};

/// Uniform random support of size s with Gaussian coefficients, scaled to unit
/// l2 norm. s == 0 gives the zero vector.
inline Vector random_sparse_signal(std::size_t n, std::size_t s, RngStream& rng) {
    if (s > n) throw std::invalid_argument("random_sparse_signal: s exceeds n");
    Vector x(n, 0.0);
    if (s == 0) return x;
    const IndexSet S = random_support(n, s, rng);
    double nn = 0.0;
    while (!(nn > 0.0)) {
        for (std::size_t i : S) x[i] = rng.gaussian();
        nn = norm(x, NormKind::L2);
    }
    for (double& v : x) v /= nn;
    return x;
}

// ---------------------------------------------------------------------------
// Basis pursuit phase diagram
// ---------------------------------------------------------------------------

struct PhaseTable {
    EnsembleSpec ensemble;
    std::size_t n = 0;
    std::size_t trials = 0;
    std::uint64_t master_seed = 0;
    std::vector<std::size_t> N_values;
    std::vector<std::size_t> s_values;
    std::vector<std::vector<std::size_t>> successes;  // [N index][s index]

    double rate(std::size_t iN, std::size_t is) const {
        return trials == 0 ? 0.0 : static_cast<double>(successes[iN][is]) / static_cast<double>(trials);
    }
};

/// Per cell (N, s) and trial: draw Gamma (N x n) and a random s-sparse unit
/// signal from the trial stream, run basis pursuit, count exact recoveries.
inline PhaseTable phase_diagram(const EnsembleSpec& spec, std::size_t n, const std::vector<std::size_t>& N_list,
                                const std::vector<std::size_t>& s_list, std::size_t trials, std::uint64_t master_seed,
                                const RecoveryOptions& opt = {}) {
    if (n == 0) throw std::invalid_argument("phase_diagram: n must be >= 1");
    for (std::size_t s : s_list)
        if (s > n) throw std::invalid_argument("phase_diagram: s exceeds n");
    for (std::size_t N : N_list)
        if (N == 0) throw std::invalid_argument("phase_diagram: N must be >= 1");
    PhaseTable table;
    table.ensemble = spec;
    table.n = n;
    table.trials = trials;
    table.master_seed = master_seed;
    table.N_values = N_list;
    table.s_values = s_list;
    const std::size_t cells = N_list.size() * s_list.size();
    std::vector<char> ok(cells * trials, 0);
    parallel_for(cells * trials, [&](std::size_t k) {
        const std::size_t cell = k / trials;
        const std::size_t trial = k % trials;
        const std::size_t N = N_list[cell / s_list.size()];
        const std::size_t s = s_list[cell % s_list.size()];
        RngStream rng = derive_stream(master_seed, stream_index(cell, trial));
        const DenseMatrix gamma = generate_matrix(spec, N, n, rng).gamma;
        const Vector x0 = random_sparse_signal(n, s, rng);
        const auto r = basis_pursuit(gamma, gamma.apply(x0), x0, opt);
        ok[k] = r.recovered ? 1 : 0;
    });
    table.successes.assign(N_list.size(), std::vector<std::size_t>(s_list.size(), 0));
    for (std::size_t k = 0; k < ok.size(); ++k) {
        const std::size_t cell = k / trials;
        table.successes[cell / s_list.size()][cell % s_list.size()] += ok[k];
    }
    return table;
}

// ---------------------------------------------------------------------------
// Spiky counterexample
// ---------------------------------------------------------------------------

struct CounterexampleTrial {
    double competitor = std::numeric_limits<double>::infinity();
    bool failure = false;              // competitor <= 1 + feas_tol
    bool perturbation_event = false;   // every row owns a private spike
    double column_norm = 0.0;          // ||Gamma e_1||_2
    bool column_norm_leg = false;      // ||Gamma e_1||_2 <= 1 + tol
    bool cone_intersects = false;      // kernel_cone_intersect({1}, 1)
    bool column_vertex = true;         // column 1 is a vertex of Gamma B_1^n
    bool consistent = true;            // failure implies both checks above agree
};

struct CounterexampleResult {
    SpikyParams params;
    std::vector<ConstraintDiagnostic> diagnostics;
    std::size_t trials = 0;
    double failure_freq = 0.0;
    double perturbation_freq = 0.0;
    double column_norm_freq = 0.0;
    std::size_t inconsistencies = 0;
    std::vector<CounterexampleTrial> per_trial;
};

struct CounterexampleOptions {
    std::optional<SpikyParams> params_override;  // e.g. delta = 0 for the Rademacher limit
    SimplexOptions lp;
    double norm_tol = 1e-9;
    bool cross_check = true;  // cone and vertex checks on every trial
};

/// Per trial: spiky Gamma with trace; failure of exact reconstruction of
/// order 1 at e_1 iff the competitor LP reaches l1 norm <= 1.
inline CounterexampleResult counterexample_experiment(std::size_t n, std::size_t N, std::size_t trials,
                                                      std::uint64_t master_seed, const CounterexampleOptions& opt = {}) {
    if (trials == 0) throw std::invalid_argument("counterexample_experiment: trials must be >= 1");
    CounterexampleResult out;
    if (opt.params_override) {
        out.params = *opt.params_override;
        if (out.params.n != n || out.params.N != N)
            throw std::invalid_argument("counterexample_experiment: override (n, N) mismatch");
    } else {
        const auto derived = derive_spiky_params(n, N);
        out.params = derived.params;
        out.diagnostics = derived.diagnostics;
    }
    out.trials = trials;
    out.per_trial.resize(trials);
    const EnsembleSpec spec = EnsembleSpec::spiky_law(out.params);
    parallel_for(trials, [&](std::size_t t) {
        RngStream rng = derive_stream(master_seed, stream_index(0, t));
        const auto gm = generate_matrix(spec, N, n, rng, true);
        CounterexampleTrial rec;
        const auto comp = competitor_norm(gm.gamma, basis_vector(n, 0), IndexSet{0}, opt.lp);
        rec.competitor = comp.norm;
        rec.failure = comp.norm <= 1.0 + opt.lp.feas_tol;
        rec.perturbation_event = perturbation_event_check(*gm.trace).holds;
        rec.column_norm = std::sqrt(gm.gamma.column_norm_sq(0));
        rec.column_norm_leg = rec.column_norm <= 1.0 + opt.norm_tol;
        if (opt.cross_check) {
            rec.cone_intersects = kernel_cone_intersect(gm.gamma, IndexSet{0}, 1.0, opt.lp).intersects;
            rec.column_vertex = column_is_vertex(gm.gamma, 0, opt.lp);
            if (rec.failure) rec.consistent = rec.cone_intersects && !rec.column_vertex;
        }
        out.per_trial[t] = rec;
    });
    std::size_t fail = 0, pert = 0, leg = 0;
    for (const auto& r : out.per_trial) {
        fail += r.failure;
        pert += r.perturbation_event;
        leg += r.column_norm_leg;
        out.inconsistencies += !r.consistent;
    }
    const double T = static_cast<double>(trials);
    out.failure_freq = static_cast<double>(fail) / T;
    out.perturbation_freq = static_cast<double>(pert) / T;
    out.column_norm_freq = static_cast<double>(leg) / T;
    return out;
}

// ---------------------------------------------------------------------------
// l0 recovery
// ---------------------------------------------------------------------------

struct L0ExperimentResult {
    std::size_t trials = 0;
    std::size_t successes = 0;
    double success_rate = 0.0;
};

/// Per trial: random s-sparse x0; success iff l0_min returns a unique
/// solution equal to x0 within rec_tol. Supports are searched up to
/// min(s, N, 12); an empty search counts as a failure.
inline L0ExperimentResult l0_experiment(const EnsembleSpec& spec, std::size_t n, std::size_t s, std::size_t N,
                                        std::size_t trials, std::uint64_t master_seed,
                                        double rec_tol = kDefaultRecTol) {
    if (s > 6) throw GuardError("l0_experiment: s = " + std::to_string(s) + " exceeds the desk-scale guard of 6");
    if (s > n) throw std::invalid_argument("l0_experiment: s exceeds n");
    const std::size_t max_support = std::min({s, N, std::size_t{12}});
    std::vector<char> ok(trials, 0);
    parallel_for(trials, [&](std::size_t t) {
        RngStream rng = derive_stream(master_seed, stream_index(0, t));
        const DenseMatrix gamma = generate_matrix(spec, N, n, rng).gamma;
        const Vector x0 = random_sparse_signal(n, s, rng);
        L0Result r;
        try {
            r = l0_min(gamma, gamma.apply(x0), max_support);
        } catch (const GuardError&) {
            return;
        }
        ok[t] = r.unique && norm(subtract(r.solutions.front(), x0), NormKind::Linf) <= rec_tol;
    });
    L0ExperimentResult out;
    out.trials = trials;
    for (char c : ok) out.successes += static_cast<std::size_t>(c);
    out.success_rate = trials ? static_cast<double>(out.successes) / static_cast<double>(trials) : 0.0;
    return out;
}

// ---------------------------------------------------------------------------
// Moment growth of normalised sums
// ---------------------------------------------------------------------------

/// Summand law: a coordinate draw x, or x^2 - 1 when square_centered is set.
struct MomentSource {
    EnsembleSpec spec;
    bool square_centered = false;
};

/// Moment growth exponent alpha: ||z||_{L_p} <= kappa p^alpha.
inline double moment_alpha(const MomentSource& src) {
    switch (src.spec.kind) {
        case EnsembleKind::Gaussian:
        case EnsembleKind::Rademacher: return src.square_centered ? 1.0 : 0.5;
        case EnsembleKind::SymExp: return src.square_centered ? 2.0 : 1.0;
        case EnsembleKind::Constant: return 0.5;
        case EnsembleKind::Spiky: break;
    }
    throw GuardError("moment_alpha: the spiky law has no fixed moment growth exponent");
}

/// (E|g|^p)^{1/p} for a standard Gaussian g.
inline double gaussian_abs_moment_root(double p) {
    const double log_m = 0.5 * p * std::log(2.0) + std::lgamma(0.5 * (p + 1.0)) - 0.5 * std::log(M_PI);
    return std::exp(log_m / p);
}

struct MomentRow {
    double p = 0.0;
    double lhs = 0.0;        // Monte Carlo L_p norm of N^{-1/2} sum z_i
    double reference = 0.0;  // ||z||_2 (E|g|^p)^{1/p}
    double ratio = 0.0;      // lhs / sqrt(p)
};

inline constexpr std::size_t kMomentChunk = 1024;

inline std::vector<MomentRow> moment_growth_experiment(const MomentSource& src, const std::vector<double>& p_list,
                                                       std::size_t N, std::size_t mc_samples,
                                                       std::uint64_t master_seed) {
    if (N == 0 || mc_samples == 0) throw std::invalid_argument("moment_growth_experiment: N, mc_samples must be >= 1");
    const double alpha = moment_alpha(src);
    const double expo = std::max(2.0 * alpha - 1.0, 1.0);
    for (double p : p_list) {
        if (!(p >= 1.0)) throw std::invalid_argument("moment_growth_experiment: p must be >= 1");
        if (static_cast<double>(N) < std::pow(p, expo))
            throw GuardError("moment_growth_experiment: N = " + std::to_string(N) + " < p^max(2alpha-1,1) for p = " +
                             std::to_string(p));
    }
    const std::size_t chunks = (mc_samples + kMomentChunk - 1) / kMomentChunk;
    std::vector<std::vector<double>> partial(chunks, std::vector<double>(p_list.size(), 0.0));
    const double scale = 1.0 / std::sqrt(static_cast<double>(N));
    parallel_for(chunks, [&](std::size_t c) {
        RngStream rng = derive_stream(master_seed, stream_index(0, c));
        const std::size_t begin = c * kMomentChunk;
        const std::size_t end = std::min(mc_samples, begin + kMomentChunk);
        for (std::size_t k = begin; k < end; ++k) {
            double sum = 0.0;
            for (std::size_t i = 0; i < N; ++i) {
                const double x = sample_scalar(src.spec, rng);
                sum += src.square_centered ? x * x - 1.0 : x;
            }
            const double a = std::abs(sum * scale);
            for (std::size_t q = 0; q < p_list.size(); ++q) partial[c][q] += std::pow(a, p_list[q]);
        }
    });
    // ||z||_2 of the summand
    double z_l2 = 1.0;
    if (src.square_centered) {
        switch (src.spec.kind) {
            case EnsembleKind::Gaussian: z_l2 = std::sqrt(2.0); break;
            case EnsembleKind::Rademacher:
            case EnsembleKind::Constant: z_l2 = 0.0; break;
            case EnsembleKind::SymExp: z_l2 = std::sqrt(5.0); break;  // E x^4 = 6 for unit-variance Laplace
            case EnsembleKind::Spiky: break;
        }
    } else if (src.spec.kind == EnsembleKind::Constant) {
        z_l2 = 1.0;
    }
    std::vector<MomentRow> rows;
    for (std::size_t q = 0; q < p_list.size(); ++q) {
        double acc = 0.0;
        for (std::size_t c = 0; c < chunks; ++c) acc += partial[c][q];
        MomentRow row;
        row.p = p_list[q];
        row.lhs = std::pow(acc / static_cast<double>(mc_samples), 1.0 / row.p);
        row.reference = z_l2 * gaussian_abs_moment_root(row.p);
        row.ratio = row.lhs / std::sqrt(row.p);
        rows.push_back(row);
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Noisy LASSO
// ---------------------------------------------------------------------------

struct NoisyModel {
    double sigma = 0.0;
    double t = 1.0;
    std::optional<double> lambda_override;

    /// lambda = 4 sigma sqrt((t^2 + ln n) / N) unless overridden.
    double lambda(std::size_t n, std::size_t N) const {
        if (lambda_override) return *lambda_override;
        return 4.0 * sigma * std::sqrt((t * t + std::log(static_cast<double>(n))) / static_cast<double>(N));
    }
};

struct NoisyLassoTrial {
    double lambda = 0.0;
    double phi3_upper = std::numeric_limits<double>::quiet_NaN();
    double phi3_lower = std::numeric_limits<double>::quiet_NaN();
    double prediction_error = 0.0;  // ||Gamma (xhat - x0)||_2^2
    double prediction_bound = 0.0;
    double l1_error = 0.0;
    double l1_bound = 0.0;
    bool prediction_violated = false;
    bool l1_violated = false;
    std::size_t iterations = 0;
};

struct NoisyLassoResult {
    double bound_violation_freq = 0.0;  // at least one of the two bounds fails
    double prediction_violation_freq = 0.0;
    double l1_bound_violation_freq = 0.0;
    double nominal_failure_prob = 0.0;  // 2 exp(-t^2/2)
    std::vector<NoisyLassoTrial> per_trial;
};

struct NoisyLassoOptions {
    LassoOptions lasso;
    CompatibilityOptions fw;
    std::optional<DenseMatrix> fixed_gamma;  // normalised Gamma reused in every trial
};

/// Per trial: Gamma, s-sparse unit x0, z = X x0 + g with g ~ N(0, sigma^2),
/// X = sqrt(N) Gamma; LASSO with the lambda rule. Bounds use the Frank-Wolfe
/// upper value of phi(3, S0), the stricter side.
inline NoisyLassoResult noisy_lasso_experiment(const EnsembleSpec& spec, std::size_t n, std::size_t N, std::size_t s,
                                               const NoisyModel& model, std::size_t trials, std::uint64_t master_seed,
                                               const NoisyLassoOptions& opt = {}) {
    if (!(model.sigma >= 0.0) || !(model.t > 0.0))
        throw std::invalid_argument("noisy_lasso_experiment: requires sigma >= 0 and t > 0");
    if (model.lambda_override && !(*model.lambda_override >= 0.0))
        throw std::invalid_argument("noisy_lasso_experiment: lambda must be >= 0");
    if (s > 10) throw GuardError("noisy_lasso_experiment: s exceeds the compatibility guard of 10");
    if (opt.fixed_gamma && (opt.fixed_gamma->rows() != N || opt.fixed_gamma->cols() != n))
        throw std::invalid_argument("noisy_lasso_experiment: fixed Gamma has the wrong shape");
    NoisyLassoResult out;
    out.per_trial.resize(trials);
    out.nominal_failure_prob = 2.0 * std::exp(-model.t * model.t / 2.0);
    const double lambda = model.lambda(n, N);
    const double root = std::sqrt((model.t * model.t + std::log(static_cast<double>(n))) / static_cast<double>(N));
    const double sqrtN = std::sqrt(static_cast<double>(N));
    parallel_for(trials, [&](std::size_t k) {
        RngStream rng = derive_stream(master_seed, stream_index(0, k));
        const DenseMatrix gamma = opt.fixed_gamma ? *opt.fixed_gamma : generate_matrix(spec, N, n, rng).gamma;
        const Vector x0 = random_sparse_signal(n, s, rng);
        DenseMatrix X = gamma;
        X *= sqrtN;
        Vector z = X.apply(x0);
        for (double& v : z) v += model.sigma * rng.gaussian();
        const auto r = lasso(X, z, lambda, x0, opt.lasso);
        NoisyLassoTrial rec;
        rec.lambda = lambda;
        rec.iterations = r.iterations;
        const Vector diff = subtract(r.xhat, x0);
        const Vector gd = gamma.apply(diff);
        rec.prediction_error = dot(gd, gd);
        rec.l1_error = norm(diff, NormKind::L1);
        if (s > 0) {
            const auto phi = compatibility_phi(gamma, 3.0, support_of(x0), opt.fw);
            rec.phi3_upper = phi.phi_upper;
            rec.phi3_lower = phi.phi_lower;
            const double phi2 = phi.phi_upper * phi.phi_upper;
            const double sd = static_cast<double>(s);
            rec.prediction_bound = 64.0 * model.sigma * model.sigma * sd * root * root / phi2;
            rec.l1_bound = 64.0 * model.sigma * sd / phi2 * root;
        }
        const double slack = 1e-9;
        rec.prediction_violated = rec.prediction_error > rec.prediction_bound + slack;
        rec.l1_violated = rec.l1_error > rec.l1_bound + slack;
        out.per_trial[k] = rec;
    });
    std::size_t any = 0, pred = 0, l1 = 0;
    for (const auto& r : out.per_trial) {
        any += r.prediction_violated || r.l1_violated;
        pred += r.prediction_violated;
        l1 += r.l1_violated;
    }
    const double T = trials ? static_cast<double>(trials) : 1.0;
    out.bound_violation_freq = static_cast<double>(any) / T;
    out.prediction_violation_freq = static_cast<double>(pred) / T;
    out.l1_bound_violation_freq = static_cast<double>(l1) / T;
    return out;
}

// ---------------------------------------------------------------------------
// Records
// ---------------------------------------------------------------------------

inline std::vector<TrialRecord> to_records(const CounterexampleResult& r, std::size_t n, std::size_t N,
                                           std::uint64_t seed) {
    std::vector<TrialRecord> out;
    for (std::size_t t = 0; t < r.per_trial.size(); ++t) {
        const auto& p = r.per_trial[t];
        TrialRecord rec{"counterexample", seed,
                        {{"n", std::int64_t(n)}, {"N", std::int64_t(N)}, {"trial", std::int64_t(t)}},
                        {{"competitor_norm", p.competitor},
                         {"failure", p.failure},
                         {"perturbation_event", p.perturbation_event},
                         {"column_norm", p.column_norm},
                         {"column_norm_leg", p.column_norm_leg},
                         {"cone_intersects", p.cone_intersects},
                         {"column_vertex", p.column_vertex},
                         {"consistent", p.consistent}}};
        out.push_back(std::move(rec));
    }
    return out;
}

inline std::vector<TrialRecord> to_records(const NoisyLassoResult& r, std::size_t n, std::size_t N, std::size_t s,
                                           std::uint64_t seed) {
    std::vector<TrialRecord> out;
    for (std::size_t t = 0; t < r.per_trial.size(); ++t) {
        const auto& p = r.per_trial[t];
        TrialRecord rec{"noisy-lasso", seed,
                        {{"n", std::int64_t(n)}, {"N", std::int64_t(N)}, {"s", std::int64_t(s)},
                         {"trial", std::int64_t(t)}},
                        {{"lambda", p.lambda},
                         {"phi3_upper", p.phi3_upper},
                         {"phi3_lower", p.phi3_lower},
                         {"prediction_error", p.prediction_error},
                         {"prediction_bound", p.prediction_bound},
                         {"l1_error", p.l1_error},
                         {"l1_bound", p.l1_bound},
                         {"prediction_violated", p.prediction_violated},
                         {"l1_violated", p.l1_violated},
                         {"iterations", std::int64_t(p.iterations)}}};
        out.push_back(std::move(rec));
    }
    return out;
}

}  // namespace srl
