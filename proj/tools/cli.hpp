#pragma once

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdint>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "srl/srl.hpp"

namespace srl::cli {

using nlohmann::ordered_json;

enum ExitCode : int { kOk = 0, kUsage = 1, kNumerical = 2 };

struct UsageError : std::invalid_argument {
    using std::invalid_argument::invalid_argument;
};

struct Common {
    std::uint64_t seed = 0;
    std::size_t n = 0;
    std::size_t N = 0;
    std::size_t s = 0;
    std::vector<std::size_t> N_list;
    std::vector<std::size_t> s_list;
    std::size_t trials = 0;
    std::string ensemble = "gaussian";
    std::string out;
    std::string format;
    std::optional<double> delta;
    std::optional<double> p;
};

inline ordered_json to_json(const SpikyParams& sp) {
    return {{"n", sp.n}, {"N", sp.N}, {"delta", sp.delta}, {"p", sp.p}, {"R", sp.R}, {"l2_norm_z", sp.l2_norm_z}};
}

inline ordered_json to_json(const std::vector<ConstraintDiagnostic>& diags) {
    ordered_json arr = ordered_json::array();
    for (const auto& d : diags)
        arr.push_back({{"constraint", d.constraint}, {"value", d.value}, {"bound", d.bound}, {"satisfied", d.satisfied}});
    return arr;
}

inline ordered_json to_json(const FieldValue& f) {
    return std::visit([](const auto& v) { return ordered_json(v); }, f);
}

inline ordered_json to_json(const std::vector<TrialRecord>& recs) {
    ordered_json arr = ordered_json::array();
    for (const auto& r : recs) {
        ordered_json params = ordered_json::object(), outcome = ordered_json::object();
        for (const auto& [k, v] : r.params) params[k] = to_json(v);
        for (const auto& [k, v] : r.outcome) outcome[k] = to_json(v);
        arr.push_back({{"experiment", r.experiment}, {"seed", r.seed}, {"params", params}, {"outcome", outcome}});
    }
    return arr;
}

inline ordered_json to_json(const IndexSet& s) {
    ordered_json arr = ordered_json::array();
    for (auto i : s) arr.push_back(i);
    return arr;
}

// Resolves the coordinate law. Spiky needs (delta, p) or, when a single N is
// known, the derived parameters.
inline EnsembleSpec resolve_ensemble(const Common& c, std::size_t N_for_derivation, ordered_json& config) {
    if (c.ensemble == "gaussian") return EnsembleSpec::gaussian();
    if (c.ensemble == "rademacher") return EnsembleSpec::rademacher();
    if (c.ensemble == "symexp") return EnsembleSpec::symexp();
    if (c.ensemble != "spiky") throw UsageError("--ensemble: unknown law '" + c.ensemble + "'");
    SpikyParams sp;
    if (c.delta || c.p) {
        if (!c.delta || !c.p) throw UsageError("--delta and --p must be given together");
        sp = make_spiky_params(c.n, N_for_derivation, *c.delta, *c.p);
    } else {
        if (N_for_derivation == 0)
            throw UsageError("spiky ensemble over several N values requires --delta and --p");
        const auto d = derive_spiky_params(c.n, N_for_derivation);
        sp = d.params;
        config["diagnostics"] = to_json(d.diagnostics);
    }
    config["spiky"] = to_json(sp);
    return EnsembleSpec::spiky_law(sp);
}

inline void emit(const Common& c, const std::string& content, std::ostream& out) {
    if (c.out.empty()) out << content;
    else write_atomic(c.out, content);
}

inline std::string dump(const ordered_json& j) { return j.dump(2) + "\n"; }

inline ordered_json base_config(const std::string& command, const Common& c) {
    ordered_json cfg;
    cfg["command"] = command;
    cfg["seed"] = c.seed;
    cfg["ensemble"] = c.ensemble;
    return cfg;
}

inline void check_format(const Common& c, std::initializer_list<const char*> allowed) {
    for (const char* a : allowed)
        if (c.format == a) return;
    throw UsageError("--format '" + c.format + "' not supported by this command");
}

inline void cmd_gen(const Common& c, std::ostream& out) {
    check_format(c, {"csv", "json"});
    ordered_json cfg = base_config("gen", c);
    cfg["n"] = c.n;
    cfg["N"] = c.N;
    const EnsembleSpec spec = resolve_ensemble(c, c.N, cfg);
    RngStream rng = derive_stream(c.seed, 0);
    const DenseMatrix g = generate_matrix(spec, c.N, c.n, rng).gamma;
    if (c.format == "csv") return emit(c, matrix_csv(g), out);
    ordered_json rows = ordered_json::array();
    for (std::size_t i = 0; i < g.rows(); ++i) {
        ordered_json r = ordered_json::array();
        for (std::size_t j = 0; j < g.cols(); ++j) r.push_back(g(i, j));
        rows.push_back(r);
    }
    emit(c, dump({{"config", cfg}, {"gamma", rows}}), out);
}

inline void cmd_phase(const Common& c, std::ostream& out) {
    check_format(c, {"csv", "json"});
    ordered_json cfg = base_config("phase", c);
    cfg["n"] = c.n;
    cfg["N_list"] = c.N_list;
    cfg["s_list"] = c.s_list;
    cfg["trials"] = c.trials;
    const EnsembleSpec spec = resolve_ensemble(c, c.N_list.size() == 1 ? c.N_list.front() : 0, cfg);
    const PhaseTable t = phase_diagram(spec, c.n, c.N_list, c.s_list, c.trials, c.seed);
    if (c.format == "csv") return emit(c, phase_table_csv(t), out);
    ordered_json cells = ordered_json::array();
    for (std::size_t a = 0; a < t.N_values.size(); ++a)
        for (std::size_t b = 0; b < t.s_values.size(); ++b)
            cells.push_back({{"N", t.N_values[a]}, {"s", t.s_values[b]}, {"successes", t.successes[a][b]},
                             {"rate", t.rate(a, b)}});
    emit(c, dump({{"config", cfg}, {"cells", cells}}), out);
}

inline void cmd_l0_phase(const Common& c, std::ostream& out) {
    check_format(c, {"csv", "json"});
    ordered_json cfg = base_config("l0-phase", c);
    cfg["n"] = c.n;
    cfg["N_list"] = c.N_list;
    cfg["s_list"] = c.s_list;
    cfg["trials"] = c.trials;
    const EnsembleSpec spec = resolve_ensemble(c, c.N_list.size() == 1 ? c.N_list.front() : 0, cfg);
    CsvWriter w({"ensemble", "n", "N", "s", "trials", "successes", "rate", "seed"});
    ordered_json cells = ordered_json::array();
    std::size_t cell = 0;
    for (std::size_t N : c.N_list)
        for (std::size_t s : c.s_list) {
            // one seed per cell keeps cells independent of list order
            const std::uint64_t cell_seed = derive_stream(c.seed, stream_index(cell++, 0)).next();
            const auto r = l0_experiment(spec, c.n, s, N, c.trials, cell_seed);
            w.row({c.ensemble, std::to_string(c.n), std::to_string(N), std::to_string(s), std::to_string(c.trials),
                   std::to_string(r.successes), format_real(r.success_rate), std::to_string(c.seed)});
            cells.push_back({{"N", N}, {"s", s}, {"successes", r.successes}, {"rate", r.success_rate}});
        }
    if (c.format == "csv") return emit(c, w.str(), out);
    emit(c, dump({{"config", cfg}, {"cells", cells}}), out);
}

inline void cmd_counterexample(const Common& c, std::ostream& out) {
    check_format(c, {"json", "csv"});
    ordered_json cfg = base_config("counterexample", c);
    cfg["ensemble"] = "spiky";
    cfg["n"] = c.n;
    cfg["N"] = c.N;
    cfg["trials"] = c.trials;
    CounterexampleOptions opt;
    if (c.delta || c.p) {
        if (!c.delta || !c.p) throw UsageError("--delta and --p must be given together");
        opt.params_override = make_spiky_params(c.n, c.N, *c.delta, *c.p);
    }
    const auto r = counterexample_experiment(c.n, c.N, c.trials, c.seed, opt);
    cfg["spiky"] = to_json(r.params);
    if (!r.diagnostics.empty()) cfg["diagnostics"] = to_json(r.diagnostics);
    const auto recs = to_records(r, c.n, c.N, c.seed);
    if (c.format == "csv") return emit(c, records_csv(recs), out);
    emit(c,
         dump({{"config", cfg},
               {"failure_freq", r.failure_freq},
               {"perturbation_freq", r.perturbation_freq},
               {"column_norm_freq", r.column_norm_freq},
               {"inconsistencies", r.inconsistencies},
               {"per_trial", to_json(recs)}}),
         out);
}

struct ConditionFlags {
    double u = 0.5;
    double L = 3.0;
    double c0 = 3.0;
    std::size_t directions = 200;
};

inline void cmd_conditions(const Common& c, const ConditionFlags& f, std::ostream& out) {
    check_format(c, {"json"});
    ordered_json cfg = base_config("conditions", c);
    cfg["n"] = c.n;
    cfg["N"] = c.N;
    cfg["s"] = c.s;
    cfg["u"] = f.u;
    cfg["L"] = f.L;
    cfg["c0"] = f.c0;
    cfg["directions"] = f.directions;
    const EnsembleSpec spec = resolve_ensemble(c, c.N, cfg);
    RngStream rng = derive_stream(c.seed, 0);
    const DenseMatrix g = generate_matrix(spec, c.N, c.n, rng).gamma;
    ConditionReport rep = evaluate_conditions(g, c.s);

    IndexSet S = first_combination(c.s);
    rep.phi.push_back({f.L, S, compatibility_phi(g, f.L, S)});
    if (2 * c.s <= c.n) {
        RngStream krng = derive_stream(c.seed, 1);
        rep.kappa.push_back({c.s, c.s, f.c0, rec_kappa_upper(g, c.s, c.s, f.c0, 20, krng)});
    }
    RngStream brng = derive_stream(c.seed, 2);
    rep.beta.push_back({f.u, c.s, small_ball_beta(spec, c.n, c.s, f.u, f.directions, 1000, brng)});

    ordered_json j;
    j["config"] = cfg;
    j["order"] = rep.order;
    j["restricted_sigma_min"] = rep.restricted_sigma_min;
    j["restricted_sigma_max"] = rep.restricted_sigma_max;
    j["rip_delta"] = rep.rip_delta;
    j["nsp"] = {{"holds", rep.nsp_holds}, {"worst_ratio", rep.nsp_worst_ratio}, {"margin", rep.nsp_margin}};
    j["certificate"] = {{"c0", rep.certificate.c0}, {"c1", rep.certificate.c1}, {"s1", rep.certificate.s1}};
    ordered_json phis = ordered_json::array();
    for (const auto& q : rep.phi)
        phis.push_back({{"L", q.L},
                        {"S", to_json(q.S)},
                        {"phi_upper", q.result.phi_upper},
                        {"phi_lower", q.result.phi_lower},
                        {"gap", q.result.gap},
                        {"converged", q.result.converged}});
    j["phi"] = phis;
    ordered_json kappas = ordered_json::array();
    for (const auto& q : rep.kappa)
        kappas.push_back({{"s", q.s},
                          {"m", q.m},
                          {"c0", q.c0},
                          {"kappa_upper", q.result.kappa_upper},
                          {"exact", q.result.exact},
                          {"restarts", q.result.restarts}});
    j["kappa"] = kappas;
    ordered_json betas = ordered_json::array();
    for (const auto& q : rep.beta)
        betas.push_back({{"u", q.u},
                         {"s", q.s},
                         {"beta_hat", q.result.beta_hat},
                         {"beta_mean", q.result.beta_mean},
                         {"directions", q.result.directions},
                         {"samples", q.result.samples},
                         {"exact", q.result.exact}});
    j["beta"] = betas;
    emit(c, dump(j), out);
}

inline void cmd_noisy_lasso(const Common& c, const NoisyModel& model, std::ostream& out) {
    check_format(c, {"json", "csv"});
    ordered_json cfg = base_config("noisy-lasso", c);
    cfg["n"] = c.n;
    cfg["N"] = c.N;
    cfg["s"] = c.s;
    cfg["trials"] = c.trials;
    cfg["sigma"] = model.sigma;
    cfg["t"] = model.t;
    cfg["lambda"] = model.lambda(c.n, c.N);
    cfg["lambda_rule"] = model.lambda_override ? "fixed" : "4*sigma*sqrt((t^2+ln n)/N)";
    const EnsembleSpec spec = resolve_ensemble(c, c.N, cfg);
    const auto r = noisy_lasso_experiment(spec, c.n, c.N, c.s, model, c.trials, c.seed);
    const auto recs = to_records(r, c.n, c.N, c.s, c.seed);
    if (c.format == "csv") return emit(c, records_csv(recs), out);
    emit(c,
         dump({{"config", cfg},
               {"bound_violation_freq", r.bound_violation_freq},
               {"prediction_violation_freq", r.prediction_violation_freq},
               {"l1_bound_violation_freq", r.l1_bound_violation_freq},
               {"nominal_failure_prob", r.nominal_failure_prob},
               {"per_trial", to_json(recs)}}),
         out);
}

inline void cmd_moments(const Common& c, const std::vector<double>& p_list, bool square_centered, std::ostream& out) {
    check_format(c, {"csv", "json"});
    ordered_json cfg = base_config("moments", c);
    cfg["N"] = c.N;
    cfg["p_list"] = p_list;
    cfg["mc_samples"] = c.trials;
    cfg["square_centered"] = square_centered;
    const EnsembleSpec spec = resolve_ensemble(c, c.N, cfg);
    const auto rows = moment_growth_experiment({spec, square_centered}, p_list, c.N, c.trials, c.seed);
    CsvWriter w({"ensemble", "N", "p", "lhs", "reference", "lhs_over_sqrt_p", "mc_samples", "seed"});
    ordered_json arr = ordered_json::array();
    for (const auto& r : rows) {
        w.row({c.ensemble, std::to_string(c.N), format_real(r.p), format_real(r.lhs), format_real(r.reference),
               format_real(r.ratio), std::to_string(c.trials), std::to_string(c.seed)});
        arr.push_back({{"p", r.p}, {"lhs", r.lhs}, {"reference", r.reference}, {"lhs_over_sqrt_p", r.ratio}});
    }
    if (c.format == "csv") return emit(c, w.str(), out);
    emit(c, dump({{"config", cfg}, {"rows", arr}}), out);
}

/// Parses argv, runs one command, writes its output. Returns 0 on success,
/// 1 on usage errors, 2 on guard or numerical errors.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
    CLI::App app{"Sparse recovery experiments"};
    app.require_subcommand(1);
    Common c;
    ConditionFlags cf;
    NoisyModel model{0.1, 2.0, std::nullopt};
    std::optional<double> lambda;
    std::vector<double> p_list;
    bool square_centered = false;

    auto common = [&](CLI::App* sub) {
        sub->add_option("--seed", c.seed, "master seed")->required();
        sub->add_option("--ensemble", c.ensemble, "gaussian|rademacher|symexp|spiky")
            ->check(CLI::IsMember({"gaussian", "rademacher", "symexp", "spiky"}));
        sub->add_option("--out", c.out, "output path (stdout when omitted)");
        sub->add_option("--format", c.format, "csv|json")->check(CLI::IsMember({"csv", "json"}));
        sub->add_option("--delta", c.delta, "spiky selector probability");
        sub->add_option("--p", c.p, "spiky moment horizon");
    };

    auto* gen = app.add_subcommand("gen", "sample a measurement matrix");
    common(gen);
    gen->add_option("--n", c.n)->required()->check(CLI::PositiveNumber);
    gen->add_option("--N", c.N)->required()->check(CLI::PositiveNumber);

    auto* phase = app.add_subcommand("phase", "basis pursuit phase diagram");
    common(phase);
    phase->add_option("--n", c.n)->required()->check(CLI::PositiveNumber);
    phase->add_option("--N-list", c.N_list)->required()->delimiter(',');
    phase->add_option("--s-list", c.s_list)->required()->delimiter(',');
    phase->add_option("--trials", c.trials)->required();

    auto* l0 = app.add_subcommand("l0-phase", "l0 recovery phase diagram");
    common(l0);
    l0->add_option("--n", c.n)->required()->check(CLI::PositiveNumber);
    l0->add_option("--N-list", c.N_list)->required()->delimiter(',');
    l0->add_option("--s-list", c.s_list)->required()->delimiter(',');
    l0->add_option("--trials", c.trials)->required();

    auto* ce = app.add_subcommand("counterexample", "spiky ensemble failure experiment");
    common(ce);
    ce->add_option("--n", c.n)->required()->check(CLI::PositiveNumber);
    ce->add_option("--N", c.N)->required()->check(CLI::PositiveNumber);
    ce->add_option("--trials", c.trials)->required()->check(CLI::PositiveNumber);

    auto* cond = app.add_subcommand("conditions", "matrix condition report");
    common(cond);
    cond->add_option("--n", c.n)->required()->check(CLI::PositiveNumber);
    cond->add_option("--N", c.N)->required()->check(CLI::PositiveNumber);
    cond->add_option("--s", c.s)->required()->check(CLI::PositiveNumber);
    cond->add_option("--u", cf.u, "small-ball level");
    cond->add_option("--L", cf.L, "compatibility cone constant");
    cond->add_option("--c0", cf.c0, "restricted eigenvalue cone constant");
    cond->add_option("--directions", cf.directions, "small-ball directions (>= 100)");

    auto* nl = app.add_subcommand("noisy-lasso", "LASSO under Gaussian noise");
    common(nl);
    nl->add_option("--n", c.n)->required()->check(CLI::PositiveNumber);
    nl->add_option("--N", c.N)->required()->check(CLI::PositiveNumber);
    nl->add_option("--s", c.s)->required();
    nl->add_option("--trials", c.trials)->required();
    nl->add_option("--sigma", model.sigma);
    nl->add_option("--t", model.t);
    nl->add_option("--lambda", lambda, "fixed regularisation weight (overrides the rule)");

    auto* mom = app.add_subcommand("moments", "moment growth of normalised sums");
    common(mom);
    mom->add_option("--N", c.N)->required()->check(CLI::PositiveNumber);
    mom->add_option("--p-list", p_list)->required()->delimiter(',');
    mom->add_option("--trials", c.trials, "Monte Carlo sums")->required()->check(CLI::PositiveNumber);
    mom->add_flag("--square-centered", square_centered, "use x^2 - 1 as the summand");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        out << app.help();
        return kOk;
    } catch (const CLI::ParseError& e) {
        err << "usage error: " << e.what() << "\n";
        auto* sub = app.get_subcommands().empty() ? &app : app.get_subcommands().front();
        err << sub->help();
        return kUsage;
    }

    if (c.format.empty()) {
        const bool json_default = ce->parsed() || cond->parsed() || nl->parsed();
        c.format = json_default ? "json" : "csv";
    }

    try {
        if (gen->parsed()) cmd_gen(c, out);
        else if (phase->parsed()) cmd_phase(c, out);
        else if (l0->parsed()) cmd_l0_phase(c, out);
        else if (ce->parsed()) cmd_counterexample(c, out);
        else if (cond->parsed()) cmd_conditions(c, cf, out);
        else if (nl->parsed()) {
            model.lambda_override = lambda;
            cmd_noisy_lasso(c, model, out);
        } else if (mom->parsed()) cmd_moments(c, p_list, square_centered, out);
    } catch (const GuardError& e) {
        err << "error: " << e.what() << "\n";
        return kNumerical;
    } catch (const std::invalid_argument& e) {
        err << "usage error: " << e.what() << "\n";
        return kUsage;
    } catch (const std::exception& e) {
        err << "error: " << e.what() << "\n";
        return kNumerical;
    }
    return kOk;
}

}  // namespace srl::cli
