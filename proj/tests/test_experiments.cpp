#include <catch_amalgamated.hpp>

#include <cmath>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "srl/report.hpp"

using Catch::Approx;
using namespace srl;

TEST_CASE("parallel_for covers every index once", "[experiments][parallel]") {
    for (std::size_t threads : {1, 2, 4, 7}) {
        std::vector<int> hits(1000, 0);
        parallel_for(hits.size(), [&](std::size_t i) { hits[i] += 1; }, threads);
        for (int h : hits) CHECK(h == 1);
    }
    parallel_for(0, [](std::size_t) { FAIL("no calls expected"); }, 3);
}

TEST_CASE("parallel_for rethrows the lowest failing index", "[experiments][parallel]") {
    for (std::size_t threads : {1, 4}) {
        try {
            parallel_for(
                200,
                [](std::size_t i) {
                    if (i == 37 || i == 150) throw std::runtime_error(std::to_string(i));
                },
                threads);
            FAIL("expected an exception");
        } catch (const std::runtime_error& e) {
            CHECK(std::string(e.what()) == "37");
        }
    }
}

TEST_CASE("worker count honours SRL_THREADS", "[experiments][parallel]") {
    setenv("SRL_THREADS", "1", 1);
    CHECK(worker_count() == 1);
    setenv("SRL_THREADS", "junk", 1);
    CHECK(worker_count() >= 1);
    unsetenv("SRL_THREADS");
}

TEST_CASE("random sparse signals", "[experiments]") {
    RngStream rng(70, 0);
    for (std::size_t s : {0, 1, 3, 10}) {
        const Vector x = random_sparse_signal(10, s, rng);
        CHECK(norm(x, NormKind::L0) == s);
        if (s) CHECK(norm(x, NormKind::L2) == Approx(1.0));
    }
    CHECK_THROWS_AS(random_sparse_signal(3, 4, rng), std::invalid_argument);
}

TEST_CASE("phase diagram edge cells", "[experiments]") {
    // N = n: square Gaussian Gamma is invertible; N < s: BP cannot recover
    const auto t = phase_diagram(EnsembleSpec::gaussian(), 16, {16, 2}, {1, 3, 5}, 10, 9);
    for (std::size_t b = 0; b < 3; ++b) CHECK(t.rate(0, b) == 1.0);
    CHECK(t.rate(1, 1) == 0.0);
    CHECK(t.rate(1, 2) == 0.0);
    CHECK_THROWS_AS(phase_diagram(EnsembleSpec::gaussian(), 4, {2}, {5}, 1, 0), std::invalid_argument);
}

TEST_CASE("phase diagram is deterministic under thread caps", "[experiments]") {
    const std::vector<std::size_t> Ns{8, 16}, ss{1, 2, 4};
    setenv("SRL_THREADS", "1", 1);
    const auto a = phase_diagram(EnsembleSpec::rademacher(), 32, Ns, ss, 20, 123);
    setenv("SRL_THREADS", "3", 1);
    const auto b = phase_diagram(EnsembleSpec::rademacher(), 32, Ns, ss, 20, 123);
    unsetenv("SRL_THREADS");
    CHECK(a.successes == b.successes);
    CHECK(phase_table_csv(a) == phase_table_csv(b));
    const auto c = phase_diagram(EnsembleSpec::rademacher(), 32, Ns, ss, 20, 124);
    CHECK(c.master_seed == 124);
}

TEST_CASE("phase diagram CSV shape", "[experiments]") {
    const auto t = phase_diagram(EnsembleSpec::gaussian(), 16, {8, 12}, {1, 2}, 5, 1);
    const std::string csv = phase_table_csv(t);
    std::istringstream in(csv);
    std::string line;
    std::getline(in, line);
    CHECK(line == "ensemble,n,N,s,trials,successes,rate,seed");
    int rows = 0;
    while (std::getline(in, line)) {
        ++rows;
        CHECK(line.rfind("gaussian,16,", 0) == 0);
    }
    CHECK(rows == 4);
}

TEST_CASE("counterexample in the Rademacher limit", "[experiments]") {
    CounterexampleOptions opt;
    opt.params_override = make_spiky_params(200, 24, 0.0, 4.0);
    const auto r = counterexample_experiment(200, 24, 20, 5, opt);
    CHECK(r.failure_freq <= 0.05);
    CHECK(r.perturbation_freq == 0.0);
    CHECK(r.inconsistencies == 0);
    CHECK(r.diagnostics.empty());

    opt.params_override = make_spiky_params(100, 24, 0.0, 4.0);
    CHECK_THROWS_AS(counterexample_experiment(200, 24, 1, 5, opt), std::invalid_argument);
}

TEST_CASE("counterexample trials are consistent and reproducible", "[experiments]") {
    const auto a = counterexample_experiment(2000, 4, 6, 11);
    const auto b = counterexample_experiment(2000, 4, 6, 11);
    REQUIRE(a.per_trial.size() == 6);
    CHECK(a.inconsistencies == 0);
    CHECK(a.diagnostics.size() == 4);
    for (std::size_t t = 0; t < 6; ++t) {
        CHECK(a.per_trial[t].competitor == b.per_trial[t].competitor);
        // a competitor of norm <= 1 means column 1 is inside the hull of the rest
        if (a.per_trial[t].failure) CHECK_FALSE(a.per_trial[t].column_vertex);
    }
    const auto recs = to_records(a, 2000, 4, 11);
    CHECK(recs.size() == 6);
    CHECK(records_csv(recs).rfind("experiment,seed,n,N,trial,competitor_norm,", 0) == 0);
}

TEST_CASE("l0 experiment edge cases", "[experiments]") {
    CHECK(l0_experiment(EnsembleSpec::gaussian(), 8, 2, 4, 30, 3).success_rate == 1.0);
    CHECK(l0_experiment(EnsembleSpec::gaussian(), 8, 3, 2, 10, 3).success_rate == 0.0);
    CHECK_THROWS_AS(l0_experiment(EnsembleSpec::gaussian(), 20, 7, 14, 1, 3), GuardError);
}

TEST_CASE("moment growth", "[experiments]") {
    CHECK(moment_alpha({EnsembleSpec::gaussian(), false}) == 0.5);
    CHECK(moment_alpha({EnsembleSpec::symexp(), true}) == 2.0);
    CHECK_THROWS_AS(moment_alpha({EnsembleSpec::spiky_law({}), false}), GuardError);
    CHECK(gaussian_abs_moment_root(2.0) == Approx(1.0));
    CHECK(gaussian_abs_moment_root(4.0) == Approx(std::pow(3.0, 0.25)));

    // squared Rademacher minus one vanishes identically
    const auto zero = moment_growth_experiment({EnsembleSpec::rademacher(), true}, {2, 4}, 16, 2048, 1);
    for (const auto& row : zero) {
        CHECK(row.lhs == 0.0);
        CHECK(row.reference == 0.0);
    }

    // Gaussian sums are exactly Gaussian
    const auto g = moment_growth_experiment({EnsembleSpec::gaussian(), false}, {2, 4}, 8, 200000, 2);
    CHECK(g[0].lhs == Approx(1.0).epsilon(0.01));
    CHECK(g[1].lhs == Approx(g[1].reference).epsilon(0.02));

    CHECK_THROWS_AS(moment_growth_experiment({EnsembleSpec::symexp(), true}, {8}, 16, 100, 1), GuardError);
    CHECK_THROWS_AS(moment_growth_experiment({EnsembleSpec::gaussian(), false}, {0.5}, 16, 100, 1),
                    std::invalid_argument);
}

TEST_CASE("moment growth does not depend on thread caps", "[experiments]") {
    setenv("SRL_THREADS", "1", 1);
    const auto a = moment_growth_experiment({EnsembleSpec::symexp(), false}, {2, 3, 6}, 36, 5000, 8);
    setenv("SRL_THREADS", "4", 1);
    const auto b = moment_growth_experiment({EnsembleSpec::symexp(), false}, {2, 3, 6}, 36, 5000, 8);
    unsetenv("SRL_THREADS");
    for (std::size_t q = 0; q < a.size(); ++q) CHECK(a[q].lhs == b[q].lhs);
}

TEST_CASE("noisy LASSO degenerate cases", "[experiments]") {
    // no noise: lambda = 0 and the fit interpolates
    NoisyModel quiet{0.0, 2.0, std::nullopt};
    CHECK(quiet.lambda(32, 24) == 0.0);
    NoisyLassoOptions opt;
    opt.lasso.kkt_tol = 1e-10;
    const auto r = noisy_lasso_experiment(EnsembleSpec::gaussian(), 32, 24, 2, quiet, 5, 4, opt);
    for (const auto& t : r.per_trial) CHECK(t.prediction_error <= 1e-12);

    // zero signal: the estimate stays at zero and the bounds hold
    NoisyModel noisy{0.1, 2.0, std::nullopt};
    const auto z = noisy_lasso_experiment(EnsembleSpec::gaussian(), 32, 24, 0, noisy, 10, 4);
    CHECK(z.bound_violation_freq == 0.0);
    for (const auto& t : z.per_trial) CHECK(t.l1_error <= 1e-12);
    CHECK(z.nominal_failure_prob == Approx(2.0 * std::exp(-2.0)));

    CHECK_THROWS_AS(noisy_lasso_experiment(EnsembleSpec::gaussian(), 32, 24, 2, {-1.0, 2.0, std::nullopt}, 1, 4),
                    std::invalid_argument);
    CHECK_THROWS_AS(noisy_lasso_experiment(EnsembleSpec::gaussian(), 64, 24, 11, noisy, 1, 4), GuardError);
}

TEST_CASE("noisy LASSO with a fixed matrix", "[experiments]") {
    RngStream rng(71, 0);
    NoisyLassoOptions opt;
    opt.fixed_gamma = generate_matrix(EnsembleSpec::gaussian(), 24, 32, rng).gamma;
    NoisyModel m{0.1, 2.0, std::nullopt};
    const auto a = noisy_lasso_experiment(EnsembleSpec::gaussian(), 32, 24, 2, m, 4, 6, opt);
    const auto b = noisy_lasso_experiment(EnsembleSpec::gaussian(), 32, 24, 2, m, 4, 6, opt);
    for (std::size_t t = 0; t < 4; ++t) CHECK(a.per_trial[t].l1_error == b.per_trial[t].l1_error);
    const auto recs = to_records(a, 32, 24, 2, 6);
    CHECK(recs.front().outcome.size() == 10);
    opt.fixed_gamma = DenseMatrix(3, 3);
    CHECK_THROWS_AS(noisy_lasso_experiment(EnsembleSpec::gaussian(), 32, 24, 2, m, 1, 6, opt), std::invalid_argument);
}

TEST_CASE("report formatting", "[experiments][report]") {
    CHECK(format_real(0.1) == "0.10000000000000001");
    CHECK(format_real(1.0) == "1");
    CHECK(format_real(NAN) == "nan");
    CHECK(format_real(-INFINITY) == "-inf");
    CHECK(format_field(FieldValue{true}) == "true");
    CHECK(format_field(FieldValue{std::int64_t{-3}}) == "-3");
    CHECK(matrix_csv(DenseMatrix(1, 2, Vector{0.5, -2})) == "0.5,-2\n");

    const auto dir = std::filesystem::temp_directory_path() / "srl_report_test";
    std::filesystem::create_directories(dir);
    const auto path = dir / "out.csv";
    write_atomic(path, "a,b\n1,2\n");
    std::ifstream f(path);
    std::stringstream ss;
    ss << f.rdbuf();
    CHECK(ss.str() == "a,b\n1,2\n");
    CHECK_FALSE(std::filesystem::exists(dir / "out.csv.tmp"));
    std::filesystem::remove_all(dir);
}
