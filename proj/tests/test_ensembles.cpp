#include <catch_amalgamated.hpp>

#include <cmath>

#include "srl/ensembles.hpp"

using Catch::Approx;
using namespace srl;

TEST_CASE("derived spiky parameters at n=10000, N=4", "[ensembles]") {
    const auto d = derive_spiky_params(10000, 4);
    CHECK(d.params.delta == Approx(1.38629e-4).epsilon(1e-5));
    CHECK(d.params.p == Approx(6.64386).epsilon(1e-5));
    CHECK(d.params.R == Approx(9.8162).epsilon(1e-4));
    CHECK(d.params.l2_norm_z == Approx(1.00801).epsilon(1e-5));
    CHECK(d.params.consistent());
    REQUIRE_FALSE(d.diagnostics.empty());
    CHECK(d.diagnostics[0].constraint == "R >= 2N");
    CHECK(d.diagnostics[0].satisfied);
}

TEST_CASE("derived spiky parameters reject small n", "[ensembles]") {
    CHECK_THROWS_AS(derive_spiky_params(100, 50), GuardError);
    CHECK_THROWS_AS(derive_spiky_params(8, 2), std::invalid_argument);
    CHECK_THROWS_AS(derive_spiky_params(100, 4, 0.5), std::invalid_argument);
}

TEST_CASE("spiky law with delta 0 is Rademacher", "[ensembles]") {
    const auto spec = EnsembleSpec::spiky_law(make_spiky_params(20, 4, 0.0, 4.0));
    RngStream rng(7, 0);
    const Vector row = sample_row(spec, 50, rng);
    for (double v : row) CHECK(std::abs(v) == 1.0);
}

TEST_CASE("matrix generation is deterministic and scaled", "[ensembles]") {
    RngStream a(5, 0), b(5, 0);
    const auto g1 = generate_matrix(EnsembleSpec::rademacher(), 2, 2, a);
    const auto g2 = generate_matrix(EnsembleSpec::rademacher(), 2, 2, b);
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) {
            CHECK(g1.gamma(i, j) == g2.gamma(i, j));
            CHECK(std::abs(g1.gamma(i, j)) == Approx(1.0 / std::sqrt(2.0)));
        }
    CHECK_FALSE(g1.trace);
    CHECK_THROWS_AS(generate_matrix(EnsembleSpec::gaussian(), 0, 3, a), std::invalid_argument);
}

TEST_CASE("spiky trace reconstructs the matrix", "[ensembles]") {
    const auto spec = EnsembleSpec::spiky_law(make_spiky_params(200, 6, 0.05, 4.0));
    RngStream rng(8, 0);
    const auto g = generate_matrix(spec, 6, 200, rng, true);
    REQUIRE(g.trace);
    const DenseMatrix r = reconstruct_from_trace(*g.trace);
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 200; ++j) CHECK(r(i, j) == g.gamma(i, j));
}

TEST_CASE("every coordinate law has unit variance", "[ensembles]") {
    const auto spiky = make_spiky_params(10000, 4, 0.01, 4.0);
    const std::size_t samples = 1000000;
    for (const auto& spec : {EnsembleSpec::gaussian(), EnsembleSpec::rademacher(), EnsembleSpec::symexp(),
                             EnsembleSpec::spiky_law(spiky)}) {
        RngStream rng(22, static_cast<std::uint64_t>(spec.kind));
        double s2 = 0.0, s4 = 0.0;
        for (std::size_t k = 0; k < samples; ++k) {
            const double x = sample_scalar(spec, rng);
            s2 += x * x;
            s4 += x * x * x * x;
        }
        const double m2 = s2 / samples;
        const double se = std::sqrt((s4 / samples - m2 * m2) / samples);
        INFO(to_string(spec.kind));
        CHECK(std::abs(m2 - 1.0) <= 3.0 * se + 1e-12);
    }
}

TEST_CASE("spiky L_q ratio", "[ensembles]") {
    CHECK(spiky_lq_ratio(make_spiky_params(20, 4, 0.0, 4.0), 7.0) == 1.0);
    const auto d = derive_spiky_params(10000, 4).params;
    CHECK(spiky_lq_ratio(d, 2.0) == Approx(1.0).epsilon(1e-14));
    CHECK_THROWS_AS(spiky_lq_ratio(d, 1.5), std::invalid_argument);

    // Monte Carlo over 10^7 draws
    RngStream rng(31, 0);
    const double mc = empirical_lp_norm(EnsembleSpec::spiky_law(d), 4.0, 10000000, rng);
    CHECK(mc == Approx(spiky_lq_ratio(d, 4.0)).epsilon(0.01));
}

TEST_CASE("empirical L_q norms", "[ensembles]") {
    RngStream rng(32, 0);
    CHECK(empirical_lp_norm(EnsembleSpec::constant(), 3.0, 1000, rng) == 1.0);
    CHECK(empirical_lp_norm(EnsembleSpec::gaussian(), 4.0, 1000000, rng) == Approx(std::pow(3.0, 0.25)).epsilon(0.02));
    CHECK_THROWS_AS(empirical_lp_norm(EnsembleSpec::gaussian(), 4.0, 10, rng), std::invalid_argument);
}

TEST_CASE("private spike probability per row", "[ensembles]") {
    CHECK(spike_row_event_prob(0.0, 4, 10000) == 0.0);
    CHECK(spike_row_event_prob(0.3, 4, 1) == 0.0);
    CHECK_THROWS_AS(spike_row_event_prob(-0.1, 4, 10), std::invalid_argument);

    const double delta = 1.38629e-4;
    const double p = spike_row_event_prob(delta, 4, 10000);
    const int reps = 100000;
    RngStream rng(33, 0);
    int hits = 0;
    for (int r = 0; r < reps; ++r) {
        const auto ev = simulate_perturbation_event(delta, 4, 10000, rng);
        bool row0 = true;
        for (auto i : ev.missing_rows) row0 = row0 && i != 0;
        hits += row0;
    }
    const double freq = static_cast<double>(hits) / reps;
    CHECK(std::abs(freq - p) <= 3.0 * std::sqrt(p * (1 - p) / reps));
}

TEST_CASE("all-rows event at a delta chosen for it", "[ensembles]") {
    // a union bound over the N rows gives P(event) >= 1 - N (1 - per_row)
    const std::size_t N = 4, n = 10000;
    const double delta = min_delta_for_row_event(N, n, 1.0 - 1.0 / (4.0 * N));
    CHECK(spike_row_event_prob(delta, N, n) >= 1.0 - 1.0 / (4.0 * N) - 1e-12);
    RngStream rng(34, 0);
    int holds = 0;
    for (int r = 0; r < 2000; ++r) holds += simulate_perturbation_event(delta, N, n, rng).holds;
    CHECK(holds / 2000.0 >= 0.75 - 0.03);
    CHECK_THROWS_AS(min_delta_for_row_event(4, 2, 0.99), GuardError);
}

TEST_CASE("perturbation event on constructed traces", "[ensembles]") {
    SpikyTrace t{DenseMatrix(3, 5, 1.0), DenseMatrix(3, 5, 0.0), 2.0, 1.0};
    auto ev = perturbation_event_check(t);
    CHECK_FALSE(ev.holds);
    CHECK(ev.missing_rows == std::vector<std::size_t>{0, 1, 2});

    t.eta(0, 1) = t.eta(1, 3) = t.eta(2, 4) = 1.0;
    ev = perturbation_event_check(t);
    CHECK(ev.holds);
    CHECK(ev.missing_rows.empty());

    // spikes in the first column do not count; shared columns do not count
    t.eta(2, 4) = 0.0;
    t.eta(2, 0) = 1.0;
    t.eta(2, 3) = 1.0;
    ev = perturbation_event_check(t);
    CHECK(ev.missing_rows == std::vector<std::size_t>{1, 2});
}
