#include <catch_amalgamated.hpp>

#include <cmath>

#include "oracles.hpp"
#include "srl/conditions.hpp"
#include "srl/experiments.hpp"

using Catch::Approx;
using namespace srl;

namespace {

// columns 0 and 1 equal
DenseMatrix duplicated(std::size_t rows, std::size_t cols, RngStream& rng) {
    DenseMatrix g = oracle::random_gaussian(rows, cols, rng);
    for (std::size_t i = 0; i < rows; ++i) g(i, 1) = g(i, 0);
    return g;
}

}  // namespace

TEST_CASE("restricted singular extremes", "[conditions]") {
    const auto id = restricted_sigma_extremes(DenseMatrix::identity(6), 3);
    CHECK(id.sigma_min == Approx(1.0));
    CHECK(id.sigma_max == Approx(1.0));
    CHECK(id.supports == 20);
    CHECK(rip_delta(id.sigma_min, id.sigma_max) == Approx(0.0).margin(1e-12));

    RngStream rng(51, 0);
    const DenseMatrix g = oracle::random_gaussian(5, 7, rng);
    const auto one = restricted_sigma_extremes(g, 1);
    double lo = INFINITY, hi = 0.0;
    for (std::size_t j = 0; j < 7; ++j) {
        lo = std::min(lo, std::sqrt(g.column_norm_sq(j)));
        hi = std::max(hi, std::sqrt(g.column_norm_sq(j)));
    }
    CHECK(one.sigma_min == Approx(lo));
    CHECK(one.sigma_max == Approx(hi));
    CHECK_THROWS_AS(restricted_sigma_extremes(g, 0), std::invalid_argument);
}

TEST_CASE("restricted extremes bracket sampled sparse directions", "[conditions]") {
    RngStream rng(52, 0);
    const DenseMatrix g = generate_matrix(EnsembleSpec::gaussian(), 40, 10, rng).gamma;
    const auto ext = restricted_sigma_extremes(g, 2);
    double lo = INFINITY, hi = 0.0;
    for (int k = 0; k < 100000; ++k) {
        const Vector x = random_sparse_signal(10, 2, rng);
        const double v = norm(g.apply(x), NormKind::L2);
        lo = std::min(lo, v);
        hi = std::max(hi, v);
    }
    CHECK(lo >= ext.sigma_min - 1e-9);
    CHECK(hi <= ext.sigma_max + 1e-9);
    // dense sampling comes close to the exact values
    CHECK(lo <= ext.sigma_min + 0.05);
    CHECK(hi >= ext.sigma_max - 0.05);
}

TEST_CASE("null space property", "[conditions]") {
    const DenseMatrix sq(2, 2, Vector{2, 1, 1, 3});
    auto r = nsp_order_s(sq, 1);
    CHECK(r.holds);
    CHECK(r.worst_ratio == 0.0);

    r = nsp_order_s(DenseMatrix(1, 2, Vector{1, 1}), 1);
    CHECK_FALSE(r.holds);
    CHECK(r.worst_ratio == Approx(0.5));
    CHECK(std::abs(r.worst_kernel_vector[0]) == Approx(0.5));

    // ker = span(1, 1, -1): order 1 ratio 1/3 holds, order 2 ratio 2/3 fails
    const DenseMatrix k3(2, 3, Vector{1, 0, 1, 0, 1, 1});
    CHECK(nsp_order_s(k3, 1).worst_ratio == Approx(1.0 / 3.0));
    CHECK(nsp_order_s(k3, 1).holds);
    CHECK(nsp_order_s(k3, 2).worst_ratio == Approx(2.0 / 3.0));
    CHECK_FALSE(nsp_order_s(k3, 2).holds);
    CHECK(nsp_order_s(k3, 2).lps_solved == 6);
}

TEST_CASE("null space property agrees with basis pursuit", "[conditions]") {
    // When the property fails, the worst kernel vector yields a signal that
    // basis pursuit does not recover; when it holds, every signal is recovered.
    RngStream rng(53, 0);
    int fails = 0, holds = 0;
    for (int t = 0; t < 30; ++t) {
        const DenseMatrix g = oracle::random_gaussian(4, 7, rng);
        const auto r = nsp_order_s(g, 2);
        if (r.holds) {
            ++holds;
            for (int k = 0; k < 10; ++k) {
                const Vector x0 = random_sparse_signal(7, 2, rng);
                CHECK(basis_pursuit(g, g.apply(x0), x0).recovered);
            }
        } else if (r.worst_ratio > 0.5 + 1e-6) {
            ++fails;
            // x0 = v_S is beaten by -v_{S^c}
            Vector x0(7, 0.0);
            for (std::size_t i : r.worst_support) x0[i] = r.worst_kernel_vector[i];
            const auto bp = basis_pursuit(g, g.apply(x0), x0);
            CHECK(bp.objective < norm(x0, NormKind::L1) - 1e-9);
            CHECK_FALSE(bp.recovered);
        }
    }
    CHECK(fails + holds > 0);
}

TEST_CASE("small-ball estimates", "[conditions]") {
    RngStream rng(54, 0);
    auto b = small_ball_beta(EnsembleSpec::gaussian(), 20, 3, 0.0, 100, 100, rng);
    CHECK(b.beta_hat == 1.0);

    // Gaussian: every direction gives a standard normal, beta(u) = 2(1 - Phi(u))
    b = small_ball_beta(EnsembleSpec::gaussian(), 20, 3, 0.5, 200, 1000, rng);
    const double exact = std::erfc(0.5 / std::sqrt(2.0));
    CHECK(exact == Approx(0.6171).margin(1e-4));
    const double se = std::sqrt(exact * (1 - exact) / (200.0 * 1000.0));
    CHECK(std::abs(b.beta_mean - exact) <= 3.0 * se);
    CHECK(b.beta_hat <= b.beta_mean);

    const auto spiky = EnsembleSpec::spiky_law(derive_spiky_params(10000, 4).params);
    b = small_ball_beta(spiky, 10000, 1, 0.25, 100, 200, rng);
    CHECK(b.beta_hat >= 0.4);
    CHECK_THROWS_AS(small_ball_beta(spiky, 10, 1, 0.25, 10, 200, rng), std::invalid_argument);
}

TEST_CASE("compatibility constant on simple matrices", "[conditions]") {
    for (double L : {0.5, 1.0, 3.0}) {
        const auto r = compatibility_phi(DenseMatrix::identity(4), L, {0});
        CHECK(r.phi_upper == Approx(1.0).epsilon(1e-6));
        CHECK(r.phi_lower <= r.phi_upper + 1e-12);
        CHECK(r.converged);
    }
    RngStream rng(55, 0);
    const DenseMatrix g = duplicated(4, 6, rng);
    const auto r = compatibility_phi(g, 1.0, {0});
    CHECK(r.phi_upper <= 1e-6);
    CHECK_THROWS_AS(compatibility_phi(g, 0.0, {0}), std::invalid_argument);
    CHECK_THROWS_AS(compatibility_phi(g, 1.0, {}), std::invalid_argument);
}

TEST_CASE("compatibility constant against projected gradient", "[conditions]") {
    RngStream rng(56, 0);
    for (int t = 0; t < 4; ++t) {
        const DenseMatrix g = oracle::random_gaussian(6, 8, rng, 1.0 / std::sqrt(6.0));
        const IndexSet S{0, 1};
        const auto r = compatibility_phi(g, 3.0, S);
        const double ref = oracle::phi_projected_gradient(g, 3.0, S);
        CHECK(r.phi_upper == Approx(ref).margin(1e-3));
        CHECK(r.phi_lower <= ref + 1e-6);
    }
}

TEST_CASE("kernel and cone intersection", "[conditions]") {
    const DenseMatrix sq(2, 2, Vector{2, 1, 1, 3});
    CHECK_FALSE(kernel_cone_intersect(sq, {0}, 1.0).intersects);

    RngStream rng(57, 0);
    const DenseMatrix g = duplicated(4, 6, rng);
    const auto c = kernel_cone_intersect(g, {0}, 1.0);
    REQUIRE(c.intersects);
    REQUIRE(c.witness);
    const Vector& w = *c.witness;
    CHECK(w[0] == Approx(-w[1]));
    CHECK(std::abs(w[0]) == Approx(0.5));
    CHECK(norm(g.apply(w), NormKind::Linf) <= 1e-9);

    // a tall Gaussian matrix has a trivial kernel
    CHECK_FALSE(kernel_cone_intersect(oracle::random_gaussian(8, 5, rng), {0, 1}, 3.0).intersects);
}

TEST_CASE("restricted eigenvalue estimate", "[conditions]") {
    RngStream rng(58, 0);
    const auto id = rec_kappa_upper(DenseMatrix::identity(6), 1, 1, 1.0, 20, rng);
    CHECK(id.kappa_upper >= 1.0 - 1e-12);
    CHECK(id.kappa_upper <= 1.0 + 1e-3);
    CHECK_FALSE(id.exact);

    const auto dup = rec_kappa_upper(duplicated(4, 6, rng), 1, 1, 1.0, 5, rng);
    CHECK(dup.kappa_upper == 0.0);
    CHECK(dup.exact);
}

TEST_CASE("restricted eigenvalue estimate against cone sampling", "[conditions]") {
    RngStream rng(59, 0);
    const DenseMatrix g = generate_matrix(EnsembleSpec::gaussian(), 20, 10, rng).gamma;
    const double c0 = 3.0;
    const auto k = rec_kappa_upper(g, 1, 1, c0, 50, rng);
    // sampling oracle over 10^6 cone points
    double best = INFINITY;
    for (int t = 0; t < 1000000; ++t) {
        const IndexSet s0{static_cast<std::size_t>(rng.below(10))};
        Vector x(10);
        for (auto& v : x) v = rng.gaussian();
        double on = std::abs(x[s0[0]]), off = norm(x, NormKind::L1) - on;
        if (off > c0 * on) {
            const double f = c0 * on / off * (1.0 - 1e-12);
            for (std::size_t i = 0; i < 10; ++i)
                if (i != s0[0]) x[i] *= f;
        }
        best = std::min(best, norm(g.apply(x), NormKind::L2) / restricted_head_norm(x, s0, 1));
    }
    CHECK(k.kappa_upper <= best + 1e-6);
    // a valid upper bound is never below the smallest singular value
    CHECK(k.kappa_upper >= singular_extremes(g).sigma_min - 1e-12);
    CHECK(in_restricted_cone(k.best_x, k.best_s0, c0, 1e-9));
}

TEST_CASE("recovery order certificate", "[conditions]") {
    CHECK(certified_order(1.0, 1.0, 101) == 24);
    CHECK(certified_order(0.0, 1.0, 101) == 0);
    CHECK(certified_order(1.0, 1.0, 1) == 0);

    const auto id = recovery_order_certificate(DenseMatrix::identity(12), 9);
    CHECK(id.c0 == Approx(1.0));
    CHECK(id.c1 == Approx(1.0));
    CHECK(id.s1 == 1);

    RngStream rng(60, 0);
    const auto dup = recovery_order_certificate(duplicated(6, 8, rng), 2);
    CHECK(dup.c0 <= 1e-12);
    CHECK(dup.s1 == 0);
}

TEST_CASE("certified orders are recovered", "[conditions]") {
    // I + 0.01 G on 16 columns: certificate from s = 13
    RngStream rng(61, 0);
    DenseMatrix g = DenseMatrix::identity(16);
    const DenseMatrix noise = oracle::random_gaussian(16, 16, rng, 0.01);
    for (std::size_t i = 0; i < 16; ++i)
        for (std::size_t j = 0; j < 16; ++j) g(i, j) += noise(i, j);
    const auto cert = recovery_order_certificate(g, 13);
    REQUIRE(cert.s1 >= 1);
    CHECK(nsp_order_s(g, cert.s1).holds);
    for (int t = 0; t < 20; ++t) {
        const Vector x0 = random_sparse_signal(16, cert.s1, rng);
        CHECK(basis_pursuit(g, g.apply(x0), x0).recovered);
    }
}

TEST_CASE("maurey lower bound", "[conditions]") {
    RngStream rng(62, 0);
    Vector y(5);
    for (auto& v : y) v = rng.gaussian();
    CHECK(maurey_rhs(DenseMatrix::identity(5), y, 3, 1.0) == Approx(dot(y, y)));

    const DenseMatrix g = oracle::random_gaussian(6, 5, rng);
    const double lam = 0.3;
    const double c = g.column_norm_sq(0);
    CHECK(maurey_rhs(g, basis_vector(5, 0), 4, lam) == Approx(lam * lam - (c - lam * lam) / 3.0));
    CHECK(maurey_rhs(g, basis_vector(5, 0), 4, lam) <= c);
    CHECK_THROWS_AS(maurey_rhs(g, y, 1, lam), std::invalid_argument);
}

TEST_CASE("maurey inequality on random instances", "[conditions]") {
    RngStream rng(63, 0);
    for (int t = 0; t < 10; ++t) {
        const DenseMatrix g = generate_matrix(EnsembleSpec::gaussian(), 12, 16, rng).gamma;
        const std::size_t s = 3;
        const double lam = restricted_sigma_extremes(g, s).sigma_min;
        for (int k = 0; k < 100; ++k) {
            Vector y(16);
            for (auto& v : y) v = rng.gaussian();
            const Vector gy = g.apply(y);
            CHECK(dot(gy, gy) >= maurey_rhs(g, y, s, lam) - 1e-9);
        }
    }
}

TEST_CASE("vertex census", "[conditions]") {
    const auto id = vertex_census(DenseMatrix::identity(5));
    CHECK(id.num_vertices == 10);
    CHECK(id.non_vertex_columns.empty());

    RngStream rng(64, 0);
    const auto dup = vertex_census(duplicated(4, 6, rng));
    CHECK(dup.non_vertex_columns.size() >= 2);
    CHECK(dup.non_vertex_columns[0] == 0);
    CHECK(dup.non_vertex_columns[1] == 1);
    CHECK_FALSE(column_is_vertex(DenseMatrix(2, 3, Vector{0.5, 1, 0, 0, 0, 1}), 0));
    CHECK(column_is_vertex(DenseMatrix(2, 3, Vector{1.5, 1, 0, 0, 0, 1}), 0));
}

TEST_CASE("neighbourliness", "[conditions]") {
    const auto id = neighbourly_check(DenseMatrix::identity(4), 4);
    CHECK(id.neighbourly);
    CHECK_FALSE(id.violating);

    RngStream rng(65, 0);
    const auto dup = neighbourly_check(duplicated(4, 6, rng), 1);
    CHECK_FALSE(dup.neighbourly);
    REQUIRE(dup.violating);

    // the LP route and the compatibility route agree on random matrices
    NeighbourlyOptions opt;
    opt.cross_check = true;
    for (int t = 0; t < 6; ++t) {
        const DenseMatrix g = generate_matrix(EnsembleSpec::gaussian(), 5, 9, rng).gamma;
        NeighbourlyResult r;
        REQUIRE_NOTHROW(r = neighbourly_check(g, 2, opt));
        if (r.neighbourly) CHECK(r.min_phi_upper > kPhiZero);
        else CHECK(r.min_phi_upper <= opt.decide_band);
    }
}

TEST_CASE("ball inside the symmetric hull", "[conditions]") {
    RngStream rng(66, 0);
    const std::size_t N = 3;
    const double R = 2.0;
    std::vector<Vector> cols;
    for (std::size_t i = 0; i < N; ++i) cols.push_back(basis_vector(N, i, R));
    const auto b = ball_in_polytope_support(cols, 100000, rng);
    CHECK(b.min_support >= R / std::sqrt(3.0) - 1e-12);
    CHECK(b.min_support == Approx(R / std::sqrt(3.0)).epsilon(0.02));

    // perturbed scaled basis: v_i = R f_i + y_i, y_i in the cube
    const std::size_t M = 5;
    const double R2 = 4.0 * M;
    std::vector<Vector> pert;
    for (std::size_t i = 0; i < M; ++i) {
        Vector v = basis_vector(M, i, R2);
        for (auto& x : v) x += 2.0 * rng.uniform() - 1.0;
        pert.push_back(v);
    }
    const auto p = ball_in_polytope_support(pert, 20000, rng);
    CHECK(p.min_support >= R2 / std::sqrt(5.0) - std::sqrt(5.0));
    CHECK_THROWS_AS(ball_in_polytope_support(pert, 10, rng), std::invalid_argument);
}

TEST_CASE("condition report", "[conditions]") {
    const auto rep = evaluate_conditions(DenseMatrix::identity(6), 2);
    CHECK(rep.nsp_holds);
    CHECK(rep.nsp_margin == Approx(0.5));
    CHECK(rep.rip_delta == Approx(0.0).margin(1e-12));
    CHECK(rep.certificate.c1 == Approx(1.0));
}

TEST_CASE("neighbourliness matches the null space property", "[conditions]") {
    // the literal 30x12 shape is injective (vacuous); 12x30 exercises both sides
    int agree = 0, nsp_true = 0, nsp_false = 0;
    for (std::uint64_t seed = 0; seed < 25; ++seed) {
        for (auto [rows, cols] : {std::pair<std::size_t, std::size_t>{30, 12}, {12, 30}}) {
            RngStream rng(67, seed);
            const DenseMatrix g = generate_matrix(EnsembleSpec::gaussian(), rows, cols, rng).gamma;
            const bool nb = vertex_census(g).non_vertex_columns.empty() && neighbourly_check(g, 2).neighbourly;
            const bool nsp = nsp_order_s(g, 2).holds;
            CHECK(nb == nsp);
            agree += nb == nsp;
            (nsp ? nsp_true : nsp_false) += 1;
        }
    }
    CHECK(agree == 50);
    CHECK(nsp_true > 0);
    CHECK(nsp_false > 0);
}

TEST_CASE("restricted extremes are monotone in the order", "[conditions]") {
    RngStream rng(68, 0);
    const DenseMatrix g = oracle::random_gaussian(6, 9, rng);
    auto prev = restricted_sigma_extremes(g, 1);
    for (std::size_t s = 2; s <= 6; ++s) {
        const auto cur = restricted_sigma_extremes(g, s);
        CHECK(cur.sigma_min <= prev.sigma_min + 1e-12);
        CHECK(cur.sigma_max >= prev.sigma_max - 1e-12);
        prev = cur;
    }
}

TEST_CASE("cone intersection forces kappa and phi to zero", "[conditions]") {
    RngStream rng(69, 0);
    for (int t = 0; t < 5; ++t) {
        const DenseMatrix g = oracle::random_gaussian(3, 6, rng);
        for (std::size_t j = 0; j < 6; ++j) {
            const auto ci = kernel_cone_intersect(g, {j}, 2.0);
            if (!ci.intersects) continue;
            RngStream krng(69, 100 + j);
            CHECK(rec_kappa_upper(g, 1, 1, 2.0, 3, krng).kappa_upper == 0.0);
            CHECK(compatibility_phi(g, 2.0, {j}).phi_upper <= 1e-6);
        }
    }
}
