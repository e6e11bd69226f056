// Condition numbers of one Gaussian and one spiky 12 x 24 matrix at order 2.

#include <cstdio>

#include "srl/srl.hpp"

namespace {

void report(const char* label, const srl::EnsembleSpec& spec) {
    using namespace srl;
    const std::size_t N = 12, n = 24, s = 2;
    RngStream rng = derive_stream(5, 0);
    const DenseMatrix g = generate_matrix(spec, N, n, rng).gamma;
    const ConditionReport rep = evaluate_conditions(g, s);
    std::printf("%s (%zu x %zu, s = %zu)\n", label, N, n, s);
    std::printf("  restricted sigma       [%.4f, %.4f]  rip delta %.4f\n", rep.restricted_sigma_min,
                rep.restricted_sigma_max, rep.rip_delta);
    std::printf("  nsp worst ratio        %.4f (%s)\n", rep.nsp_worst_ratio, rep.nsp_holds ? "holds" : "fails");
    std::printf("  certificate            c0 %.4f  c1 %.4f  s1 %zu\n", rep.certificate.c0, rep.certificate.c1,
                rep.certificate.s1);

    const auto phi = compatibility_phi(g, 3.0, {0, 1});
    std::printf("  phi(3, {1,2})          [%.4g, %.4g]%s\n", phi.phi_lower, phi.phi_upper,
                phi.converged ? "" : " (not converged)");
    RngStream krng = derive_stream(5, 1);
    const auto kappa = rec_kappa_upper(g, s, s, 3.0, 20, krng);
    std::printf("  kappa(2, 2, 3) upper   %.4g%s\n", kappa.kappa_upper, kappa.exact ? " (exact)" : "");
    const auto nb = neighbourly_check(g, s);
    std::printf("  2-neighbourly          %s (%zu LPs)\n", nb.neighbourly ? "yes" : "no", nb.lps_solved);
    RngStream brng = derive_stream(5, 2);
    const auto beta = small_ball_beta(spec, n, s, 0.5, 200, 1000, brng);
    std::printf("  small-ball beta(1/2)   min %.3f  mean %.3f\n\n", beta.beta_hat, beta.beta_mean);
}

}  // namespace

int main() {
    report("gaussian", srl::EnsembleSpec::gaussian());
    report("spiky", srl::EnsembleSpec::spiky_law(srl::make_spiky_params(24, 12, 0.05, 4.0)));
}
