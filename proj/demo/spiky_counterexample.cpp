// The spiky ensemble at n = 10^4, N = 4: derived parameters, then how often
// e_1 is beaten by a competitor supported off the first column.

#include <cstdio>

#include "srl/srl.hpp"

int main() {
    using namespace srl;
    const std::size_t n = 10000, N = 4, trials = 50;
    const auto d = derive_spiky_params(n, N);
    std::printf("delta = %.6g  p = %.6g  R = %.6g  ||z||_2 = %.6g\n", d.params.delta, d.params.p, d.params.R,
                d.params.l2_norm_z);
    for (const auto& c : d.diagnostics)
        std::printf("  %-40s value %-12.6g bound %-12.6g %s\n", c.constraint.c_str(), c.value, c.bound,
                    c.satisfied ? "ok" : "violated");

    const auto r = counterexample_experiment(n, N, trials, 1);
    std::printf("\n%zu trials\n", r.trials);
    std::printf("  competitor norm <= 1      %.2f\n", r.failure_freq);
    std::printf("  every row has a spike     %.2f\n", r.perturbation_freq);
    std::printf("  ||Gamma e_1||_2 <= 1      %.2f\n", r.column_norm_freq);
    std::printf("  cross-check disagreements %zu\n", r.inconsistencies);
    std::printf("  per-row event probability %.4f (closed form)\n", spike_row_event_prob(d.params.delta, N, n));

    double lo = INFINITY, hi = 0.0;
    for (const auto& t : r.per_trial) {
        lo = std::min(lo, t.competitor);
        hi = std::max(hi, t.competitor);
    }
    std::printf("  competitor norm range     [%.4f, %.4f]\n", lo, hi);
}
