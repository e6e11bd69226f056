// Basis pursuit success rates for Gaussian and symmetric exponential
// measurements, n = 64, over a grid of (N, s).

#include <cstdio>

#include "srl/srl.hpp"

int main() {
    using namespace srl;
    const std::vector<std::size_t> Ns{4, 8, 12, 16, 20, 24, 30, 40};
    const std::vector<std::size_t> ss{1, 2, 3, 4, 6};
    for (const auto& spec : {EnsembleSpec::gaussian(), EnsembleSpec::symexp()}) {
        const PhaseTable t = phase_diagram(spec, 64, Ns, ss, 40, 2024);
        std::printf("%s, n = 64, %zu trials per cell\n   N |", to_string(spec.kind), t.trials);
        for (auto s : ss) std::printf("  s=%zu", s);
        std::printf("\n");
        for (std::size_t a = 0; a < Ns.size(); ++a) {
            std::printf("%4zu |", Ns[a]);
            for (std::size_t b = 0; b < ss.size(); ++b) std::printf(" %5.2f", t.rate(a, b));
            std::printf("\n");
        }
        std::printf("\n");
    }
}
