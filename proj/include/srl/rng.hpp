#pragma once

#include <bit>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numbers>

namespace srl {

/// SplitMix64 output finalizer (Steele, Lea, Flood). Bijective on 64 bits.
constexpr std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

/// A deterministic random stream identified by (master_seed, stream_index).
///
/// The generator is a SplitMix64 sequence started from
/// mix(master_seed ^ rotl(stream_index, 32)). Every draw below is defined in
/// terms of next() with fixed arithmetic, so the sequence of doubles is the
/// same on every IEEE-754 platform (up to libm differences in log/cos/sin).
///
/// Satisfies std::uniform_random_bit_generator.
class RngStream {
public:
    using result_type = std::uint64_t;

    RngStream(std::uint64_t master_seed, std::uint64_t stream_index) noexcept
        : master_seed_(master_seed),
          stream_index_(stream_index),
          state_(splitmix64_mix(master_seed ^ std::rotl(stream_index, 32))) {}

    static constexpr result_type min() noexcept { return 0; }
    static constexpr result_type max() noexcept {
        return std::numeric_limits<result_type>::max();
    }

    std::uint64_t master_seed() const noexcept { return master_seed_; }
    std::uint64_t stream_index() const noexcept { return stream_index_; }

    result_type operator()() noexcept { return next(); }

    result_type next() noexcept {
        state_ += 0x9e3779b97f4a7c15ULL;
        return splitmix64_mix(state_);
    }

    /// Uniform on the open interval (0, 1), 53-bit resolution.
    double uniform() noexcept {
        return (static_cast<double>(next() >> 11) + 0.5) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound). Rejection sampling, no modulo bias.
    std::uint64_t below(std::uint64_t bound) noexcept {
        const std::uint64_t limit = max() - max() % bound;
        std::uint64_t x = next();
        while (x >= limit) x = next();
        return x % bound;
    }

    /// Symmetric +-1.
    double sign() noexcept { return (next() >> 63) != 0 ? 1.0 : -1.0; }

    bool bernoulli(double p) noexcept { return uniform() < p; }

    /// Standard normal by Box-Muller; the second variate of each pair is
    /// cached and returned on the following call.
    double gaussian() noexcept {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        const double u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double theta = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(theta);
        has_spare_ = true;
        return r * std::cos(theta);
    }

    /// Exp(1).
    double exponential() noexcept { return -std::log(uniform()); }

    /// Number of failures before the first success of Bernoulli(p) trials.
    /// Returns max() when p == 0.
    std::uint64_t geometric_skip(double p) noexcept {
        if (p <= 0.0) return max();
        if (p >= 1.0) return 0;
        const double g = std::floor(std::log(uniform()) / std::log1p(-p));
        if (g >= 1.8e19) return max();
        return static_cast<std::uint64_t>(g);
    }

private:
    std::uint64_t master_seed_;
    std::uint64_t stream_index_;
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

inline RngStream derive_stream(std::uint64_t master_seed, std::uint64_t index) noexcept {
    return RngStream(master_seed, index);
}

/// Packs a (cell, trial) pair into one stream index.
constexpr std::uint64_t stream_index(std::uint64_t cell, std::uint64_t trial) noexcept {
    return (cell << 32) | (trial & 0xffffffffULL);
}

}  // namespace srl
