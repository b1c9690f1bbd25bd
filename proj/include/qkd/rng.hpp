#pragma once

#include <cstdint>
#include <random>

namespace qkd {

// Seeded deterministic random stream. Every stochastic operation in the
// library takes one of these explicitly, and all distribution logic lives
// here (the standard distributions are not bit-reproducible across
// implementations; mt19937_64 itself is).
class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    std::uint64_t next_u64() { return engine_(); }

    bool next_bit() { return (next_u64() >> 63) != 0; }

    // Uniform in [0, bound) by rejection on the top bits.
    std::uint64_t next_below(std::uint64_t bound) {
        if (bound <= 1) return 0;
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
        std::uint64_t x;
        do {
            x = next_u64();
        } while (x >= limit);
        return x % bound;
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return next_double() < p; }

    // Standard normal via Box-Muller (one value per call, no caching, so the
    // stream position is easy to reason about).
    double next_normal() {
        double u1;
        do {
            u1 = next_double();
        } while (u1 <= 0.0);
        const double u2 = next_double();
        return std::sqrt(-2.0 * std::log(u1)) *
               std::cos(6.283185307179586476925287 * u2);
    }

    // Derive an independent stream for a parallel worker.
    Rng spawn(std::uint64_t worker_index) {
        std::uint64_t s = next_u64();
        s ^= 0x9e3779b97f4a7c15ULL * (worker_index + 1);
        return Rng(s);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace qkd
