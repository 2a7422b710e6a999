#pragma once

// Deterministic random number plumbing. Every stochastic entry point takes
// an explicit 64-bit seed; per-trajectory streams are derived with
// splitmix64 so that results do not depend on worker count or scheduling.

#include <cmath>
#include <cstdint>

namespace ionbath {

inline std::uint64_t splitmix64(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Stream seed for trajectory `index` under `base_seed`.
inline std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t index) {
    std::uint64_t s = base_seed;
    std::uint64_t a = splitmix64(s);
    s = base_seed ^ (0x9E3779B97F4A7C15ULL * (index + 1));
    std::uint64_t b = splitmix64(s);
    return a ^ b;
}

// xoshiro256** (Blackman/Vigna), seeded via splitmix64.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(state_[1] * 5, 7) * 9;
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53-bit resolution.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform in (0, 1], safe as a log argument.
    double uniform_positive() { return 1.0 - uniform(); }

    double exponential(double rate) { return -std::log(uniform_positive()) / rate; }

    bool bernoulli(double p) { return uniform() < p; }

    // Plain inversion-by-counting; fine for the trial counts used here.
    long binomial(long n, double p) {
        long k = 0;
        for (long i = 0; i < n; ++i) k += bernoulli(p) ? 1 : 0;
        return k;
    }

    // Standard normal via Box-Muller (one value per call, no caching).
    double normal() {
        const double u1 = uniform_positive();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.28318530717958647692 * u2);
    }

  private:
    static std::uint64_t rotl(std::uint64_t x, int k) {
        return (x << k) | (x >> (64 - k));
    }

    std::uint64_t state_[4];
};

}  // namespace ionbath
