#pragma once

#include <cstdint>

namespace openrc {

/// Named substreams derived from one run seed. Keeping graph generation,
/// churn sampling, mass sampling, and initial-set selection on separate
/// streams means changing one distribution does not shift the draws of
/// the others.
enum class RngStream : std::uint64_t {
    Graph = 0,
    Churn = 1,
    Mass = 2,
    Init = 3,
};

/// splitmix64 generator. Chosen over std engines because its output is
/// fully specified by the code below, so traces reproduce bit-for-bit
/// across platforms and standard-library versions.
class Rng {
public:
    Rng(std::uint64_t seed, RngStream stream)
        : state_(mix(seed + kGamma * (static_cast<std::uint64_t>(stream) + 1))) {}

    std::uint64_t next_u64() {
        state_ += kGamma;
        return mix(state_);
    }

    /// Uniform double in [0, 1), 53 random bits.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform_real(double lo, double hi) {
        return lo + next_double() * (hi - lo);
    }

    bool bernoulli(double p) { return next_double() < p; }

    /// Uniform integer in [0, n), n >= 1. Rejection sampling keeps the
    /// draw unbiased and platform-independent.
    std::uint64_t bounded(std::uint64_t n) {
        if (n <= 1) return 0;
        const std::uint64_t limit = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t v;
        do {
            v = next_u64();
        } while (v >= limit);
        return v % n;
    }

private:
    static constexpr std::uint64_t kGamma = 0x9E3779B97F4A7C15ull;

    static std::uint64_t mix(std::uint64_t z) {
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
        return z ^ (z >> 31);
    }

    std::uint64_t state_;
};

} // namespace openrc
