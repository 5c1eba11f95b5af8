#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <string_view>

namespace steadapt {

inline constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
inline constexpr std::uint64_t kFnvPrime = 1099511628211ull;

inline std::uint64_t fnv1a(std::string_view s, std::uint64_t h = kFnvOffset) {
    for (unsigned char c : s) {
        h ^= c;
        h *= kFnvPrime;
    }
    return h;
}

// splitmix64 finalizer; decorrelates seeds built from (base, stream) pairs.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b) {
    std::uint64_t z = a + 0x9e3779b97f4a7c15ull * (b + 1);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// All randomness in the library flows through this wrapper so that values
// depend only on the seed, never on call-site ordering elsewhere.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : gen_(seed) {}
    Rng(std::uint64_t seed, std::string_view stream) : gen_(mix_seed(seed, fnv1a(stream))) {}

    double uniform(double lo, double hi) {
        // 53-bit mantissa draw; avoids distribution objects with unspecified state.
        const double u = static_cast<double>(gen_() >> 11) * 0x1.0p-53;
        return lo + u * (hi - lo);
    }

    double normal(double mean, double stddev) {
        // Box-Muller, one value per call (deterministic draw count).
        double u1 = uniform(1e-300, 1.0);
        double u2 = uniform(0.0, 1.0);
        return mean + stddev * std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

    // Uniform integer in [0, n).
    std::uint64_t index(std::uint64_t n) {
        // Rejection-free modulo is fine here: n is tiny relative to 2^64.
        return n ? gen_() % n : 0;
    }

    bool coin() { return (gen_() & 1u) != 0; }

    std::uint64_t raw() { return gen_(); }

private:
    std::mt19937_64 gen_;
};

}  // namespace steadapt
