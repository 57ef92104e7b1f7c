#pragma once

#include <cstdint>

namespace minball {

// Counter-based generator (splitmix64 over a hashed stream/counter pair).
// Streams are independent of thread scheduling, so any parallel consumer
// draws the same values for the same (seed, stream, counter).
struct Rng {
    std::uint64_t state;

    explicit Rng(std::uint64_t seed, std::uint64_t stream = 0)
        : state(mix(seed ^ mix(stream + 0x9e3779b97f4a7c15ULL))) {}

    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    std::uint64_t next_u64() {
        state += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform in [0, 1).
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        return lo + (hi - lo) * next_double();
    }

    // Uniform integer in [0, n).
    std::uint64_t next_below(std::uint64_t n) {
        return next_u64() % n;
    }

    bool bernoulli(double p) { return next_double() < p; }
};

}  // namespace minball
