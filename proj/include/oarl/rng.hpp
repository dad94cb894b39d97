#pragma once

#include <cstdint>
#include <random>
#include <string_view>

#include "oarl/common.hpp"

namespace oarl {

// splitmix64 finalizer; good avalanche for seed derivation.
inline uint64_t mix64(uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

// Every random stream in the project is derived as hash(master, purpose tag, index).
// No ambient randomness anywhere.
inline uint64_t derive_seed(uint64_t master, std::string_view tag, uint64_t index = 0) {
    uint64_t h = fnv1a64(tag.data(), tag.size());
    h = mix64(h ^ mix64(master));
    return mix64(h ^ mix64(index + 0x51ed270b7a3ea2ull));
}

// Deterministic stream over mt19937_64 (bit-identical across platforms).
// The bounded/real draws are hand-rolled because std::uniform_*_distribution
// is implementation-defined.
class Rng {
public:
    Rng() : engine_(0) {}
    explicit Rng(uint64_t seed) : engine_(seed) {}

    uint64_t next_u64() { return engine_(); }

    // Uniform integer in [0, n), n >= 1. Rejection-free multiply-shift map.
    uint64_t uniform_int(uint64_t n) {
        // 128-bit multiply keeps the mapping unbiased enough for our scale.
        __uint128_t m = static_cast<__uint128_t>(next_u64()) * n;
        return static_cast<uint64_t>(m >> 64);
    }

    // Uniform double in [0, 1) with 53 random bits.
    double uniform_real() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool bernoulli(double p) { return uniform_real() < p; }

    // Gaussian via Box-Muller pair, one value per call (no cached state so
    // the stream stays position-deterministic).
    double normal() {
        double u1 = uniform_real();
        double u2 = uniform_real();
        while (u1 <= 0.0) u1 = uniform_real();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(6.283185307179586 * u2);
    }

private:
    std::mt19937_64 engine_;
};

}  // namespace oarl
