#pragma once

#include <cstdint>
#include <random>

namespace aoii {

// Seedable random source. All randomness in the library flows through this
// class so that a (seed, config) pair fully determines a run. The uniform
// mapping is fixed here (not delegated to std::uniform_real_distribution)
// to keep streams identical across standard library implementations.
class RandomSource {
public:
    explicit RandomSource(std::uint64_t seed) : seed_(seed), gen_(seed) {}

    std::uint64_t seed() const { return seed_; }

    // Uniform double in [0, 1) with 53 random bits; consumes one engine draw.
    double uniform() {
        return static_cast<double>(gen_() >> 11) * 0x1.0p-53;
    }

    bool bernoulli(double p) { return uniform() < p; }

    // Uniform integer in [0, n); consumes one draw.
    int uniform_index(int n) {
        int k = static_cast<int>(uniform() * n);
        return k < n ? k : n - 1;
    }

    // Derived stream, decorrelated from this one by a salt. Used to hand
    // independent sources to concurrent sweep cells.
    RandomSource fork(std::uint64_t salt) const {
        return RandomSource(mix(seed_ ^ mix(salt)));
    }

    // splitmix64 finalizer; also used by the sweep to map cell labels to seeds.
    static std::uint64_t mix(std::uint64_t z) {
        z += 0x9e3779b97f4a7c15ULL;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

private:
    std::uint64_t seed_;
    std::mt19937_64 gen_;
};

} // namespace aoii
