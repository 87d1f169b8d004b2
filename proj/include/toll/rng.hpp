#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace toll {

// Deterministic RNG pinned to xoshiro256++ seeded through splitmix64.
// Uniform doubles come from the top 53 bits, normals from Box-Muller.
// Streams for independent purposes are derived statelessly with fork(),
// so training phases never consume from each other's sequences.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t x = seed;
        for (auto& s : state_) s = splitmix64(x);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0,1).
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n); n >= 1. Rejection-free modulo bias is
    // negligible for desk-scale n but we debias anyway.
    uint64_t uniform_int(uint64_t n) {
        const uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        uint64_t v = next_u64();
        while (v >= limit) v = next_u64();
        return v % n;
    }

    // Standard normal via Box-Muller; the spare value is cached.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double mag = std::sqrt(-2.0 * std::log(u1));
        const double ang = 2.0 * std::numbers::pi * u2;
        spare_ = mag * std::sin(ang);
        has_spare_ = true;
        return mag * std::cos(ang);
    }

    // Fisher-Yates permutation of [0, n).
    std::vector<int> permutation(int n) {
        std::vector<int> p(n);
        for (int i = 0; i < n; ++i) p[i] = i;
        for (int i = n - 1; i > 0; --i) {
            const int j = static_cast<int>(uniform_int(static_cast<uint64_t>(i) + 1));
            std::swap(p[i], p[j]);
        }
        return p;
    }

    // Derived independent stream: hash the tags into a fresh seed.
    Rng fork(uint64_t tag_a, uint64_t tag_b = 0, uint64_t tag_c = 0) const {
        uint64_t x = state_[0] ^ (state_[1] * 0x9e3779b97f4a7c15ULL);
        x ^= splitmix64_once(tag_a + 0x1ULL);
        x ^= splitmix64_once(tag_b + 0x2ULL) * 0xbf58476d1ce4e5b9ULL;
        x ^= splitmix64_once(tag_c + 0x3ULL) * 0x94d049bb133111ebULL;
        return Rng(x);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    static uint64_t splitmix64(uint64_t& x) {
        x += 0x9e3779b97f4a7c15ULL;
        return splitmix64_once(x);
    }

    static uint64_t splitmix64_once(uint64_t z) {
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    uint64_t state_[4];
    double spare_ = 0.0;
    bool has_spare_ = false;
};

}  // namespace toll
