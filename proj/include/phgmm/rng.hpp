#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>

namespace phgmm {

// Deterministic PRNG with identical output on every platform. std::mt19937 is
// portable but the std distributions are not, so sampling is done by hand.
// Core generator is splitmix64 feeding xoshiro256**.
class Rng {
public:
    explicit Rng(uint64_t seed) { reseed(seed); }

    void reseed(uint64_t seed) {
        uint64_t x = seed;
        for (auto& si : s_) {
            x += 0x9e3779b97f4a7c15ULL;
            uint64_t z = x;
            z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
            z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
            si = z ^ (z >> 31);
        }
        has_spare_ = false;
        spare_ = 0.0;
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform() { return double(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // Uniform integer in [0, n). Rejection sampling keeps it unbiased.
    uint64_t next_below(uint64_t n) {
        const uint64_t threshold = (0 - n) % n;
        for (;;) {
            const uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    int uniform_int(int lo, int hi) {  // inclusive bounds
        return lo + int(next_below(uint64_t(hi - lo + 1)));
    }

    // Standard normal via Box-Muller; caches the spare sample.
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 2.0 * std::numbers::pi * u2;
        spare_ = r * std::sin(a);
        has_spare_ = true;
        return r * std::cos(a);
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    bool bernoulli(double p) { return uniform() < p; }

    // Derives an independent stream, e.g. per (seed, epoch) so that resuming
    // from a checkpoint at an epoch boundary replays identical batches.
    static uint64_t derive(uint64_t seed, uint64_t stream) {
        uint64_t z = seed ^ (stream * 0x9e3779b97f4a7c15ULL + 0x2545f4914f6cdd1dULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // State serialization for checkpoints.
    void save_state(uint64_t out[6]) const {
        out[0] = s_[0];
        out[1] = s_[1];
        out[2] = s_[2];
        out[3] = s_[3];
        out[4] = has_spare_ ? 1 : 0;
        uint64_t bits;
        static_assert(sizeof(bits) == sizeof(spare_));
        __builtin_memcpy(&bits, &spare_, sizeof(bits));
        out[5] = bits;
    }

    void load_state(const uint64_t in[6]) {
        s_[0] = in[0];
        s_[1] = in[1];
        s_[2] = in[2];
        s_[3] = in[3];
        has_spare_ = in[4] != 0;
        __builtin_memcpy(&spare_, &in[5], sizeof(spare_));
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

    uint64_t s_[4]{};
    bool has_spare_ = false;
    double spare_ = 0.0;
};

}  // namespace phgmm
