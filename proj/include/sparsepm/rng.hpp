#pragma once

#include <cstdint>

namespace sparsepm {

// SplitMix64 step, used to derive per-trial seeds from (master_seed, trial_index).
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ull;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ull;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBull;
    return x ^ (x >> 31);
}

// Small deterministic generator (xoshiro256**). We avoid std::*_distribution
// because their output is implementation-defined; simulation results must be
// reproducible from the seed alone.
class TrialRng {
public:
    TrialRng(std::uint64_t master_seed, std::uint64_t stream) {
        std::uint64_t z = master_seed ^ (stream * 0x9E3779B97F4A7C15ull);
        for (auto& w : s_) {
            z = splitmix64(z);
            w = z;
        }
    }

    std::uint64_t next_u64() {
        const std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform in [0, 1) with 53 random bits.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    bool next_bernoulli(double p) { return next_double() < p; }

    bool next_bit() { return (next_u64() >> 63) != 0; }

    // Uniform integer in [0, n), n >= 1 (rejection-free modulo is fine here;
    // bias is irrelevant at the n we use and determinism is what matters).
    std::uint64_t next_below(std::uint64_t n) { return next_u64() % n; }

private:
    static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    std::uint64_t s_[4];
};

}  // namespace sparsepm
