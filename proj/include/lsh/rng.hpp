#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

namespace lsh {

// splitmix64 step; also used as the mixing function for stream derivation.
inline uint64_t splitmix64(uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

// Deterministic RNG with behavior fixed by this implementation, not by the
// standard library. std::uniform_*_distribution is not reproducible across
// toolchains; everything seeded must go through this class.
class Rng {
public:
    explicit Rng(uint64_t seed) : state_(seed) {
        // decorrelate trivially related seeds
        splitmix64(state_);
    }

    uint64_t next_u64() { return splitmix64(state_); }

    // uniform in [0, 1) with 53-bit resolution
    double uniform() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    // uniform integer in [0, n), unbiased via rejection
    uint64_t below(uint64_t n) {
        if (n == 0) return 0;
        uint64_t threshold = (0ULL - n) % n;
        for (;;) {
            uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

    // standard normal, Marsaglia polar method (libm-stable: only sqrt/log)
    double normal() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * uniform() - 1.0;
            v = 2.0 * uniform() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        double m = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * m;
        has_spare_ = true;
        return u * m;
    }

    double normal(double mean, double stddev) { return mean + stddev * normal(); }

    // Fisher-Yates selection of k distinct indices from [0, n)
    std::vector<long> sample_without_replacement(long n, long k) {
        std::vector<long> idx(static_cast<size_t>(n));
        for (long i = 0; i < n; ++i) idx[static_cast<size_t>(i)] = i;
        for (long i = 0; i < k; ++i) {
            long j = i + static_cast<long>(below(static_cast<uint64_t>(n - i)));
            std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
        }
        idx.resize(static_cast<size_t>(k));
        return idx;
    }

private:
    uint64_t state_;
    bool has_spare_ = false;
    double spare_ = 0.0;
};

// Stable stream derivation: every component draws its seed from the run seed,
// a component tag, and an optional per-candidate discriminator. FNV-1a over
// the tag, then splitmix finalization.
inline uint64_t derive_seed(uint64_t root, std::string_view tag, uint64_t salt = 0) {
    uint64_t h = 0xCBF29CE484222325ULL;
    auto mix = [&h](uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xFF;
            h *= 0x100000001B3ULL;
        }
    };
    mix(root);
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    mix(salt);
    return splitmix64(h);
}

}  // namespace lsh
