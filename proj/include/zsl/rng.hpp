#pragma once

#include <cmath>
#include <cstdint>
#include <string_view>
#include <vector>

// Seeded randomness for the whole project. One algorithm everywhere:
// SplitMix64 (Steele, Lea, Flood 2014). Named streams are derived from a
// root seed by the rule
//
//   stream_state = mix64(root ^ fnv1a64(label) ^ (index + 1) * 0x9E3779B97F4A7C15)
//
// where mix64 is the SplitMix64 finalizer. The same (root, label, index)
// triple always yields the same sequence, so every run is reproducible
// from its recorded seed.

namespace zsl {

constexpr std::uint64_t kGolden64 = 0x9E3779B97F4A7C15ull;

constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ull;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ull;
    }
    return h;
}

class Rng {
public:
    explicit Rng(std::uint64_t state) : state_(state) {}

    /// Child stream per the derivation rule in the file header.
    static Rng stream(std::uint64_t root, std::string_view label, std::uint64_t index = 0) {
        return Rng(mix64(root ^ fnv1a64(label) ^ (index + 1) * kGolden64));
    }

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += kGolden64);
        return mix64(z);
    }

    /// Uniform in [0, 1) with 53 random bits.
    double next_unit() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [0, bound), bias-free by rejection. bound > 0.
    std::uint64_t next_below(std::uint64_t bound) {
        const std::uint64_t threshold = -bound % bound;
        for (;;) {
            std::uint64_t r = next_u64();
            if (r >= threshold) return r % bound;
        }
    }

    double next_uniform(double lo, double hi) { return lo + (hi - lo) * next_unit(); }

    /// Standard normal via the Marsaglia polar method (no libm cos/sin).
    double next_gaussian() {
        if (has_spare_) {
            has_spare_ = false;
            return spare_;
        }
        double u, v, s;
        do {
            u = 2.0 * next_unit() - 1.0;
            v = 2.0 * next_unit() - 1.0;
            s = u * u + v * v;
        } while (s >= 1.0 || s == 0.0);
        const double f = std::sqrt(-2.0 * std::log(s) / s);
        spare_ = v * f;
        has_spare_ = true;
        return u * f;
    }

private:
    std::uint64_t state_;
    double spare_ = 0.0;
    bool has_spare_ = false;
};

/// k distinct indices from [0, n), uniform without replacement
/// (partial Fisher-Yates). Result sorted ascending.
std::vector<std::size_t> sample_indices(std::size_t n, std::size_t k, Rng& rng);

} // namespace zsl
