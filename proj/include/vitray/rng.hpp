#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <numbers>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace vitray {

// SplitMix64 (Steele/Lea/Flood). One 64-bit word of state and three
// shift-xor-multiply rounds, so the exact sequence is reproducible in any
// language from the seed alone. Every random decision in this project
// (splits, shuffles, weight init, synthetic noise) flows through this
// generator.
class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    /// Uniform in [0, 1) with 53-bit resolution.
    double next_double() {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    /// Uniform integer in [0, bound). Plain modulo reduction: the bias is
    /// below 2^-40 for the index ranges this project draws, and the
    /// reduction is trivial to reimplement elsewhere.
    std::uint64_t next_below(std::uint64_t bound) {
        return next_u64() % bound;
    }

    /// Standard normal via Box-Muller. Always consumes exactly two uniforms
    /// and returns the cosine branch, so stream position stays predictable.
    double next_gaussian() {
        double u1 = next_double();
        double u2 = next_double();
        double r = std::sqrt(-2.0 * std::log(1.0 - u1));
        return r * std::cos(2.0 * std::numbers::pi * u2);
    }

    /// Normal(0, sigma^2) resampled until within [-2 sigma, 2 sigma].
    double next_truncated_normal(double sigma) {
        for (;;) {
            double z = next_gaussian();
            if (z >= -2.0 && z <= 2.0) return sigma * z;
        }
    }

private:
    std::uint64_t state_;
};

/// FNV-1a 64-bit hash of a label, used to derive named sub-streams.
constexpr std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001B3ULL;
    }
    return h;
}

/// Independent named stream: state seeded with seed XOR fnv1a64(label).
/// Labels are documented at each call site (e.g. "split", "init",
/// "shuffle:<epoch>") so runs are reproducible end to end.
inline SplitMix64 seed_stream(std::uint64_t seed, std::string_view label) {
    return SplitMix64(seed ^ fnv1a64(label));
}

inline SplitMix64 seed_stream(std::uint64_t seed, std::string_view label, std::uint64_t index) {
    std::string tag(label);
    tag += ':';
    tag += std::to_string(index);
    return SplitMix64(seed ^ fnv1a64(tag));
}

/// Fisher-Yates shuffle driven by SplitMix64: walks i from n-1 down to 1
/// and swaps with j = next_below(i + 1).
template <typename T>
void shuffle(std::vector<T>& values, SplitMix64& rng) {
    for (std::size_t i = values.size(); i > 1; --i) {
        std::size_t j = static_cast<std::size_t>(rng.next_below(i));
        std::swap(values[i - 1], values[j]);
    }
}

} // namespace vitray
