#pragma once

// Portable random streams. Everything here produces identical sequences on
// every platform and standard library: the engine is std::mt19937_64 (whose
// output sequence is fixed by the standard) and all derived draws are
// implemented locally instead of through <random> distributions.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace activesplit {

inline constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline constexpr std::uint64_t fnv1a64(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Combine a seed with one more value into an independent-looking seed.
inline constexpr std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t value) noexcept {
    return splitmix64(splitmix64(seed) ^ (value + 0x632be59bd9b4e019ULL));
}

/// Sub-seed for one (dataset, iteration) pair. Depends only on its
/// arguments, never on scheduling order.
inline constexpr std::uint64_t derive_seed(std::uint64_t master, std::string_view name,
                                           std::uint64_t index) noexcept {
    return mix_seed(mix_seed(master, fnv1a64(name)), index);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) : engine_(splitmix64(seed)) {}

    std::uint64_t next_u64() { return engine_(); }

    /// Uniform integer in [0, bound). Unbiased (rejection on the top slice).
    std::uint64_t uniform_index(std::uint64_t bound) {
        const std::uint64_t limit = bound * (UINT64_MAX / bound);
        std::uint64_t x;
        do {
            x = engine_();
        } while (x >= limit);
        return x % bound;
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

    /// Standard normal via Box-Muller (one value per call, second discarded).
    double normal() {
        double u1 = 0.0;
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
    }

    bool bernoulli(double p) { return uniform() < p; }

    /// Fisher-Yates shuffle.
    template <class Range>
    void shuffle(Range& r) {
        const auto n = static_cast<std::uint64_t>(std::size(r));
        for (std::uint64_t i = n; i > 1; --i) {
            const auto j = uniform_index(i);
            using std::swap;
            swap(r[i - 1], r[j]);
        }
    }

private:
    std::mt19937_64 engine_;
};

/// floor(x) that absorbs representation error such as (1 - 0.9) * 100.
inline long long stable_floor(double x) noexcept {
    return static_cast<long long>(std::floor(x + 1e-9 * std::max(1.0, std::fabs(x))));
}

}  // namespace activesplit
