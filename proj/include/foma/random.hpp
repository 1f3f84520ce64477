#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace foma {

using Rng = std::mt19937_64;

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Independent generator for a (seed, tag...) coordinate, e.g.
/// derive_stream(seed, {kAugmentStream, epoch, batch}).
inline Rng derive_stream(std::uint64_t seed, std::initializer_list<std::uint64_t> tags) {
    std::uint64_t h = splitmix64(seed);
    for (std::uint64_t t : tags) {
        h = splitmix64(h ^ splitmix64(t + 0x632be59bd9b4e019ULL));
    }
    return Rng(h);
}

/// Beta(a, b) through the ratio of two Gamma variates.
inline double sample_beta(double a, double b, Rng& rng) {
    std::gamma_distribution<double> ga(a, 1.0);
    std::gamma_distribution<double> gb(b, 1.0);
    for (;;) {
        const double x = ga(rng);
        const double y = gb(rng);
        if (x + y > 0.0) {
            return x / (x + y);
        }
    }
}

} // namespace foma
