#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace gopsched {

// Pinned generator: std::mt19937_64, whose output sequence is fixed by the
// standard. Distributions are implemented here instead of using <random>'s,
// which are implementation-defined.
using Rng = std::mt19937_64;

// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Stream seed for (master, k0, k1, ...): h = mix64(master); h = mix64(h ^ k) per key.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> keys) noexcept {
    std::uint64_t h = mix64(master);
    for (auto k : keys) {
        h = mix64(h ^ k);
    }
    return h;
}

inline Rng make_stream(std::uint64_t master, std::initializer_list<std::uint64_t> keys) {
    return Rng(derive_seed(master, keys));
}

// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Rng &rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

// Marsaglia polar method; the second variate of each accepted pair is discarded
// so every call consumes a self-contained run of the stream.
inline double standard_normal(Rng &rng) {
    for (;;) {
        const double u = 2.0 * uniform01(rng) - 1.0;
        const double v = 2.0 * uniform01(rng) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) {
            return u * std::sqrt(-2.0 * std::log(s) / s);
        }
    }
}

inline double normal(Rng &rng, double mean, double stddev) { return mean + stddev * standard_normal(rng); }

inline double lognormal_median(Rng &rng, double median, double sigma) {
    return median * std::exp(sigma * standard_normal(rng));
}

inline double exponential(Rng &rng, double rate) { return -std::log1p(-uniform01(rng)) / rate; }

} // namespace gopsched
