#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string_view>

namespace rcm {

using Engine = std::mt19937_64;

namespace detail {

constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t fnv1a(std::string_view s) noexcept {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (char c : s) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

}  // namespace detail

/// Reproducible substream addressed by (master seed, trial, level, purpose).
/// Distinct addresses give decorrelated engines; equal addresses give equal
/// engines no matter which thread asks for them.
struct SeededStream {
    std::uint64_t master_seed = 0;
    std::uint64_t trial = 0;
    std::uint64_t level = 0;
    std::string_view purpose = "default";

    std::uint64_t derived_seed() const noexcept {
        std::uint64_t h = detail::splitmix64(master_seed);
        h = detail::splitmix64(h ^ detail::fnv1a(purpose));
        h = detail::splitmix64(h ^ (trial * 0xd1b54a32d192ed03ULL));
        h = detail::splitmix64(h ^ (level * 0x8cb92ba72f3d8dd7ULL));
        return h;
    }

    Engine engine() const {
        std::seed_seq seq{static_cast<std::uint32_t>(derived_seed()),
                          static_cast<std::uint32_t>(derived_seed() >> 32)};
        return Engine(seq);
    }
};

/// Uniform on [0, 1) with 53 random bits.
inline double uniform01(Engine& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

/// Uniform on (0, 1]; safe to take the logarithm of.
inline double uniform_open0(Engine& rng) { return 1.0 - uniform01(rng); }

/// Unit-mean exponential by inversion.
inline double standard_exponential(Engine& rng) { return -std::log(uniform_open0(rng)); }

/// P(X > u) = (u / scale)^(-alpha) for u >= scale, by inversion.
inline double pareto(Engine& rng, double alpha, double scale) {
    return scale * std::pow(uniform_open0(rng), -1.0 / alpha);
}

/// Gamma(shape, 1). Shape 0 gives 0 and shape 1 uses the same inversion as
/// standard_exponential so single holds consume the stream identically.
inline double standard_gamma(Engine& rng, double shape) {
    if (shape <= 0.0) return 0.0;
    if (shape == 1.0) return standard_exponential(rng);
    std::gamma_distribution<double> dist(shape, 1.0);
    return dist(rng);
}

inline std::uint64_t poisson(Engine& rng, double mean) {
    if (mean <= 0.0) return 0;
    std::poisson_distribution<std::uint64_t> dist(mean);
    return dist(rng);
}

}  // namespace rcm
