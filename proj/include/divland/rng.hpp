#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace divland {

using Rng = std::mt19937_64;

/// splitmix64 finalizer; used to mix structured seed paths into stream seeds.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept
{
    z += 0x9E3779B97F4A7C15ULL;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Derives an independent stream seed from a master seed and a path of
/// indices, e.g. (master, generation, individual, run). The result depends
/// only on the values, never on the order in which streams are requested.
constexpr std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) noexcept
{
    std::uint64_t s = mix64(master);
    for (auto p : path) {
        s = mix64(s ^ mix64(p + 0x632BE59BD9B4E019ULL));
    }
    return s;
}

inline Rng make_rng(std::uint64_t seed) { return Rng{seed}; }

inline double uniform(Rng& rng, double lo, double hi)
{
    return std::uniform_real_distribution<double>{lo, hi}(rng);
}

// Stream tags keep derived seeds for different purposes apart.
namespace stream {
inline constexpr std::uint64_t params = 1;
inline constexpr std::uint64_t episode = 2;
inline constexpr std::uint64_t offspring = 3;
inline constexpr std::uint64_t init = 4;
inline constexpr std::uint64_t pairs = 5;
inline constexpr std::uint64_t validation = 6;
} // namespace stream

} // namespace divland
