#pragma once

#include <cstdint>

namespace innoprot {

// Stateless counter-based stream: the draw for (seed, run, step) never
// depends on how many other draws were made or in which order.
constexpr std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

constexpr std::uint64_t counter_hash(std::uint64_t seed, std::uint64_t run, std::uint64_t step) {
    return splitmix64(splitmix64(splitmix64(seed) ^ run) ^ (step * 0xd1b54a32d192ed03ULL));
}

/// Uniform double in [0, 1) with 53 random bits.
constexpr double counter_uniform(std::uint64_t seed, std::uint64_t run, std::uint64_t step) {
    return static_cast<double>(counter_hash(seed, run, step) >> 11) * 0x1.0p-53;
}

}  // namespace innoprot
