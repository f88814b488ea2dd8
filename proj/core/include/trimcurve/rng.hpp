#pragma once

// Deterministic stream derivation: every consumer of randomness builds its
// own engine from (master seed, purpose tag, indices), so results do not
// depend on scheduling or on how many draws other consumers made.

#include <cstdint>
#include <random>

namespace trimcurve {

// splitmix64 finalizer; good avalanche, cheap, stable across platforms.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag) {
    return mix64(master ^ mix64(tag));
}

inline std::uint64_t derive_seed(std::uint64_t master, std::uint64_t tag, std::uint64_t index) {
    return mix64(derive_seed(master, tag) ^ mix64(index + 0x51ed2701ULL));
}

inline std::mt19937_64 make_engine(std::uint64_t seed) {
    return std::mt19937_64(seed);
}

// Purpose tags; fixed numbers so streams stay stable across refactors.
namespace stream {
inline constexpr std::uint64_t kDataset = 1;
inline constexpr std::uint64_t kNoisePi = 2;
inline constexpr std::uint64_t kNoiseMu = 3;
inline constexpr std::uint64_t kTruth = 4;
inline constexpr std::uint64_t kCrossfit = 5;
inline constexpr std::uint64_t kReplication = 6;
inline constexpr std::uint64_t kWeighting = 7;
} // namespace stream

} // namespace trimcurve
