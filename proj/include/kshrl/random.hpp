#pragma once

#include <cstdint>
#include <random>

namespace kshrl {

using Rng = std::mt19937_64;

// splitmix64 finalizer; used to derive independent streams from one seed.
inline std::uint64_t mix_seed(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Seed for sub-stream `stream` of `seed` (grid index, fold, episode, ...).
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
    return mix_seed(seed ^ mix_seed(stream + 1));
}

inline Rng make_rng(std::uint64_t seed, std::uint64_t stream) {
    return Rng(derive_seed(seed, stream));
}

}  // namespace kshrl
