#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace fairgen {

using Rng = std::mt19937_64;

// splitmix64 finalizer; good avalanche and cheap.
inline std::uint64_t mix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ULL;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derive an independent stream seed from a master seed and an index path,
// e.g. derive_seed(master, {n, z_idx, r_idx}). Cells seeded this way are
// reproducible regardless of scheduling order.
inline std::uint64_t derive_seed(std::uint64_t master, std::initializer_list<std::uint64_t> path) {
    std::uint64_t h = mix64(master);
    for (std::uint64_t p : path) h = mix64(h ^ mix64(p + 0x1234abcd9876ef01ULL));
    return h;
}

}  // namespace fairgen
