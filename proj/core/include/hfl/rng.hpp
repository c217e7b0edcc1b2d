#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace hfl {

// splitmix64 step; the workhorse behind all seed derivation.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

// Derives an independent stream seed from a base seed and a path of tags.
// Every piece of randomness in a run flows through an explicit derivation
// like this, so results never depend on scheduling or shared engine state.
inline uint64_t derive_seed(uint64_t base, std::initializer_list<uint64_t> path) {
    uint64_t s = base;
    uint64_t acc = splitmix64(s);
    for (uint64_t tag : path) {
        s = acc ^ (tag + 0x9e3779b97f4a7c15ULL);
        acc = splitmix64(s);
    }
    return acc;
}

inline std::mt19937_64 make_engine(uint64_t seed) {
    return std::mt19937_64(seed);
}

}  // namespace hfl
