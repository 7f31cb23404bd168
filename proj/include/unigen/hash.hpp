#pragma once

#include <cstdint>
#include <string_view>

namespace unigen {

// 64-bit FNV-1a. Used for token hashing in the featurizer; stable across
// platforms by construction.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= static_cast<std::uint64_t>(c);
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

// Counter-based seed split: seed for stream (a) derived from a master seed.
// Independent of evaluation order, so parallel and sequential generation
// agree sample-for-sample.
inline std::uint64_t seed_split(std::uint64_t master, std::uint64_t a) {
    return splitmix64(master ^ splitmix64(a + 0x9e3779b97f4a7c15ULL));
}

inline std::uint64_t seed_split(std::uint64_t master, std::uint64_t a, std::uint64_t b) {
    return seed_split(seed_split(master, a), b);
}

inline std::uint64_t seed_split(std::uint64_t master, std::uint64_t a, std::uint64_t b,
                                std::uint64_t c) {
    return seed_split(seed_split(master, a, b), c);
}

} // namespace unigen
