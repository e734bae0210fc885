#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace drpl {

// All randomness in a run flows from one master seed. Sub-streams are
// derived by hashing a stream name into the seed, so e.g. the "noise"
// stream is independent of the "init" stream and stable across code
// changes that add or remove draws elsewhere.
inline std::uint64_t derive_seed(std::uint64_t master, std::string_view stream) {
    // FNV-1a over the stream name, then a splitmix64 finalizer.
    std::uint64_t h = 14695981039346656037ull;
    for (char c : stream) {
        h ^= static_cast<std::uint8_t>(c);
        h *= 1099511628211ull;
    }
    std::uint64_t z = master + 0x9e3779b97f4a7c15ull * (h | 1ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

using Rng = std::mt19937_64;

inline Rng make_rng(std::uint64_t master, std::string_view stream) {
    return Rng(derive_seed(master, stream));
}

inline double uniform_real(Rng& rng) {
    return std::uniform_real_distribution<double>(0.0, 1.0)(rng);
}

inline std::size_t uniform_index(Rng& rng, std::size_t n) {
    return std::uniform_int_distribution<std::size_t>(0, n - 1)(rng);
}

// Beta(a, a) via two gamma draws.
inline double beta_sample(Rng& rng, double a, double b) {
    std::gamma_distribution<double> ga(a, 1.0), gb(b, 1.0);
    double x = ga(rng), y = gb(rng);
    return x / (x + y);
}

}  // namespace drpl
