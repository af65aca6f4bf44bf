#pragma once

#include <cstdint>
#include <random>
#include <string_view>

namespace encsim {

// FNV-1a over the id bytes. Used instead of std::hash so node-stream
// derivation is stable across standard libraries.
inline std::uint64_t fnv1a64(std::string_view s) {
    std::uint64_t h = 0xcbf29ce484222325ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t mix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ull;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
    return x ^ (x >> 31);
}

// Seeded stream with explicit draw helpers; mt19937_64 output is
// standard-defined, and sampling avoids std::uniform_* distributions whose
// algorithms vary between library implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : engine_(seed) {}

    // Derives the per-entity stream for `id` from a run seed.
    static Rng for_node(std::uint64_t run_seed, std::string_view id) {
        return Rng(mix64(mix64(run_seed) ^ fnv1a64(id)));
    }

    std::uint64_t next_u64() { return engine_(); }

    // Uniform in [0, 1).
    double next_double() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) { return lo + (hi - lo) * next_double(); }

    // Uniform index in [0, n); n must be > 0.
    std::size_t index(std::size_t n) {
        auto i = static_cast<std::size_t>(next_double() * static_cast<double>(n));
        return i < n ? i : n - 1;
    }

  private:
    std::mt19937_64 engine_;
};

}  // namespace encsim
