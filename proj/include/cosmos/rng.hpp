#pragma once

#include <cstdint>
#include <string_view>

namespace cosmos {

// All seeded randomness in the engine goes through this generator instead of
// <random> distributions, whose output is not pinned down by the standard.
// splitmix64 is fully specified, so identical seeds give identical streams on
// every platform.
class Rng {
public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1).
    double next_double() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    /// Uniform integer in [lo, hi], inclusive.
    std::int64_t next_int(std::int64_t lo, std::int64_t hi) {
        if (hi <= lo) return lo;
        const std::uint64_t span = static_cast<std::uint64_t>(hi - lo) + 1;
        return lo + static_cast<std::int64_t>(next() % span);
    }

    /// Uniform index in [0, n).
    std::size_t next_index(std::size_t n) {
        return n == 0 ? 0 : static_cast<std::size_t>(next() % n);
    }

private:
    std::uint64_t state_;
};

/// FNV-1a over arbitrary text; used to fold strings into seeds.
inline std::uint64_t fnv1a64(std::string_view text) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : text) {
        h ^= c;
        h *= 0x00000100000001b3ULL;
    }
    return h;
}

/// Deterministic seed derivation: mix a parent seed with a label.
inline std::uint64_t mix_seed(std::uint64_t seed, std::string_view label) {
    Rng r(seed ^ fnv1a64(label));
    return r.next();
}

} // namespace cosmos
