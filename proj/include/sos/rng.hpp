#pragma once

// Deterministic, platform-portable randomness for simulations.
//
// Everything seeded flows through SplitMix64 (Steele, Lea & Flood 2014), a
// fully specified 64-bit generator: standard-library distributions are not
// bit-stable across implementations, so uniform sampling is done by hand
// here. Substreams are labeled so draw order cannot depend on event
// processing order.

#include <cstdint>
#include <string_view>

#include "sos/common.hpp"

namespace sos {

class SplitMix64 {
public:
    explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        state_ += 0x9e3779b97f4a7c15ULL;
        std::uint64_t z = state_;
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1): top 53 bits scaled by 2^-53.
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double lo, double hi) { return lo + next_double() * (hi - lo); }

    /// Unbiased integer in [0, n) via rejection sampling.
    std::uint64_t bounded(std::uint64_t n) {
        if (n == 0) return 0;
        const std::uint64_t threshold = (0 - n) % n;
        for (;;) {
            const std::uint64_t r = next_u64();
            if (r >= threshold) return r % n;
        }
    }

private:
    std::uint64_t state_;
};

/// Independent labeled stream: state = seed XOR FNV-1a(label).
inline SplitMix64 substream(std::uint64_t seed, std::string_view label) {
    return SplitMix64(seed ^ fnv1a64(label));
}

}  // namespace sos
