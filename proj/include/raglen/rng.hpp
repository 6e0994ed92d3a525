#pragma once

#include <cstdint>
#include <random>

namespace raglen {

// Unbiased bounded draw (rejection sampling). mt19937_64 output is pinned by
// the standard, so seeded sampling is identical across platforms.
inline std::uint64_t bounded_draw(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound <= 1) return 0;
    const std::uint64_t min = (0 - bound) % bound;  // 2^64 mod bound
    for (;;) {
        const std::uint64_t r = rng();
        if (r >= min) return r % bound;
    }
}

}  // namespace raglen
