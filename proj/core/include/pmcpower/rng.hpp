#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <vector>

namespace pmcpower {

// All randomness flows through mt19937_64, whose output stream is fully
// specified by the standard.  The standard *distributions* are not, so the
// few draws we need are derived from raw engine words here; results are then
// bit-identical across compilers, which the replayable-output contract needs.

// Unbiased draw in [0, bound) via rejection sampling.  bound == 0 returns 0.
inline std::uint64_t uniform_below(std::mt19937_64& rng, std::uint64_t bound) {
    if (bound == 0)
        return 0;
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % bound;
    for (;;) {
        const std::uint64_t v = rng();
        if (v < limit)
            return v % bound;
    }
}

// Uniform double in [0, 1) with 53 random bits.
inline double uniform_unit(std::mt19937_64& rng) {
    return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Standard normal via Box-Muller (cosine branch only; consumes two words).
inline double gaussian(std::mt19937_64& rng) {
    const double u1 = 1.0 - uniform_unit(rng); // (0, 1], keeps log() finite
    const double u2 = uniform_unit(rng);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

// In-place Fisher-Yates shuffle using uniform_below().
template <typename T>
void shuffle(std::vector<T>& v, std::mt19937_64& rng) {
    for (std::size_t i = v.size(); i > 1; --i) {
        const std::size_t j = static_cast<std::size_t>(uniform_below(rng, i));
        std::swap(v[i - 1], v[j]);
    }
}

} // namespace pmcpower
