#pragma once

#include <cstdint>

namespace refineq {

// Deterministic random stream used everywhere randomness is needed.
//
// Generator: xoshiro256** seeded through splitmix64. Stream splitting is by
// seed arithmetic: substream i of seed s is seeded with
// splitmix64_step(s + GOLDEN*(i+1)), GOLDEN = 0x9E3779B97F4A7C15. Uniform
// doubles take the top 53 bits: (r >> 11) * 2^-53, giving values in [0, 1).
// All of this is frozen so outputs are byte-reproducible across platforms.

inline std::uint64_t splitmix64_step(std::uint64_t& state) {
    state += 0x9E3779B97F4A7C15ULL;
    std::uint64_t z = state;
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

class Rng {
public:
    explicit Rng(std::uint64_t seed) {
        std::uint64_t sm = seed;
        for (auto& w : s_) w = splitmix64_step(sm);
    }

    std::uint64_t next_u64() {
        auto rotl = [](std::uint64_t v, int k) { return (v << k) | (v >> (64 - k)); };
        std::uint64_t result = rotl(s_[1] * 5, 7) * 9;
        std::uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // Uniform on [0, 1).
    double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    // Uniform on {0, ..., n-1} by rejection (unbiased).
    std::uint32_t next_below(std::uint32_t n) {
        std::uint64_t bound = ~std::uint64_t{0} - ~std::uint64_t{0} % n;
        std::uint64_t r;
        do {
            r = next_u64();
        } while (r >= bound);
        return static_cast<std::uint32_t>(r % n);
    }

private:
    std::uint64_t s_[4];
};

// Derives the seed of substream `index` from a base seed.
inline std::uint64_t substream_seed(std::uint64_t base, std::uint64_t index) {
    std::uint64_t state = base + 0x9E3779B97F4A7C15ULL * (index + 1);
    return splitmix64_step(state);
}

} // namespace refineq
