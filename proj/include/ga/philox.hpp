#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC 2011).
// Streams are keyed by (seed, path, step), so any increment can be
// regenerated in O(1) without touching shared state. This is what makes
// path simulation reproducible independent of the number of workers.

#include <cmath>
#include <cstdint>

namespace ga {

namespace detail {

inline void philox_round(uint32_t counter[4], const uint32_t key[2]) {
    constexpr uint32_t kM0 = 0xD2511F53u;
    constexpr uint32_t kM1 = 0xCD9E8D57u;
    const uint64_t p0 = static_cast<uint64_t>(kM0) * counter[0];
    const uint64_t p1 = static_cast<uint64_t>(kM1) * counter[2];
    const uint32_t hi0 = static_cast<uint32_t>(p0 >> 32);
    const uint32_t lo0 = static_cast<uint32_t>(p0);
    const uint32_t hi1 = static_cast<uint32_t>(p1 >> 32);
    const uint32_t lo1 = static_cast<uint32_t>(p1);
    const uint32_t out[4] = {hi1 ^ counter[1] ^ key[0], lo1,
                             hi0 ^ counter[3] ^ key[1], lo0};
    counter[0] = out[0];
    counter[1] = out[1];
    counter[2] = out[2];
    counter[3] = out[3];
}

} // namespace detail

struct PhiloxBlock {
    uint32_t word[4];
};

// One 128-bit block for counter = (ctr0, ctr1, ctr2, ctr3), key from seed.
inline PhiloxBlock philox4x32(uint64_t seed, uint32_t c0, uint32_t c1, uint32_t c2,
                              uint32_t c3) {
    constexpr uint32_t kW0 = 0x9E3779B9u;
    constexpr uint32_t kW1 = 0xBB67AE85u;
    uint32_t counter[4] = {c0, c1, c2, c3};
    uint32_t key[2] = {static_cast<uint32_t>(seed), static_cast<uint32_t>(seed >> 32)};
    for (int round = 0; round < 10; ++round) {
        detail::philox_round(counter, key);
        key[0] += kW0;
        key[1] += kW1;
    }
    return PhiloxBlock{{counter[0], counter[1], counter[2], counter[3]}};
}

// Uniform double in (0,1) with 53-bit resolution from two 32-bit words.
inline double uniform_from_words(uint32_t a, uint32_t b) {
    const uint64_t bits = (static_cast<uint64_t>(a) << 21) ^ (static_cast<uint64_t>(b) >> 11);
    return (static_cast<double>(bits & ((1ull << 53) - 1)) + 0.5) * 0x1p-53;
}

// Standard normal draw number `dim` of the stream (seed, path, step).
// Consecutive dims share Philox blocks pairwise via Box-Muller.
inline double philox_normal(uint64_t seed, uint64_t path, uint32_t step, uint32_t dim) {
    const uint32_t block = dim >> 1;
    const PhiloxBlock r = philox4x32(seed, static_cast<uint32_t>(path),
                                     static_cast<uint32_t>(path >> 32), step, block);
    const double u1 = uniform_from_words(r.word[0], r.word[1]);
    const double u2 = uniform_from_words(r.word[2], r.word[3]);
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    return (dim & 1u) ? radius * std::sin(angle) : radius * std::cos(angle);
}

// Uniform double in (0,1) for non-simulation uses (solver start vectors,
// test fixtures). Stream keyed the same way.
inline double philox_uniform(uint64_t seed, uint64_t path, uint32_t step, uint32_t dim) {
    const PhiloxBlock r = philox4x32(seed, static_cast<uint32_t>(path),
                                     static_cast<uint32_t>(path >> 32), step, dim);
    return uniform_from_words(r.word[0], r.word[1]);
}

} // namespace ga
