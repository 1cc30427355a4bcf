#pragma once

#include <cstdint>
#include <cmath>
#include <initializer_list>

namespace mogen {

// splitmix64, used for seeding and key mixing.
inline uint64_t splitmix64(uint64_t& state) {
    uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

inline uint64_t mix_key(uint64_t h, uint64_t k) {
    h ^= k + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
    uint64_t s = h;
    return splitmix64(s);
}

// FNV-1a, the published token/param-name hash. Stable across platforms.
inline uint64_t fnv1a(const char* s, size_t n) {
    uint64_t h = 0xcbf29ce484222325ULL;
    for (size_t i = 0; i < n; ++i) {
        h ^= static_cast<unsigned char>(s[i]);
        h *= 0x100000001b3ULL;
    }
    return h;
}

// xoshiro256** with an explicit Box-Muller normal. We never use <random>
// distributions: their output is implementation-defined and would break
// byte-reproducibility across toolchains.
class Rng {
public:
    explicit Rng(uint64_t seed) {
        uint64_t s = seed;
        for (auto& w : s_) w = splitmix64(s);
    }

    // Derive an independent stream from (seed, keys...). Streams are pure
    // functions of their keys, so parallel consumers stay deterministic.
    static Rng stream(uint64_t seed, std::initializer_list<uint64_t> keys) {
        uint64_t h = splitmix64(seed);
        for (uint64_t k : keys) h = mix_key(h, k);
        return Rng(h);
    }

    uint64_t next_u64() {
        const uint64_t result = rotl(s_[1] * 5, 7) * 9;
        const uint64_t t = s_[1] << 17;
        s_[2] ^= s_[0];
        s_[3] ^= s_[1];
        s_[1] ^= s_[2];
        s_[0] ^= s_[3];
        s_[2] ^= t;
        s_[3] = rotl(s_[3], 45);
        return result;
    }

    // [0, 1)
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    double uniform(double a, double b) { return a + (b - a) * uniform(); }

    // [0, n)
    uint64_t below(uint64_t n) {
        return static_cast<uint64_t>((static_cast<__uint128_t>(next_u64()) * n) >> 64);
    }

    double normal() {
        if (has_cached_) {
            has_cached_ = false;
            return cached_;
        }
        double u1 = uniform();
        if (u1 <= 0.0) u1 = 0x1.0p-53;
        const double u2 = uniform();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double a = 6.283185307179586476925286766559 * u2;
        cached_ = r * std::sin(a);
        has_cached_ = true;
        return r * std::cos(a);
    }

private:
    static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
    uint64_t s_[4];
    bool has_cached_ = false;
    double cached_ = 0.0;
};

// Stream purpose tags (keys for Rng::stream).
namespace rngkey {
inline constexpr uint64_t init = 1;
inline constexpr uint64_t batch = 2;
inline constexpr uint64_t timestep = 3;
inline constexpr uint64_t noise = 4;
inline constexpr uint64_t subset = 5;
inline constexpr uint64_t augment = 6;
inline constexpr uint64_t scene = 7;
inline constexpr uint64_t sampler = 8;
inline constexpr uint64_t gradcheck = 9;
}  // namespace rngkey

}  // namespace mogen
