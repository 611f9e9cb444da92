#pragma once

#include <cmath>
#include <cstdint>
#include <cstring>
#include <span>
#include <string_view>

namespace snp {

// SplitMix64 (Steele, Lea, Vigna). This exact stream is the project's
// language-neutral source of deterministic randomness: toy backend
// parameters, prompt embeddings, and initial latents all draw from it,
// so an independent implementation can reproduce them bit for bit.
struct SplitMix64 {
    uint64_t state = 0;

    explicit SplitMix64(uint64_t seed) : state(seed) {}

    uint64_t next() {
        uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    // Uniform double in [0, 1), top 53 bits.
    double next_unit() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

    // Uniform float in [lo, hi); mapped in double, then narrowed.
    float next_in(double lo, double hi) {
        return static_cast<float>(lo + (hi - lo) * next_unit());
    }
};

// FNV-1a, 64-bit. Used for run ids, prompt hashing, and the toy backend
// parameter checksum.
struct Fnv1a64 {
    static constexpr uint64_t kOffset = 0xcbf29ce484222325ULL;
    static constexpr uint64_t kPrime = 0x100000001b3ULL;

    uint64_t hash = kOffset;

    void update(const void* data, size_t len) {
        const auto* p = static_cast<const unsigned char*>(data);
        for (size_t i = 0; i < len; ++i) {
            hash ^= p[i];
            hash *= kPrime;
        }
    }
    void update(std::string_view s) { update(s.data(), s.size()); }

    // Feeds a float as its 4 little-endian bytes.
    void update_f32_le(float v) {
        uint32_t bits;
        std::memcpy(&bits, &v, sizeof bits);
        unsigned char b[4] = {
            static_cast<unsigned char>(bits & 0xff),
            static_cast<unsigned char>((bits >> 8) & 0xff),
            static_cast<unsigned char>((bits >> 16) & 0xff),
            static_cast<unsigned char>((bits >> 24) & 0xff),
        };
        update(b, 4);
    }
};

inline uint64_t fnv1a64(std::string_view s) {
    Fnv1a64 h;
    h.update(s);
    return h.hash;
}

// Standard normal stream via Box-Muller over SplitMix64 uniforms.
// Deterministic for a given seed within one build; not part of the
// cross-implementation bit-exactness contract (it uses libm).
struct GaussianStream {
    SplitMix64 rng;
    bool have_spare = false;
    double spare = 0.0;

    explicit GaussianStream(uint64_t seed) : rng(seed) {}

    float next() {
        if (have_spare) {
            have_spare = false;
            return static_cast<float>(spare);
        }
        double u1 = 1.0 - rng.next_unit();  // (0, 1]
        double u2 = rng.next_unit();
        double r = std::sqrt(-2.0 * std::log(u1));
        double a = 2.0 * M_PI * u2;
        spare = r * std::sin(a);
        have_spare = true;
        return static_cast<float>(r * std::cos(a));
    }
};

}  // namespace snp
