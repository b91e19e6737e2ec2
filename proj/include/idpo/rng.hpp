// Seeded deterministic RNG and Gaussian sampling.
//
// Generator: xoshiro256++ (Blackman & Vigna), seeded by running splitmix64
// four times over the user seed. The full state transition is spelled out
// below so the stream can be reproduced in any language:
//
//   splitmix64(z): z += 0x9E3779B97F4A7C15;
//                  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9;
//                  z = (z ^ (z >> 27)) * 0x94D049BB133111EB;
//                  return z ^ (z >> 31)
//
//   next(): result = rotl(s0 + s3, 23) + s0
//           t = s1 << 17
//           s2 ^= s0; s3 ^= s1; s1 ^= s2; s0 ^= s3; s2 ^= t
//           s3 = rotl(s3, 45)
//
// Uniform doubles take the top 53 bits of next(). Gaussians use the
// Box-Muller transform, two uniforms per pair of outputs, no cached spare
// across calls. Identical seed gives a bitwise identical stream on every
// platform.

#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <stdexcept>
#include <string_view>
#include <vector>

#include "idpo/array.hpp"

namespace idpo {

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t& z) {
    z += 0x9E3779B97F4A7C15ULL;
    std::uint64_t r = z;
    r = (r ^ (r >> 30)) * 0xBF58476D1CE4E5B9ULL;
    r = (r ^ (r >> 27)) * 0x94D049BB133111EBULL;
    return r ^ (r >> 31);
}

inline std::uint64_t rotl64(std::uint64_t x, int k) {
    return (x << k) | (x >> (64 - k));
}

} // namespace detail

struct RngState {
    std::uint64_t seed = 0;
    std::uint64_t s[4] = {0, 0, 0, 0};

    RngState() : RngState(0) {}

    explicit RngState(std::uint64_t seed_value) : seed(seed_value) {
        std::uint64_t z = seed_value;
        for (auto& word : s) word = detail::splitmix64(z);
    }

    std::uint64_t next() {
        const std::uint64_t result = detail::rotl64(s[0] + s[3], 23) + s[0];
        const std::uint64_t t = s[1] << 17;
        s[2] ^= s[0];
        s[3] ^= s[1];
        s[1] ^= s[2];
        s[0] ^= s[3];
        s[2] ^= t;
        s[3] = detail::rotl64(s[3], 45);
        return result;
    }

    // Uniform in [0, 1), 53-bit resolution.
    double uniform01() {
        return static_cast<double>(next() >> 11) * 0x1.0p-53;
    }

    // Uniform in (0, 1]; safe as a log argument.
    double uniform_pos() {
        return static_cast<double>((next() >> 11) + 1) * 0x1.0p-53;
    }

    // Unbiased integer in [0, n) by rejection.
    std::uint64_t below(std::uint64_t n) {
        if (n == 0) throw std::invalid_argument("RngState::below: n must be positive");
        const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
        for (;;) {
            const std::uint64_t x = next();
            if (x < limit) return x % n;
        }
    }
};

// Independent substream for a named purpose ("eval", "shuffle", ...) so
// consumers cannot perturb each other's draws.
inline RngState derive_stream(std::uint64_t seed, std::string_view tag) {
    std::uint64_t h = 0xcbf29ce484222325ULL; // FNV-1a
    for (char c : tag) {
        h ^= static_cast<unsigned char>(c);
        h *= 0x100000001b3ULL;
    }
    return RngState(seed ^ h);
}

// I.i.d. standard normal entries via Box-Muller. Draws ceil(n/2) uniform
// pairs; an odd tail consumes a full pair and discards the sine half.
inline DenseArray gaussian_sample(RngState& rng, const std::vector<std::size_t>& shape) {
    if (shape.empty()) {
        throw std::invalid_argument("gaussian_sample: empty shape");
    }
    for (std::size_t d : shape) {
        if (d == 0) throw std::invalid_argument("gaussian_sample: zero-sized dimension");
    }
    DenseArray out(shape);
    const std::size_t n = out.size();
    for (std::size_t i = 0; i < n; i += 2) {
        const double u1 = rng.uniform_pos();
        const double u2 = rng.uniform01();
        const double r = std::sqrt(-2.0 * std::log(u1));
        const double angle = 2.0 * std::numbers::pi * u2;
        out.data[i] = r * std::cos(angle);
        if (i + 1 < n) out.data[i + 1] = r * std::sin(angle);
    }
    return out;
}

} // namespace idpo
