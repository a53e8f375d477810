// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <complex>
#include <cstdint>
#include <string_view>

#include "msense/core/constants.hpp"

namespace msense {

/// Deterministic 64-bit generator (splitmix64 core). All randomness in the
/// project flows through this type so that sessions are reproducible
/// bit-for-bit from a single seed, independent of the standard library's
/// distribution implementations.
class Rng {
  public:
    explicit Rng(std::uint64_t seed) : state_(seed) {}

    std::uint64_t next_u64() {
        std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
        z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
        z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
        return z ^ (z >> 31);
    }

    /// Uniform double in [0, 1) with 53 random bits.
    double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

    /// Standard normal via Box-Muller (no cached spare: keeps the stream
    /// position a pure function of the draw count).
    double gaussian() {
        double u1 = uniform();
        while (u1 <= 0.0) u1 = uniform();
        const double u2 = uniform();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(kTwoPi * u2);
    }

    /// Circularly symmetric complex normal with total variance `variance`.
    std::complex<double> complex_gaussian(double variance = 1.0) {
        const double s = std::sqrt(variance / 2.0);
        return {s * gaussian(), s * gaussian()};
    }

    /// FNV-1a hash, used to derive named substream seeds.
    static std::uint64_t hash(std::string_view text) {
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (const char c : text) {
            h ^= static_cast<std::uint8_t>(c);
            h *= 0x100000001b3ULL;
        }
        return h;
    }

    /// Independent substream keyed by (seed, name, index). Parallel and serial
    /// consumers of the same substream see identical values.
    static Rng substream(std::uint64_t seed, std::string_view name, std::uint64_t index = 0) {
        Rng mix(seed ^ hash(name));
        mix.state_ ^= 0x632be59bd9b4e019ULL * (index + 1);
        return Rng(mix.next_u64());
    }

  private:
    std::uint64_t state_;
};

} // namespace msense
