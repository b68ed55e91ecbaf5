#pragma once

#include "sdd/error.hpp"

#include <array>
#include <cmath>
#include <cstdint>

// =============================================================================
// Deterministic seeded RNG.
//
// Algorithm is fixed and documented so that streams are bit-reproducible
// across platforms and compilers:
//   - state:    xoshiro256++ (Blackman & Vigna), seeded via splitmix64
//   - uniforms: 53-bit mantissa construction, value in [0, 1)
//   - gaussians: Box-Muller, cosine branch only (two uniforms per draw,
//     no cached spare, so draw counts are independent of call order)
// =============================================================================

namespace sdd {

class Rng {
public:
    explicit Rng(std::uint64_t seed) : seed_(seed) {
        std::uint64_t s = seed;
        for (auto& word : state_) word = splitmix64(s);
    }

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t next_u64() noexcept {
        const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
        const std::uint64_t t = state_[1] << 17;
        state_[2] ^= state_[0];
        state_[3] ^= state_[1];
        state_[1] ^= state_[2];
        state_[0] ^= state_[3];
        state_[2] ^= t;
        state_[3] = rotl(state_[3], 45);
        return result;
    }

    // Uniform in [0, 1).
    double uniform01() noexcept {
        return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
    }

    // Uniform in [lo, hi).
    double uniform(double lo, double hi) {
        if (!(lo < hi)) throw DomainError("uniform: require lo < hi");
        return lo + (hi - lo) * uniform01();
    }

    // Standard normal draw. Consumes exactly two uniforms.
    double gaussian() noexcept {
        const double u1 = 1.0 - uniform01();  // (0, 1], keeps log finite
        const double u2 = uniform01();
        return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
    }

    // Independent child stream for concurrent use; deterministic in
    // (parent seed, stream index).
    Rng split(std::uint64_t stream_index) const {
        std::uint64_t s = seed_ ^ (0x9E3779B97F4A7C15ULL * (stream_index + 1));
        s = splitmix64(s);
        return Rng(s);
    }

private:
    static constexpr double kPi = 3.141592653589793238462643383279502884;

    static std::uint64_t rotl(std::uint64_t x, int k) noexcept {
        return (x << k) | (x >> (64 - k));
    }

    static std::uint64_t splitmix64(std::uint64_t& s) noexcept {
        s += 0x9E3779B97F4A7C15ULL;
        std::uint64_t z = s;
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
        z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
        return z ^ (z >> 31);
    }

    std::uint64_t seed_;
    std::array<std::uint64_t, 4> state_{};
};

}  // namespace sdd
