#pragma once

// Philox4x32-10 counter-based generator (Salmon et al., SC'11). All
// randomness in the library is a pure function of (key, counter), so results
// do not depend on the order in which work items are evaluated.

#include <array>
#include <cstdint>

namespace mlqmc {

class Philox4x32 {
  public:
    using Counter = std::array<std::uint32_t, 4>;
    using Key = std::array<std::uint32_t, 2>;

    explicit constexpr Philox4x32(Key key) : key_(key) {}
    explicit constexpr Philox4x32(std::uint64_t seed)
        : key_{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)} {}

    constexpr Counter operator()(Counter ctr) const {
        Key k = key_;
        for (int round = 0; round < 10; ++round) {
            if (round > 0) {
                k[0] += kW0;
                k[1] += kW1;
            }
            const std::uint64_t p0 = std::uint64_t{kM0} * ctr[0];
            const std::uint64_t p1 = std::uint64_t{kM1} * ctr[2];
            ctr = {static_cast<std::uint32_t>(p1 >> 32) ^ ctr[1] ^ k[0], static_cast<std::uint32_t>(p1),
                   static_cast<std::uint32_t>(p0 >> 32) ^ ctr[3] ^ k[1], static_cast<std::uint32_t>(p0)};
        }
        return ctr;
    }

  private:
    static constexpr std::uint32_t kM0 = 0xD2511F53u;
    static constexpr std::uint32_t kM1 = 0xCD9E8D57u;
    static constexpr std::uint32_t kW0 = 0x9E3779B9u;
    static constexpr std::uint32_t kW1 = 0xBB67AE85u;

    Key key_;
};

/// Uniform in (0,1) from one 32-bit word; never returns 0 or 1.
constexpr double open_uniform32(std::uint32_t w) { return (static_cast<double>(w) + 0.5) * 0x1p-32; }

/// Uniform in (0,1) on a 2^-52 grid from two words; the largest value is
/// 1 - 2^-53, so the result never rounds to 1.
constexpr double open_uniform52(std::uint32_t hi, std::uint32_t lo) {
    const std::uint64_t bits = ((std::uint64_t{hi} << 32) | lo) >> 12;
    return (static_cast<double>(bits) + 0.5) * 0x1p-52;
}

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
}

/// Derives an independent 64-bit seed for a named purpose.
constexpr std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t purpose) {
    return mix64(seed ^ mix64(purpose + 0x9E3779B97F4A7C15ull));
}

}  // namespace mlqmc
