#pragma once

#include <cstdint>

namespace hqn {

// Stateless counter-based generator: every draw is a pure function of
// (seed, row, stage, counter), so rows can be generated in any order or on
// any thread and still reproduce bit-for-bit. The mixing function is the
// splitmix64 finalizer applied to a Weyl-sequence combination of the key.
class CounterRng {
public:
    explicit constexpr CounterRng(std::uint64_t seed) noexcept : seed_(seed) {}

    std::uint64_t seed() const noexcept { return seed_; }

    std::uint64_t bits(std::uint64_t row, std::uint32_t stage, std::uint32_t counter) const noexcept;

    // Uniform on (0, 1), 53-bit resolution, never exactly 0 or 1.
    double uniform(std::uint64_t row, std::uint32_t stage, std::uint32_t counter) const noexcept;

    // Standard normal via Box-Muller; consumes counters (2*index, 2*index+1).
    double normal(std::uint64_t row, std::uint32_t stage, std::uint32_t index) const noexcept;

private:
    std::uint64_t seed_;
};

std::uint64_t splitmix64_mix(std::uint64_t z) noexcept;

} // namespace hqn
