#include "hqn/random.hpp"

#include <cmath>
#include <numbers>

namespace hqn {

std::uint64_t splitmix64_mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * UINT64_C(0xBF58476D1CE4E5B9);
    z = (z ^ (z >> 27)) * UINT64_C(0x94D049BB133111EB);
    return z ^ (z >> 31);
}

std::uint64_t CounterRng::bits(std::uint64_t row, std::uint32_t stage, std::uint32_t counter) const noexcept {
    constexpr std::uint64_t kGolden = UINT64_C(0x9E3779B97F4A7C15);
    std::uint64_t h = splitmix64_mix(seed_ + kGolden);
    h = splitmix64_mix(h ^ (row + kGolden));
    const std::uint64_t tail = (static_cast<std::uint64_t>(stage) << 32) | counter;
    return splitmix64_mix(h ^ (tail + kGolden));
}

double CounterRng::uniform(std::uint64_t row, std::uint32_t stage, std::uint32_t counter) const noexcept {
    // (m + 0.5) / 2^53 lies strictly inside (0, 1)
    const std::uint64_t m = bits(row, stage, counter) >> 11;
    return (static_cast<double>(m) + 0.5) * 0x1.0p-53;
}

double CounterRng::normal(std::uint64_t row, std::uint32_t stage, std::uint32_t index) const noexcept {
    const double u1 = uniform(row, stage, 2 * index);
    const double u2 = uniform(row, stage, 2 * index + 1);
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

} // namespace hqn
