#pragma once

// Counter-based random numbers. Every draw is a pure function of
// (key, counter), so streams can be indexed by (seed, subinterval, step,
// particle) and evaluated from any thread in any order.

#include <array>
#include <cstdint>

namespace mmpr {

using PhiloxCounter = std::array<std::uint32_t, 4>;
using PhiloxKey = std::array<std::uint32_t, 2>;

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
PhiloxCounter philox4x32(PhiloxCounter ctr, PhiloxKey key) noexcept;

/// Stream tags keep independent uses of one seed apart.
enum class StreamTag : std::uint32_t {
    Brownian = 1,
    Resample = 2,
    Initial = 3,
};

/// Fourth counter word: the tag in the low byte, a sub-stream index above.
constexpr std::uint32_t stream_word(StreamTag tag, std::uint32_t sub = 0) noexcept {
    return static_cast<std::uint32_t>(tag) | (sub << 8);
}

/// Two independent standard normals from one Philox block (Box-Muller).
std::array<double, 2> gaussian_pair(std::uint64_t seed, std::uint32_t stream,
                                    std::uint32_t a, std::uint32_t b, std::uint32_t c) noexcept;

/// Uniform in the open interval (0, 1) from 64 random bits.
double open_unit_interval(std::uint32_t hi, std::uint32_t lo) noexcept;

}  // namespace mmpr
