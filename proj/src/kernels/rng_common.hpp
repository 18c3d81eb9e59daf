// Bit-level helpers shared by the scalar and SIMD normal generators.
#pragma once

#include "sketchreg/random.hpp"

#include <cstdint>

namespace sketchreg::kernels::detail {

inline constexpr std::uint64_t kGolden = 0x9e3779b97f4a7c15ULL;
/// Ziggurat layer index bits (256 layers).
inline constexpr std::uint64_t kLayerMask = 0xFF;

/// (v + 0.5) * 2^-52 with v the top 52 bits; every step is exact.
inline double unit52(std::uint64_t bits) noexcept {
    return (static_cast<double>(static_cast<std::int64_t>(bits >> 12)) + 0.5) * 0x1.0p-52;
}

} // namespace sketchreg::kernels::detail
