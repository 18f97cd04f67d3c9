#pragma once

#include <array>
#include <cstdint>

namespace silofl {

// Per-sample identifier circulated through the mixnet. 128 uniform random
// bits: collisions are negligible and abort setup if they ever occur.
inline constexpr std::size_t kTokenBytes = 16;
using Token = std::array<std::uint8_t, kTokenBytes>;

}  // namespace silofl
