#pragma once

#include <cstdint>
#include <random>

namespace ctql {

// 53-bit uniform in [0, 1) with a fixed mapping, so seeded draws reproduce
// across standard libraries (std::uniform_real_distribution does not).
inline double uniform01(std::mt19937_64& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

}  // namespace ctql
