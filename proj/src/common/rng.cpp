// SPDX-License-Identifier: Apache-2.0
#include "sfa/rng.hpp"

#include <cmath>
#include <numbers>

namespace sfa {

double CounterRng::normal() noexcept {
  double u1 = uniform();
  const double u2 = uniform();
  if (u1 < 0x1.0p-60) u1 = 0x1.0p-60;
  return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * std::numbers::pi * u2);
}

}  // namespace sfa
