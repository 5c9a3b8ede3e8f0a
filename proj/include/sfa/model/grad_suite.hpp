// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "sfa/tensor/grad_check.hpp"

namespace sfa {

struct GradSuiteEntry {
  std::string name;
  GradCheckReport report;
};

/// Central-difference check of every differentiable primitive and of the
/// full model loss on a small slow-path sample (learned latent map, all
/// three control keys, so every parameter is on the gradient path).
std::vector<GradSuiteEntry> gradient_suite(std::uint64_t seed, std::size_t coords_per_tensor = 64, double eps = 1e-4);

double max_rel_error(const std::vector<GradSuiteEntry>& entries);

}  // namespace sfa
