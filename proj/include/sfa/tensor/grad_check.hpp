// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>

#include "sfa/tensor/autograd.hpp"

namespace sfa {

struct GradCheckOptions {
  double eps = 1e-4;
  std::size_t coords_per_tensor = 64;  // all coordinates when the tensor is smaller
  std::uint64_t seed = 0;
};

struct GradCheckReport {
  double max_rel_error = 0.0;
  std::size_t coordinates = 0;
  std::string worst_parameter;
  std::size_t worst_index = 0;
};

/// Compares reverse-mode gradients of a scalar loss against central
/// differences, error = |analytic - numeric| / max(1, |numeric|).
/// The loss closure must be deterministic; it is re-run once per probe.
GradCheckReport grad_check(const std::function<Var()>& loss, std::span<Parameter> params,
                           const GradCheckOptions& options = {});

}  // namespace sfa
