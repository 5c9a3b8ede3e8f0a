// SPDX-License-Identifier: Apache-2.0
#include "sfa/tensor/grad_check.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "sfa/errors.hpp"
#include "sfa/rng.hpp"

namespace sfa {

namespace {

double scalar_of(const Var& v) {
  if (v.value().numel() != 1) throw DimensionError("grad_check loss must be a scalar");
  const double x = v.value()[0];
  if (!std::isfinite(x)) throw NumericError("grad_check loss is not finite");
  return x;
}

}  // namespace

GradCheckReport grad_check(const std::function<Var()>& loss, std::span<Parameter> params,
                           const GradCheckOptions& options) {
  if (!(options.eps >= 1e-5 && options.eps <= 1e-2)) {
    throw ValidationError("grad_check eps must lie in [1e-5, 1e-2]");
  }
  for (auto& p : params) p.var.zero_grad();
  {
    Var root = loss();
    scalar_of(root);
    backward(root);
  }

  GradCheckReport report;
  CounterRng rng(options.seed);
  for (std::size_t pi = 0; pi < params.size(); ++pi) {
    auto& p = params[pi];
    const Tensor analytic = p.var.grad();
    const std::size_t n = p.var.value().numel();
    std::vector<std::size_t> coords(n);
    std::iota(coords.begin(), coords.end(), std::size_t{0});
    if (n > options.coords_per_tensor) {
      auto child = rng.split(pi);
      child.shuffle(std::span<std::size_t>(coords));
      coords.resize(options.coords_per_tensor);
    }
    for (std::size_t idx : coords) {
      double& slot = p.var.mutable_value()[idx];
      const double saved = slot;
      double plus = 0.0, minus = 0.0;
      {
        NoGradGuard guard;
        slot = saved + options.eps;
        plus = scalar_of(loss());
        slot = saved - options.eps;
        minus = scalar_of(loss());
      }
      slot = saved;
      const double numeric = (plus - minus) / (2.0 * options.eps);
      const double err = std::abs(analytic[idx] - numeric) / std::max(1.0, std::abs(numeric));
      ++report.coordinates;
      if (err > report.max_rel_error) {
        report.max_rel_error = err;
        report.worst_parameter = p.name;
        report.worst_index = idx;
      }
    }
  }
  return report;
}

}  // namespace sfa
