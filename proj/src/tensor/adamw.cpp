// SPDX-License-Identifier: Apache-2.0
#include "sfa/tensor/adamw.hpp"

#include <cmath>

#include "sfa/errors.hpp"

namespace sfa {

void adamw_update(Tensor& weight, const Tensor& grad, Tensor& m, Tensor& v, std::uint64_t step,
                  const AdamWConfig& c) {
  if (step == 0) throw ValidationError("adamw step counter starts at 1");
  if (grad.shape() != weight.shape()) throw DimensionError("adamw gradient shape mismatch");
  if (!grad.all_finite()) throw NumericError("adamw received a non-finite gradient");
  if (m.shape() != weight.shape()) m = Tensor(weight.shape());
  if (v.shape() != weight.shape()) v = Tensor(weight.shape());
  const double bc1 = 1.0 - std::pow(c.beta1, static_cast<double>(step));
  const double bc2 = 1.0 - std::pow(c.beta2, static_cast<double>(step));
  for (std::size_t i = 0; i < weight.numel(); ++i) {
    weight[i] -= c.lr * c.weight_decay * weight[i];
    m[i] = c.beta1 * m[i] + (1.0 - c.beta1) * grad[i];
    v[i] = c.beta2 * v[i] + (1.0 - c.beta2) * grad[i] * grad[i];
    const double mhat = m[i] / bc1;
    const double vhat = v[i] / bc2;
    weight[i] -= c.lr * mhat / (std::sqrt(vhat) + c.eps);
  }
}

void AdamW::step(ParameterSet& params, const std::function<bool(const std::string&)>& trainable) {
  ++step_;
  if (moments_.size() != params.size()) moments_.resize(params.size());
  auto items = params.items();
  for (std::size_t i = 0; i < items.size(); ++i) {
    auto& p = items[i];
    if (trainable && !trainable(p.name)) continue;
    adamw_update(p.var.mutable_value(), p.var.grad(), moments_[i].m, moments_[i].v, step_, config_);
  }
}

}  // namespace sfa
