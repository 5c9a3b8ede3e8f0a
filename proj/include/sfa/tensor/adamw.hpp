// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "sfa/tensor/autograd.hpp"

namespace sfa {

struct AdamWConfig {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
  double weight_decay = 0.01;
};

/// Decoupled weight decay: w -= lr * wd * w, then the bias-corrected Adam update.
class AdamW {
 public:
  explicit AdamW(AdamWConfig config) : config_(config) {}

  /// One update over every parameter accepted by `trainable`; rejected
  /// parameters are untouched (no decay either).
  void step(ParameterSet& params, const std::function<bool(const std::string&)>& trainable = {});

  std::uint64_t steps() const noexcept { return step_; }
  const AdamWConfig& config() const noexcept { return config_; }
  void set_lr(double lr) noexcept { config_.lr = lr; }

 private:
  struct Moments {
    Tensor m, v;
  };
  AdamWConfig config_;
  std::uint64_t step_ = 0;
  std::vector<Moments> moments_;  // parallel to the ParameterSet order
};

/// Single-tensor form of the same update, exposed for tests and tools.
void adamw_update(Tensor& weight, const Tensor& grad, Tensor& m, Tensor& v, std::uint64_t step,
                  const AdamWConfig& config);

}  // namespace sfa
