// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sfa/tensor/tensor.hpp"

namespace sfa {

namespace detail {

struct Node {
  Tensor value;
  Tensor grad;  // allocated lazily during backward
  bool requires_grad = false;
  std::uint64_t order = 0;  // creation index; backward replays in decreasing order
  std::vector<std::shared_ptr<Node>> parents;
  std::function<void(Node&)> backward_fn;

  Tensor& ensure_grad();
};

}  // namespace detail

/// Handle to a value in the differentiation graph. Copies share the node.
class Var {
 public:
  Var();
  explicit Var(Tensor value, bool requires_grad = false);

  const Tensor& value() const noexcept { return node_->value; }
  const Shape& shape() const noexcept { return node_->value.shape(); }
  std::size_t rows() const noexcept { return node_->value.rows(); }
  std::size_t cols() const noexcept { return node_->value.cols(); }
  bool requires_grad() const noexcept { return node_->requires_grad; }

  /// Accumulated gradient; zeros of the value's shape if backward has not reached it.
  Tensor grad() const;
  bool has_grad() const noexcept { return node_->grad.numel() != 0; }
  void zero_grad();

  /// Direct mutation is reserved for optimizers and checkpoint loading.
  Tensor& mutable_value() noexcept { return node_->value; }

  const std::shared_ptr<detail::Node>& node() const noexcept { return node_; }

  static Var from_op(Tensor value, std::vector<Var> parents,
                     std::function<void(detail::Node&)> backward_fn);

 private:
  explicit Var(std::shared_ptr<detail::Node> node) : node_(std::move(node)) {}
  std::shared_ptr<detail::Node> node_;
};

/// Runs reverse-mode differentiation from a scalar (or seeded) root. Leaf
/// gradients accumulate until zero_grad; intermediate gradients are released.
void backward(const Var& root);
void backward(const Var& root, const Tensor& seed);

bool grad_enabled() noexcept;

/// Disables graph recording for its lifetime (inference paths).
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

/// A named trainable tensor. Names are unique within a model and determine
/// checkpoint placement.
struct Parameter {
  std::string name;
  Var var;
};

class ParameterSet {
 public:
  Var add(std::string name, Tensor init);
  const Parameter& at(const std::string& name) const;
  Parameter& at(const std::string& name);
  bool contains(const std::string& name) const;

  std::span<Parameter> items() noexcept { return params_; }
  std::span<const Parameter> items() const noexcept { return params_; }
  std::size_t size() const noexcept { return params_.size(); }
  std::size_t scalar_count() const;

  void zero_grad();
  /// Deep copy of every value (used for freeze audits and snapshots).
  std::vector<Tensor> snapshot() const;

 private:
  std::vector<Parameter> params_;
};

}  // namespace sfa
