// SPDX-License-Identifier: Apache-2.0
#include "sfa/tensor/autograd.hpp"

#include <algorithm>
#include <atomic>
#include <unordered_set>

#include "sfa/errors.hpp"

namespace sfa {

namespace {

thread_local bool g_grad_enabled = true;
std::atomic<std::uint64_t> g_node_counter{0};

}  // namespace

Tensor& detail::Node::ensure_grad() {
  if (grad.numel() != value.numel() || grad.shape() != value.shape()) grad = Tensor(value.shape());
  return grad;
}

Var::Var() : Var(Tensor{}, false) {}

Var::Var(Tensor value, bool requires_grad) : node_(std::make_shared<detail::Node>()) {
  node_->value = std::move(value);
  node_->requires_grad = requires_grad;
  node_->order = g_node_counter.fetch_add(1, std::memory_order_relaxed) + 1;
}

Tensor Var::grad() const {
  if (node_->grad.numel() == node_->value.numel() && node_->grad.shape() == node_->value.shape()) {
    return node_->grad;
  }
  return Tensor(node_->value.shape());
}

void Var::zero_grad() {
  if (node_->grad.numel() != 0) node_->grad.fill(0.0);
}

Var Var::from_op(Tensor value, std::vector<Var> parents, std::function<void(detail::Node&)> backward_fn) {
  if (!value.all_finite()) throw NumericError("non-finite value produced by tensor op");
  Var out(std::move(value), false);
  if (!g_grad_enabled) return out;
  bool any = std::any_of(parents.begin(), parents.end(), [](const Var& p) { return p.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->parents.reserve(parents.size());
  for (auto& p : parents) out.node_->parents.push_back(p.node_);
  out.node_->backward_fn = std::move(backward_fn);
  return out;
}

void backward(const Var& root) {
  if (root.value().numel() != 1) throw DimensionError("backward() without seed needs a scalar root");
  backward(root, Tensor(root.shape(), 1.0));
}

void backward(const Var& root, const Tensor& seed) {
  if (!root.requires_grad()) return;
  if (seed.shape() != root.shape()) throw DimensionError("backward seed shape mismatch");
  // Collect the reachable graph; replaying in decreasing creation order is a
  // valid reverse topological order because parents are always older.
  std::vector<detail::Node*> tape;
  std::unordered_set<detail::Node*> seen;
  std::vector<detail::Node*> stack{root.node().get()};
  while (!stack.empty()) {
    auto* n = stack.back();
    stack.pop_back();
    if (!seen.insert(n).second) continue;
    tape.push_back(n);
    for (auto& p : n->parents) {
      if (p->requires_grad) stack.push_back(p.get());
    }
  }
  std::sort(tape.begin(), tape.end(), [](auto* a, auto* b) { return a->order > b->order; });

  auto& g = root.node()->ensure_grad();
  for (std::size_t i = 0; i < g.numel(); ++i) g[i] += seed[i];
  for (auto* n : tape) {
    if (!n->backward_fn) continue;
    if (n->grad.numel() != n->value.numel()) continue;  // no gradient reached this node
    n->backward_fn(*n);
    n->grad = Tensor{};  // intermediate gradients are not retained
  }
}

bool grad_enabled() noexcept { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) { g_grad_enabled = false; }
NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

Var ParameterSet::add(std::string name, Tensor init) {
  if (contains(name)) throw ValidationError("duplicate parameter name '" + name + "'");
  params_.push_back(Parameter{std::move(name), Var(std::move(init), true)});
  return params_.back().var;
}

const Parameter& ParameterSet::at(const std::string& name) const {
  for (const auto& p : params_) {
    if (p.name == name) return p;
  }
  throw ValidationError("unknown parameter '" + name + "'");
}

Parameter& ParameterSet::at(const std::string& name) {
  return const_cast<Parameter&>(std::as_const(*this).at(name));
}

bool ParameterSet::contains(const std::string& name) const {
  return std::any_of(params_.begin(), params_.end(), [&](const Parameter& p) { return p.name == name; });
}

std::size_t ParameterSet::scalar_count() const {
  std::size_t n = 0;
  for (const auto& p : params_) n += p.var.value().numel();
  return n;
}

void ParameterSet::zero_grad() {
  for (auto& p : params_) p.var.zero_grad();
}

std::vector<Tensor> ParameterSet::snapshot() const {
  std::vector<Tensor> out;
  out.reserve(params_.size());
  for (const auto& p : params_) out.push_back(p.var.value());
  return out;
}

}  // namespace sfa
