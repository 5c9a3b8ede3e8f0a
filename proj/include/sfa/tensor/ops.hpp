// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sfa/tensor/autograd.hpp"

namespace sfa::ops {

// Every op validates shapes (DimensionError), never mutates its inputs, and
// throws NumericError if it produces a non-finite value.

Var matmul(const Var& a, const Var& b);
Var add(const Var& a, const Var& b);
Var sub(const Var& a, const Var& b);
Var mul(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
/// x[m x n] + bias broadcast over rows; bias has n elements.
Var add_row(const Var& x, const Var& bias);
/// x * W + b, with W stored [in x out].
Var linear(const Var& x, const Var& weight, const Var& bias);
Var gelu(const Var& x);
Var tanh(const Var& x);
Var layer_norm(const Var& x, const Var& gamma, const Var& beta, double eps = 1e-5);
Var softmax(const Var& x, std::size_t axis);
Var sum(const Var& x);
Var mean(const Var& x);

Var reshape(const Var& x, Shape shape);
/// Rows [begin, end) of a matrix view.
Var slice_rows(const Var& x, std::size_t begin, std::size_t end);
Var concat_rows(std::span<const Var> parts);
Var gather_rows(const Var& table, std::span<const std::size_t> rows);

/// softmax(Q K^T / sqrt(d_k)) V for one head. With causal masking, query row i
/// sits at absolute position q_offset + i and sees keys 0..q_offset + i.
Var scaled_attention(const Var& q, const Var& k, const Var& v, bool causal = false,
                     std::size_t q_offset = 0);

/// Fused multi-head variant: column blocks of Q/K/V are the heads.
Var multi_head_attention(const Var& q, const Var& k, const Var& v, std::size_t heads, bool causal,
                         std::size_t q_offset);

/// Mean negative log-likelihood over unmasked rows (loss_mask[i] == true means
/// the row contributes). All-masked input yields 0 with zero gradient.
Var masked_cross_entropy(const Var& logits, std::span<const std::int64_t> targets,
                         std::span<const bool> loss_mask);

/// Forward-only attention probabilities, for inspection dumps.
Tensor attention_weights(const Tensor& q, const Tensor& k, bool causal = false,
                         std::size_t q_offset = 0);

}  // namespace sfa::ops
