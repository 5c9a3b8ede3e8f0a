// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>

#include "sfa/model/config.hpp"
#include "sfa/model/sequence.hpp"
#include "sfa/rng.hpp"
#include "sfa/sim/corpus.hpp"
#include "sfa/tensor/autograd.hpp"

namespace sfa {

struct FineFeatureMap {
  Tensor features;  // P x d_f
  std::size_t rows = 0;
  std::size_t cols = 0;
};

struct PerceptionOutput {
  Tensor z_p;        // P x d_f
  Tensor attention;  // P x keys
};

/// Visual perception module: frozen fine patch encoder, cross-attention
/// projector (image features query keys/values derived from h_ctrl) and the
/// projection that injects z_p back as sequence slots.
class PerceptionModule {
 public:
  /// Registers vpm.* parameters in `params`.
  PerceptionModule(const ModelConfig& config, ParameterSet& params, CounterRng& rng);

  /// P x (fine_patch^2 * 3) matrix of centered pixel values, row-major patch order.
  Tensor patch_matrix(const PixelImage& image) const;
  FineFeatureMap encode_fine(const PixelImage& image) const;

  struct Graph {
    Var z_p;
    Var attention;  // empty unless requested
  };
  /// h_ctrl is 1 x d_model (or r x d_model with r control states).
  Graph cross_attend(const Var& f_img, const Var& h_ctrl) const;
  PerceptionOutput cross_attend(const FineFeatureMap& f, const Tensor& h_ctrl) const;

  /// Projects z_p (pooled per config) to slots x d_model.
  Var inject(const Var& z_p) const;
  Tensor project(const Tensor& z_p) const;

  /// Appends one perception slot per projected row, in patch order.
  void inject_features(TokenSequence& seq, const Tensor& z_p) const;

  const Var& patch_pos() const noexcept { return patch_pos_; }
  std::size_t key_width() const noexcept { return dk_; }

  static bool is_frozen(const std::string& name) noexcept { return name.rfind("vpm.encoder.", 0) == 0; }
  static bool is_projector(const std::string& name) noexcept { return name.rfind("vpm.proj_", 0) == 0; }

 private:
  Var pool(const Var& z_p) const;

  ModelConfig config_;
  std::size_t dk_;
  Var enc_w_, enc_b_;
  Var q_w_, q_b_, k_w_, k_b_, v_w_, v_b_, out_w_, out_b_;
  Var patch_pos_;
};

/// Writes the attention dump: patch grid, per-patch weights, chosen action.
std::string attention_dump_json(const PerceptionOutput& out, std::size_t grid_rows, std::size_t grid_cols,
                                const std::string& action_text);

}  // namespace sfa
