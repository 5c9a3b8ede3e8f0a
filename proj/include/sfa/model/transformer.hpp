// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "sfa/model/config.hpp"
#include "sfa/model/sequence.hpp"
#include "sfa/perception/vpm.hpp"
#include "sfa/tensor/autograd.hpp"

namespace sfa {

/// Decoder-only transformer over mixed token / continuous slots.
class LatentTransformer {
 public:
  explicit LatentTransformer(const ModelConfig& config);
  LatentTransformer(const LatentTransformer&) = delete;
  LatentTransformer& operator=(const LatentTransformer&) = delete;

  const ModelConfig& config() const noexcept { return config_; }
  ParameterSet& params() noexcept { return params_; }
  const ParameterSet& params() const noexcept { return params_; }
  const PerceptionModule& vpm() const noexcept { return *vpm_; }

  /// Mean-pooled coarse patches projected to d_model, one row per patch.
  Var global_image(const PixelImage& image) const;
  Tensor encode_global_image(const PixelImage& image) const;

  /// g(h): identity, or the learned linear map.
  Var latent_map(const Var& h) const;
  Tensor latent_step(const Tensor& h_prev) const;

  Var head(const Var& hidden) const;

  struct Output {
    Tensor hidden;  // T x d_model
    Tensor logits;  // T x vocab
  };
  Output forward(const TokenSequence& seq) const;

  /// Mean cross-entropy over loss-flagged slots, each predicted from the
  /// previous position.
  Var loss(const TokenSequence& seq) const;

  /// (name, scalar count) per parameter plus the total.
  std::vector<std::pair<std::string, std::size_t>> census() const;
  std::size_t parameter_count() const { return params_.scalar_count(); }

 private:
  friend class Session;
  struct Block {
    Var ln1_g, ln1_b, q_w, q_b, k_w, k_b, v_w, v_b, o_w, o_b, ln2_g, ln2_b, up_w, up_b, down_w, down_b;
  };

  ModelConfig config_;
  ParameterSet params_;
  Var tok_emb_, pos_emb_, img_w_, img_b_, lat_w_, lat_b_, fln_g_, fln_b_, head_w_, head_b_;
  std::vector<Block> blocks_;
  std::unique_ptr<PerceptionModule> vpm_;
};

/// Incremental evaluation of one sequence. Slots are processed in blocks with
/// per-layer key/value caches; a block ends early when a placeholder slot
/// needs a hidden state from inside it (latent slots need t-1, perception
/// slots need the control state). Records a graph while grad mode is on.
class Session {
 public:
  Session(const LatentTransformer& model, std::shared_ptr<const PixelImage> image);

  void append(const Slot& slot);
  void append(std::span<const Slot> slots);
  void append_token(int id) { append(Slot::tokenized(id)); }

  std::size_t size() const noexcept { return slots_.size(); }
  const std::vector<Slot>& slots() const noexcept { return slots_; }

  /// Final-layer state at `pos` (1 x d_model); pos must be processed.
  Var hidden(std::size_t pos) const;
  /// All processed states stacked (size() x d_model).
  Var hidden_all() const;
  /// Vocabulary logits at `pos` (vocab entries).
  Tensor logits_at(std::size_t pos) const;

  /// Embedding the model used for a placeholder slot, once computed.
  Tensor resolved_embedding(std::size_t pos) const;

  std::size_t perception_calls() const noexcept { return perception_calls_; }
  /// Output of the most recent perception call.
  const std::optional<PerceptionOutput>& last_perception() const noexcept { return last_perception_; }

 private:
  struct Chunk {
    std::size_t begin, end;
    Var hidden;
  };
  void process();
  void run_block(std::size_t begin, std::size_t end);
  std::optional<std::size_t> control_dependency(std::size_t pos) const;
  const Var& injected_for(std::size_t ctrl_dep);

  const LatentTransformer& model_;
  std::shared_ptr<const PixelImage> image_;
  std::vector<Slot> slots_;
  std::size_t done_ = 0;
  std::vector<Chunk> chunks_;
  std::vector<Var> k_cache_, v_cache_;
  std::optional<Var> global_;
  std::optional<Var> fine_;
  std::optional<std::size_t> injected_dep_;
  Var injected_;
  std::vector<Tensor> resolved_;  // per position; empty unless a placeholder
  std::size_t perception_calls_ = 0;
  std::optional<PerceptionOutput> last_perception_;
};

}  // namespace sfa
