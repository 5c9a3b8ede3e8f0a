// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "sfa/data/enhancer.hpp"
#include "sfa/model/transformer.hpp"
#include "sfa/tensor/checkpoint.hpp"

namespace sfa {

enum class Phase { Align, Thought, Finetune };

std::string_view phase_name(Phase p) noexcept;
std::optional<Phase> phase_from_name(std::string_view name) noexcept;

struct PhaseConfig {
  Phase phase = Phase::Finetune;
  double lr = 2e-5;
  std::size_t batch = 8;
  std::size_t grad_accum = 1;
  std::size_t epochs = 10;
  std::uint64_t seed = 1;
  double weight_decay = 0.0;
  /// Thought phase: share of epochs spent with explicit thought bytes.
  double explicit_share = 0.5;

  /// lr 2e-3 / 3e-5 / 2e-5, epochs 3 / 6 / 10, batch 8.
  static PhaseConfig defaults(Phase p);
  std::string to_json() const;
};

/// Align trains the perception projector only; the frozen encoder never trains.
bool trainable(Phase phase, const std::string& name);

struct EpochLoss {
  Phase phase = Phase::Finetune;
  std::string stage;  // "explicit" / "latent" in the thought phase, else empty
  std::size_t epoch = 0;
  std::size_t samples = 0;
  std::size_t updates = 0;
  double first_loss = 0.0;  // mean over the first optimizer batch
  double mean_loss = 0.0;
};

std::string epoch_loss_json(const EpochLoss& e);

using TrainObserver = std::function<void(const EpochLoss&)>;

struct PhaseResult {
  std::vector<EpochLoss> trace;
  Checkpoint checkpoint;
};

/// Teacher-forced over the Slow samples only. Throws DataError when there are none.
PhaseResult phase_align(LatentTransformer& model, const EnhancedCorpus& corpus, const PhaseConfig& cfg,
                        const TrainObserver& observer = {});
/// Explicit stage on with_thought(s), then latent stage on latent_swap(s).
/// Throws DataError when a sample lacks its thought.
PhaseResult phase_thought(LatentTransformer& model, const EnhancedCorpus& corpus, const PhaseConfig& cfg,
                          const TrainObserver& observer = {});
PhaseResult phase_finetune(LatentTransformer& model, const EnhancedCorpus& corpus, const PhaseConfig& cfg,
                           const TrainObserver& observer = {});

/// Mean loss of the model over a sample list (no graph).
double mean_loss(const LatentTransformer& model, const std::vector<EnhancedSample>& samples);

struct Recipe {
  PhaseConfig align = PhaseConfig::defaults(Phase::Align);
  PhaseConfig thought = PhaseConfig::defaults(Phase::Thought);
  PhaseConfig finetune = PhaseConfig::defaults(Phase::Finetune);
  bool run_align = true;
  bool run_thought = true;
  bool run_finetune = true;

  /// Scaled to fit the single-core budget: fewer epochs, larger rates.
  static Recipe desk(std::uint64_t seed);
  static Recipe full(std::uint64_t seed);
  void set_seed(std::uint64_t seed);
  std::string to_json() const;
};

struct RunSummary {
  std::vector<EpochLoss> trace;
  std::string corpus_hash;
  std::vector<std::pair<std::string, std::string>> checkpoint_hashes;  // phase -> hex digest
};

/// Runs the enabled phases in order. With a run directory it writes
/// config.json, loss_trace.jsonl, checkpoints/<phase>.ckpt (+ model_config.json)
/// and manifest.json.
RunSummary train_recipe(LatentTransformer& model, const EnhancedCorpus& corpus, const Recipe& recipe,
                        const std::optional<std::filesystem::path>& run_dir = std::nullopt,
                        const TrainObserver& observer = {});

std::string corpus_hash(const EnhancedCorpus& corpus);

}  // namespace sfa
