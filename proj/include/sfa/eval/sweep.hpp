// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <span>
#include <string>
#include <vector>

#include "sfa/sim/corpus.hpp"
#include "sfa/train/trainer.hpp"

namespace sfa {

inline constexpr std::size_t kDefaultLatentSweep[] = {0, 4, 8, 16, 20};

struct SweepRow {
  std::size_t n_latent = 0;
  double ams = 0.0;
  double routing_accuracy = 0.0;
};

/// Full retrain per n_latent from the same seed, then Adaptive evaluation on
/// the held-out episodes. `max_samples` > 0 truncates the training samples.
std::vector<SweepRow> sweep_latent(const ModelConfig& base, const Corpus& train, std::span<const Episode> heldout,
                                   std::span<const std::size_t> n_values, const Recipe& recipe,
                                   std::size_t max_samples = 0, const TrainObserver& observer = {});

/// Headered "n_latent,ams,routing_accuracy" rows.
std::string sweep_plot_data(const std::vector<SweepRow>& rows);

}  // namespace sfa
