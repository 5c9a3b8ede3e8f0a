// SPDX-License-Identifier: Apache-2.0
#include "sfa/eval/sweep.hpp"

#include <cstdio>

#include "sfa/errors.hpp"
#include "sfa/eval/harness.hpp"

namespace sfa {

std::vector<SweepRow> sweep_latent(const ModelConfig& base, const Corpus& train, std::span<const Episode> heldout,
                                   std::span<const std::size_t> n_values, const Recipe& recipe,
                                   std::size_t max_samples, const TrainObserver& observer) {
  if (n_values.empty()) throw ValidationError("sweep needs at least one n_latent value");
  std::vector<SweepRow> rows;
  for (const auto n : n_values) {
    ModelConfig cfg = base;
    cfg.n_latent = n;
    cfg.validate();
    auto corpus = enhance_corpus(train, cfg);
    if (max_samples > 0) truncate_corpus(corpus, max_samples);
    LatentTransformer model(cfg);
    train_recipe(model, corpus, recipe, std::nullopt, observer);
    const auto run = evaluate(model, heldout, DecisionMode::Adaptive);
    rows.push_back({n, compute_ams(run.predictions(), run.truth).ams_percent,
                    path_stats(run.paths(), run.labels).routing_accuracy()});
  }
  return rows;
}

std::string sweep_plot_data(const std::vector<SweepRow>& rows) {
  std::string s = "n_latent,ams,routing_accuracy\n";
  for (const auto& r : rows) {
    char buf[96];
    std::snprintf(buf, sizeof buf, "%zu,%.4f,%.4f\n", r.n_latent, r.ams, r.routing_accuracy);
    s += buf;
  }
  return s;
}

}  // namespace sfa
