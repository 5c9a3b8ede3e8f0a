// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <span>
#include <string>
#include <vector>

#include "sfa/agent/controller.hpp"
#include "sfa/eval/metrics.hpp"

namespace sfa {

/// Step-aligned outcome of one mode over an episode set (teacher-forced).
struct EvalRun {
  DecisionMode mode = DecisionMode::Adaptive;
  std::vector<StepTrace> traces;
  std::vector<ActionDecision> truth;
  std::vector<PathLabel> labels;
  std::vector<std::size_t> episode_ids;
  std::vector<std::size_t> steps;

  std::vector<std::optional<ActionDecision>> predictions() const;
  std::vector<PathLabel> paths() const;
  std::size_t perception_calls() const;
  std::size_t bop_count() const;
  std::size_t slow_traces() const;
  /// perception calls == <bop> count == Slow traces.
  bool accounting_holds() const { return perception_calls() == bop_count() && bop_count() == slow_traces(); }
  std::string trace_log() const;
};

EvalRun evaluate(const LatentTransformer& model, std::span<const Episode> episodes, DecisionMode mode);

/// AMS restricted to steps whose label is `label`.
AMSReport ams_on(const EvalRun& run, PathLabel label, double tau = kDefaultTau);

struct LatencyRow {
  DecisionMode mode = DecisionMode::Adaptive;
  std::size_t steps = 0;
  double mean_us = 0.0;
  double median_us = 0.0;
  double mean_tokens = 0.0;
  double ams = 0.0;
};

struct LatencyProfile {
  std::array<LatencyRow, 3> rows;  // fast, adaptive, slow
  bool ordering_checked = false;
  bool latency_ordered = false;  // mean fast < adaptive < slow
  bool tokens_ordered = false;   // per step fast <= adaptive <= slow
  std::string note;
  std::array<EvalRun, 3> runs;
};

/// The three modes run back to back on every step so drift hits them
/// alike. The first `warmup` steps are run and discarded.
LatencyProfile latency_profile(const LatentTransformer& model, std::span<const Episode> episodes,
                               std::size_t warmup = 3, double tau = kDefaultTau);

std::string latency_table(const LatencyProfile& p);

}  // namespace sfa
