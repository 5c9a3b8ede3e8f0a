// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfa/action/action.hpp"
#include "sfa/model/generate.hpp"
#include "sfa/model/transformer.hpp"
#include "sfa/sim/episode.hpp"

namespace sfa {

struct StepTrace {
  PathLabel path_taken = PathLabel::Fast;
  std::optional<ActionDecision> action;  // empty on a parse failure
  std::string action_text;
  std::string parse_error;
  std::int64_t us_elapsed = 0;
  std::size_t token_count = 0;  // slots appended after the prompt
  std::size_t perception_invocations = 0;
  std::size_t bop_emitted = 0;
};

/// One step of the loop: prompt, latent span, decision, optional perception
/// frame, action. Malformed output is recorded, never thrown.
StepTrace predict_step(const LatentTransformer& model, const PixelImage& screen, std::string_view goal,
                       std::span<const std::string> history, DecisionMode mode,
                       const GenerateOptions& extra = {});
StepTrace predict_step(const LatentTransformer& model, const Screen& screen, std::string_view goal,
                       std::span<const std::string> history, DecisionMode mode);

struct EpisodeRun {
  std::vector<StepTrace> traces;
  std::vector<std::vector<std::string>> histories;  // window seen at each step
};

/// Teacher-forced by default: the history window slides over ground truth.
/// Closed loop feeds back the model's own action text.
EpisodeRun run_episode(const LatentTransformer& model, const Episode& episode, DecisionMode mode,
                       bool closed_loop = false);

struct TraceRecord {
  std::size_t episode_id = 0;
  std::size_t step = 0;
  DecisionMode mode = DecisionMode::Adaptive;
  PathLabel path = PathLabel::Fast;
  std::string action_text;
  std::int64_t us_elapsed = 0;
  std::size_t tokens = 0;
};

TraceRecord trace_record(std::size_t episode_id, std::size_t step, DecisionMode mode, const StepTrace& t);
/// {episode_id, step, mode, path, action_text, us_elapsed, tokens}, one line.
std::string trace_to_json(const TraceRecord& r);
std::vector<TraceRecord> parse_trace_log(const std::string& text);

}  // namespace sfa
