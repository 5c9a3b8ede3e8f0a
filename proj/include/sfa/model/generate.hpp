// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfa/action/action.hpp"
#include "sfa/model/transformer.hpp"

namespace sfa {

/// Incremental acceptor for the action wire format. Coordinates are
/// restricted to 0.dddd / 1.0000, lift repeats touch for CLICK and SELECT,
/// scrolls carry their canonical gesture, point-free types the sentinel, and
/// only TYPE takes text (printable, at most kMaxTypedText bytes).
class ActionGrammar {
 public:
  static constexpr std::size_t kMaxTypedText = 32;

  ActionGrammar();
  /// Tokens acceptable next; one entry means the step is forced.
  std::vector<int> allowed() const;
  /// Throws GenerationError when `token` is not allowed.
  void feed(int token);
  bool done() const noexcept { return done_; }
  std::optional<ActionType> type() const noexcept { return type_; }

 private:
  enum class Stage { Forced, TypeName, Coord, Text };
  void after_forced();

  Stage stage_ = Stage::Forced;
  std::vector<int> forced_;
  std::size_t forced_pos_ = 0;
  std::string name_;
  std::optional<ActionType> type_;
  std::string coord_;
  std::vector<std::string> coords_;
  std::string text_;
  bool done_ = false;
  int next_ = 0;  // continuation after the current forced run
};

enum class DecisionMode { Adaptive, ForceFast, ForceSlow };

std::string_view decision_mode_name(DecisionMode m) noexcept;
std::optional<DecisionMode> decision_mode_from_name(std::string_view name) noexcept;

struct GenerateOptions {
  std::size_t max_new = 512;
  DecisionMode mode = DecisionMode::Adaptive;
  /// Called once per perception invocation, after z_p is computed.
  std::function<void(const PerceptionOutput&)> on_perception;
  /// May edit the logits used for a free choice at `pos` (tests rig decisions).
  std::function<void(std::span<double> logits, std::size_t pos)> logit_hook;
};

struct Generation {
  TokenSequence sequence;  // prefix plus appended slots, continuous slots resolved
  std::size_t prefix_size = 0;
  std::size_t appended = 0;
  std::optional<PathLabel> decision;  // set once the decision point was passed
  std::string action_text;
  bool finished = false;  // reached <eos>
  std::size_t bop_count = 0;
  std::size_t perception_calls = 0;
  std::size_t logit_samples = 0;
  std::size_t latent_steps = 0;
};

/// Greedy grammar-constrained decoding. The engine forces <bot>, inserts
/// n_latent latent slots, forces <eot> and the request turn; the model then
/// chooses between <bop> and the first action byte. After <bop> the frame
/// <ctrl><eop>, the <detection_image> turn and the perception slots are
/// inserted before the action is decoded. A prefix may stop anywhere in
/// this structure; decoding resumes from there.
Generation generate(const LatentTransformer& model, const TokenSequence& prefix, const GenerateOptions& options = {});

}  // namespace sfa
