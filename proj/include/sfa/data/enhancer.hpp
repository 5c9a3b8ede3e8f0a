// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfa/action/action.hpp"
#include "sfa/model/config.hpp"
#include "sfa/model/sequence.hpp"
#include "sfa/sim/corpus.hpp"

namespace sfa {

inline constexpr int kEnhancedSchemaVersion = 1;
inline constexpr std::size_t kMaxThoughtBytes = 32;

struct ThoughtAnnotation {
  std::string text;
};

struct EnhancedSample {
  TokenSequence sequence;
  std::string image_ref;
  ActionDecision target_action;
  PathLabel path_label = PathLabel::Fast;
  std::vector<std::string> history;
  std::string goal;
  std::optional<ThoughtAnnotation> thought;
  std::size_t episode = 0;
  std::size_t step = 0;
};

/// Full training rendering: prompt, <bot> n x <latent> <eot>, the request
/// turn, then the action turn (Fast) or the perception frame, the
/// <detection_image> turn with its slots and the action turn (Slow). Loss
/// falls on the control tokens, the action bytes and <eos>.
EnhancedSample enhance_sample(std::shared_ptr<const PixelImage> image, std::string image_ref, std::string goal,
                              std::vector<std::string> history, const ActionDecision& action, const ModelConfig& config,
                              const PerceptionClassifier& classifier = {});

/// Canonical text of the rendered sample.
std::string render_prompt(const EnhancedSample& sample);

/// Linear-scan well-formedness check; empty when valid.
std::string enhanced_violation(const TokenSequence& seq, std::size_t n_latent, PathLabel label,
                               std::size_t perception_slots);
inline std::string enhanced_violation(const EnhancedSample& s, const ModelConfig& c) {
  return enhanced_violation(s.sequence, c.n_latent, s.path_label, c.perception_slots());
}

/// Oracle-templated explicit thought, at most kMaxThoughtBytes bytes.
ThoughtAnnotation make_thought(const Screen& screen, const ActionDecision& action);

/// Replaces the latent span with the thought bytes (loss-bearing).
EnhancedSample with_thought(const EnhancedSample& sample);

/// Replaces whatever sits between <bot> and <eot> with n_latent latent
/// slots. Throws DataError when there is no such span.
EnhancedSample latent_swap(const EnhancedSample& sample, std::size_t n_latent);

struct EnhanceStats {
  std::size_t samples = 0;
  std::size_t slow = 0;
  std::size_t fast = 0;
};

struct EnhancedCorpus {
  std::vector<EnhancedSample> samples;
  EnhanceStats stats;
};

/// One sample per episode step in corpus order; history is the ground truth
/// window of preceding actions.
EnhancedCorpus enhance_corpus(const Corpus& corpus, const ModelConfig& config);

/// Keeps the first n samples and recounts the stats.
void truncate_corpus(EnhancedCorpus& corpus, std::size_t n);

/// Line-delimited records {schema_version, episode, step, image_ref, goal,
/// history, action_text, path_label, thought, tokens, sequence}.
std::string enhanced_to_jsonl(const EnhancedCorpus& corpus);
/// Rebuilds samples from records and the pixel store; each record's sequence
/// text must match its re-rendering.
EnhancedCorpus parse_enhanced_jsonl(const std::string& jsonl, const PixelStore& pixels, const ModelConfig& config);

}  // namespace sfa
