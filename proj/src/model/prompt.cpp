// SPDX-License-Identifier: Apache-2.0
#include "sfa/model/prompt.hpp"

#include "sfa/errors.hpp"

namespace sfa {

std::string join_history(std::span<const std::string> history) {
  std::string out;
  for (std::size_t i = 0; i < history.size(); ++i) {
    if (i) out += "; ";
    out += history[i];
  }
  return out;
}

TokenSequence build_prompt(std::shared_ptr<const PixelImage> image, std::string_view goal,
                           std::span<const std::string> history, const ModelConfig& config) {
  if (history.size() > kHistoryWindow) {
    throw ValidationError("history holds " + std::to_string(history.size()) + " actions, at most " +
                          std::to_string(kHistoryWindow) + " allowed");
  }
  TokenSequence seq;
  seq.image = std::move(image);
  seq.push_token(tok::kUser);
  seq.push_token(tok::kImage);
  for (std::size_t i = 0; i < config.global_slots(); ++i) seq.slots.push_back(Slot::image(i));
  seq.push_text("\nPrevious Actions: ");
  seq.push_text(join_history(history));
  seq.push_text("\nGoal: ");
  seq.push_text(goal);
  seq.push_text("\n");
  seq.push_text(kInstructionText);
  seq.push_token(tok::kAssistant);
  return seq;
}

std::vector<int> request_turn_tokens() {
  std::vector<int> out{tok::kUser};
  for (char c : kRequestText) out.push_back(static_cast<unsigned char>(c));
  out.push_back(tok::kAssistant);
  return out;
}

}  // namespace sfa
