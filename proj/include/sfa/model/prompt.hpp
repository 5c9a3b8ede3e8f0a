// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <span>
#include <string>
#include <string_view>

#include "sfa/model/config.hpp"
#include "sfa/model/sequence.hpp"

namespace sfa {

inline constexpr std::string_view kInstructionText =
    "Predict the next action to be taken according to the Goal\nLet's think step by step.";
inline constexpr std::string_view kRequestText =
    "Request for additional features if required or answer the question directly based on your observations";

/// Most recent actions kept in the "Previous Actions:" slot.
inline constexpr std::size_t kHistoryWindow = 2;

/// Semicolon-joined, newest last.
std::string join_history(std::span<const std::string> history);

/// The user turn up to and including the assistant marker that opens the
/// latent span: <user><image>{slots}\nPrevious Actions: ...\nGoal: ...\n
/// {instruction}<assistant>. Nothing in it carries loss.
TokenSequence build_prompt(std::shared_ptr<const PixelImage> image, std::string_view goal,
                           std::span<const std::string> history, const ModelConfig& config);

/// <user>{request}<assistant>, inserted after <eot>.
std::vector<int> request_turn_tokens();

}  // namespace sfa
