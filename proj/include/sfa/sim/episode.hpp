// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sfa/action/action.hpp"
#include "sfa/sim/screen.hpp"

namespace sfa {

enum class TaskTemplate : std::uint8_t { TapTarget, ScrollThenTap, TypeText, Impossible };

inline constexpr std::array<TaskTemplate, 4> kAllTemplates = {TaskTemplate::TapTarget, TaskTemplate::ScrollThenTap,
                                                              TaskTemplate::TypeText, TaskTemplate::Impossible};

std::string_view template_name(TaskTemplate t) noexcept;
std::optional<TaskTemplate> template_from_name(std::string_view name) noexcept;

struct EpisodeStep {
  Screen screen;
  ActionDecision action;
};

struct Episode {
  std::uint64_t seed = 0;
  TaskTemplate task = TaskTemplate::TapTarget;
  std::string goal;
  std::vector<EpisodeStep> steps;
};

/// Words the type_text template may ask for.
inline constexpr std::array<std::string_view, 10> kTypeWords = {"hello", "pizza", "music", "news",   "maps",
                                                                 "paris", "tokyo", "coffee", "jazz", "movies"};

Episode generate_episode(std::uint64_t seed, TaskTemplate task);

/// Rule oracle: re-derives the ground-truth action from the goal string and
/// the visible screen alone. Returns nullopt for goals outside the grammar.
std::optional<ActionDecision> oracle_action(std::string_view goal, const Screen& screen);

/// Episode invariants (length, terminal action, click geometry); empty when valid.
std::string episode_violation(const Episode& e);

}  // namespace sfa
