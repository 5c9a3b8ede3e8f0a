// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sfa/action/action.hpp"

namespace sfa {

inline constexpr double kDefaultTau = 0.14;

/// Type equality, plus: CLICK/SELECT touch and lift within tau (Euclidean,
/// normalized units); TYPE text equal after lowercasing and whitespace
/// normalization. Everything else matches on type alone.
bool match_action(const ActionDecision& pred, const ActionDecision& gt, double tau = kDefaultTau);

/// Lowercase ASCII, whitespace runs collapsed to one space, trimmed.
std::string normalize_text(std::string_view s);

struct TypeTally {
  std::size_t total = 0;
  std::size_t matches = 0;
};

struct AMSReport {
  std::size_t total = 0;
  std::size_t matches = 0;
  std::size_t parse_failures = 0;
  double ams_percent = 0.0;
  std::array<TypeTally, kActionTypeCount> per_type{};  // keyed by ground-truth type
};

/// Empty predictions are parse failures and count as mismatches. Throws
/// AlignmentError on a length mismatch.
AMSReport compute_ams(std::span<const std::optional<ActionDecision>> preds, std::span<const ActionDecision> gt,
                      double tau = kDefaultTau);

struct PathDistribution {
  std::array<std::array<std::size_t, 2>, 2> counts{};  // [predicted][label], Fast = 0
  std::size_t total = 0;
  double routing_accuracy() const noexcept;
  std::size_t cell(PathLabel predicted, PathLabel label) const noexcept {
    return counts[static_cast<int>(predicted)][static_cast<int>(label)];
  }
};

PathDistribution path_stats(std::span<const PathLabel> predicted, std::span<const PathLabel> labels);

/// Per type |freq_pred - freq_gt| in percentage points; parse failures
/// count in the prediction denominator only.
std::array<double, kActionTypeCount> divergence_report(std::span<const std::optional<ActionDecision>> preds,
                                                       std::span<const ActionDecision> gt);

std::string ams_table(const AMSReport& r);
std::string path_table(const PathDistribution& d);
/// Headered plot data: "action_type,divergence_pp".
std::string divergence_plot_data(const std::array<double, kActionTypeCount>& d);

}  // namespace sfa
