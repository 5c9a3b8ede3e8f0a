// SPDX-License-Identifier: Apache-2.0
#include "sfa/eval/metrics.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>

#include "sfa/errors.hpp"

namespace sfa {

namespace {

double dist(Point a, Point b) { return std::hypot(a.x - b.x, a.y - b.y); }

std::size_t index_of(ActionType t) { return static_cast<std::size_t>(t); }

void check_aligned(std::size_t a, std::size_t b) {
  if (a != b) throw AlignmentError("aligned inputs differ in length: " + std::to_string(a) + " vs " + std::to_string(b));
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

}  // namespace

std::string normalize_text(std::string_view s) {
  std::string out;
  bool gap = false;
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      gap = !out.empty();
      continue;
    }
    if (gap) out += ' ';
    gap = false;
    out += static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  }
  return out;
}

bool match_action(const ActionDecision& pred, const ActionDecision& gt, double tau) {
  if (pred.type != gt.type) return false;
  switch (gt.type) {
    case ActionType::Click:
    case ActionType::Select: return dist(pred.touch, gt.touch) <= tau && dist(pred.lift, gt.lift) <= tau;
    case ActionType::Type: return normalize_text(pred.typed_text) == normalize_text(gt.typed_text);
    default: return true;
  }
}

AMSReport compute_ams(std::span<const std::optional<ActionDecision>> preds, std::span<const ActionDecision> gt,
                      double tau) {
  check_aligned(preds.size(), gt.size());
  AMSReport r;
  r.total = gt.size();
  for (std::size_t i = 0; i < gt.size(); ++i) {
    auto& row = r.per_type[index_of(gt[i].type)];
    ++row.total;
    if (!preds[i]) {
      ++r.parse_failures;
      continue;
    }
    if (match_action(*preds[i], gt[i], tau)) {
      ++row.matches;
      ++r.matches;
    }
  }
  r.ams_percent = r.total ? 100.0 * static_cast<double>(r.matches) / static_cast<double>(r.total) : 0.0;
  return r;
}

double PathDistribution::routing_accuracy() const noexcept {
  return total ? static_cast<double>(counts[0][0] + counts[1][1]) / static_cast<double>(total) : 0.0;
}

PathDistribution path_stats(std::span<const PathLabel> predicted, std::span<const PathLabel> labels) {
  check_aligned(predicted.size(), labels.size());
  PathDistribution d;
  for (std::size_t i = 0; i < labels.size(); ++i) ++d.counts[static_cast<int>(predicted[i])][static_cast<int>(labels[i])];
  d.total = labels.size();
  return d;
}

std::array<double, kActionTypeCount> divergence_report(std::span<const std::optional<ActionDecision>> preds,
                                                       std::span<const ActionDecision> gt) {
  check_aligned(preds.size(), gt.size());
  std::array<double, kActionTypeCount> out{};
  if (gt.empty()) return out;
  std::array<std::size_t, kActionTypeCount> p{}, g{};
  for (std::size_t i = 0; i < gt.size(); ++i) {
    ++g[index_of(gt[i].type)];
    if (preds[i]) ++p[index_of(preds[i]->type)];
  }
  const double n = static_cast<double>(gt.size());
  for (std::size_t k = 0; k < kActionTypeCount; ++k) {
    out[k] = std::abs(100.0 * static_cast<double>(p[k]) / n - 100.0 * static_cast<double>(g[k]) / n);
  }
  return out;
}

std::string ams_table(const AMSReport& r) {
  std::string s = "action_type            total  matches     ams\n";
  for (std::size_t k = 0; k < kActionTypeCount; ++k) {
    const auto& row = r.per_type[k];
    if (row.total == 0) continue;
    char buf[128];
    std::snprintf(buf, sizeof buf, "%-20s %7zu %8zu %7.2f\n", std::string(enum_name(kAllActionTypes[k])).c_str(),
                  row.total, row.matches, 100.0 * static_cast<double>(row.matches) / static_cast<double>(row.total));
    s += buf;
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%-20s %7zu %8zu %7.2f\nparse_failures %zu\n", "ALL", r.total, r.matches,
                r.ams_percent, r.parse_failures);
  return s + buf;
}

std::string path_table(const PathDistribution& d) {
  char buf[256];
  std::snprintf(buf, sizeof buf,
                "             label=Fast label=Slow\n"
                "pred=Fast   %10zu %10zu\n"
                "pred=Slow   %10zu %10zu\n"
                "routing_accuracy %.4f\n",
                d.counts[0][0], d.counts[0][1], d.counts[1][0], d.counts[1][1], d.routing_accuracy());
  return buf;
}

std::string divergence_plot_data(const std::array<double, kActionTypeCount>& d) {
  std::string s = "action_type,divergence_pp\n";
  for (std::size_t k = 0; k < kActionTypeCount; ++k) {
    s += std::string(enum_name(kAllActionTypes[k])) + "," + fmt("%.4f", d[k]) + "\n";
  }
  return s;
}

}  // namespace sfa
