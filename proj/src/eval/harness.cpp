// SPDX-License-Identifier: Apache-2.0
#include "sfa/eval/harness.hpp"

#include <algorithm>
#include <chrono>
#include <cstdio>
#include <numeric>

#include "sfa/action/codec.hpp"
#include "sfa/model/prompt.hpp"

namespace sfa {

std::vector<std::optional<ActionDecision>> EvalRun::predictions() const {
  std::vector<std::optional<ActionDecision>> out;
  out.reserve(traces.size());
  for (const auto& t : traces) out.push_back(t.action);
  return out;
}

std::vector<PathLabel> EvalRun::paths() const {
  std::vector<PathLabel> out;
  for (const auto& t : traces) out.push_back(t.path_taken);
  return out;
}

std::size_t EvalRun::perception_calls() const {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.perception_invocations;
  return n;
}

std::size_t EvalRun::bop_count() const {
  std::size_t n = 0;
  for (const auto& t : traces) n += t.bop_emitted;
  return n;
}

std::size_t EvalRun::slow_traces() const {
  return static_cast<std::size_t>(
      std::count_if(traces.begin(), traces.end(), [](const StepTrace& t) { return t.path_taken == PathLabel::Slow; }));
}

std::string EvalRun::trace_log() const {
  std::string s;
  for (std::size_t i = 0; i < traces.size(); ++i) {
    s += trace_to_json(trace_record(episode_ids[i], steps[i], mode, traces[i])) + "\n";
  }
  return s;
}

namespace {

void record(EvalRun& run, std::size_t e, std::size_t k, const ActionDecision& gt, StepTrace t) {
  run.traces.push_back(std::move(t));
  run.truth.push_back(gt);
  run.labels.push_back(classify_perception(gt));
  run.episode_ids.push_back(e);
  run.steps.push_back(k);
}

double median(std::vector<double> v) {
  if (v.empty()) return 0.0;
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

}  // namespace

EvalRun evaluate(const LatentTransformer& model, std::span<const Episode> episodes, DecisionMode mode) {
  EvalRun run;
  run.mode = mode;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    auto r = run_episode(model, episodes[e], mode);
    for (std::size_t k = 0; k < r.traces.size(); ++k) record(run, e, k, episodes[e].steps[k].action, std::move(r.traces[k]));
  }
  return run;
}

AMSReport ams_on(const EvalRun& run, PathLabel label, double tau) {
  std::vector<std::optional<ActionDecision>> p;
  std::vector<ActionDecision> g;
  for (std::size_t i = 0; i < run.traces.size(); ++i) {
    if (run.labels[i] != label) continue;
    p.push_back(run.traces[i].action);
    g.push_back(run.truth[i]);
  }
  return compute_ams(p, g, tau);
}

LatencyProfile latency_profile(const LatentTransformer& model, std::span<const Episode> episodes, std::size_t warmup,
                               double tau) {
  static constexpr std::array<DecisionMode, 3> kModes = {DecisionMode::ForceFast, DecisionMode::Adaptive,
                                                         DecisionMode::ForceSlow};
  LatencyProfile p;
  for (std::size_t m = 0; m < 3; ++m) p.runs[m].mode = kModes[m];
  std::size_t seen = 0;
  for (std::size_t e = 0; e < episodes.size(); ++e) {
    std::vector<std::string> window;
    const auto& ep = episodes[e];
    for (std::size_t k = 0; k < ep.steps.size(); ++k) {
      const auto& st = ep.steps[k];
      for (std::size_t m = 0; m < 3; ++m) {
        auto t = predict_step(model, st.screen, ep.goal, window, kModes[m]);
        if (seen >= warmup) record(p.runs[m], e, k, st.action, std::move(t));
      }
      ++seen;
      window.push_back(serialize_action(st.action));
      if (window.size() > kHistoryWindow) window.erase(window.begin());
    }
  }

  for (std::size_t m = 0; m < 3; ++m) {
    const auto& run = p.runs[m];
    auto& row = p.rows[m];
    row.mode = kModes[m];
    row.steps = run.traces.size();
    std::vector<double> us;
    double tokens = 0.0;
    for (const auto& t : run.traces) {
      us.push_back(static_cast<double>(t.us_elapsed));
      tokens += static_cast<double>(t.token_count);
    }
    if (row.steps) {
      row.mean_us = std::accumulate(us.begin(), us.end(), 0.0) / static_cast<double>(row.steps);
      row.mean_tokens = tokens / static_cast<double>(row.steps);
    }
    row.median_us = median(us);
    row.ams = compute_ams(run.predictions(), run.truth, tau).ams_percent;
  }

  p.tokens_ordered = true;
  for (std::size_t i = 0; i < p.runs[0].traces.size(); ++i) {
    const auto f = p.runs[0].traces[i].token_count, a = p.runs[1].traces[i].token_count,
               s = p.runs[2].traces[i].token_count;
    if (!(f <= a && a <= s)) p.tokens_ordered = false;
  }

  const auto& labels = p.runs[1].labels;
  const bool mixed = std::count(labels.begin(), labels.end(), PathLabel::Slow) > 0 &&
                     std::count(labels.begin(), labels.end(), PathLabel::Fast) > 0;
  // Timer resolution is 1 us as reported; gaps below 10 us are noise.
  constexpr double kMinEffectUs = 10.0;
  const double d1 = p.rows[1].mean_us - p.rows[0].mean_us, d2 = p.rows[2].mean_us - p.rows[1].mean_us;
  if (!mixed) {
    p.note = "warning: single-label workload, latency ordering not checked";
  } else if (p.rows[1].steps < 100) {
    p.note = "warning: fewer than 100 steps per mode, latency ordering not checked";
  } else if (std::abs(d1) < kMinEffectUs || std::abs(d2) < kMinEffectUs) {
    p.note = "warning: mean gap below the minimum effect, latency ordering not checked";
  } else {
    p.ordering_checked = true;
    p.latency_ordered = d1 > 0 && d2 > 0;
  }
  return p;
}

std::string latency_table(const LatencyProfile& p) {
  std::string s = "mode      steps   mean_us  median_us  mean_tokens     ams\n";
  for (const auto& r : p.rows) {
    char buf[160];
    std::snprintf(buf, sizeof buf, "%-8s %6zu %9.0f %10.0f %12.2f %7.2f\n",
                  std::string(decision_mode_name(r.mode)).c_str(), r.steps, r.mean_us, r.median_us, r.mean_tokens,
                  r.ams);
    s += buf;
  }
  s += std::string("latency_ordering ") +
       (p.ordering_checked ? (p.latency_ordered ? "holds" : "VIOLATED") : "skipped") + "\n";
  s += std::string("token_ordering ") + (p.tokens_ordered ? "holds" : "VIOLATED") + "\n";
  if (!p.note.empty()) s += p.note + "\n";
  return s;
}

}  // namespace sfa
