// SPDX-License-Identifier: Apache-2.0
#include "sfa/agent/controller.hpp"

#include <algorithm>
#include <chrono>
#include <sstream>

#include "json.hpp"
#include "sfa/action/codec.hpp"
#include "sfa/errors.hpp"
#include "sfa/model/prompt.hpp"

namespace sfa {

StepTrace predict_step(const LatentTransformer& model, const PixelImage& screen, std::string_view goal,
                       std::span<const std::string> history, DecisionMode mode, const GenerateOptions& extra) {
  const auto t0 = std::chrono::steady_clock::now();
  auto image = std::make_shared<const PixelImage>(screen);
  const auto prompt = build_prompt(std::move(image), goal, history, model.config());
  if (prompt.size() >= model.config().max_seq) throw SequenceError("prompt fills max_seq");

  GenerateOptions opt = extra;
  opt.mode = mode;
  opt.max_new = std::min<std::size_t>(extra.max_new, model.config().max_seq - prompt.size());
  const auto gen = generate(model, prompt, opt);

  StepTrace t;
  t.perception_invocations = gen.perception_calls;
  t.bop_emitted = gen.bop_count;
  t.path_taken = gen.perception_calls > 0 ? PathLabel::Slow : PathLabel::Fast;
  t.token_count = gen.appended;
  t.action_text = gen.action_text;
  try {
    if (!gen.finished) throw GenerationError("generation stopped before <eos>");
    t.action = parse_action(gen.action_text);
  } catch (const Error& e) {
    t.parse_error = e.what();
  }
  t.us_elapsed =
      std::chrono::duration_cast<std::chrono::microseconds>(std::chrono::steady_clock::now() - t0).count();
  return t;
}

StepTrace predict_step(const LatentTransformer& model, const Screen& screen, std::string_view goal,
                       std::span<const std::string> history, DecisionMode mode) {
  return predict_step(model, PixelImage{screen.width, screen.height, screen.pixels}, goal, history, mode);
}

EpisodeRun run_episode(const LatentTransformer& model, const Episode& episode, DecisionMode mode, bool closed_loop) {
  EpisodeRun run;
  std::vector<std::string> window;
  for (const auto& st : episode.steps) {
    run.histories.push_back(window);
    auto t = predict_step(model, st.screen, episode.goal, window, mode);
    window.push_back(closed_loop ? (t.action ? serialize_action(*t.action) : t.action_text)
                                 : serialize_action(st.action));
    if (window.size() > kHistoryWindow) window.erase(window.begin());
    run.traces.push_back(std::move(t));
  }
  return run;
}

TraceRecord trace_record(std::size_t episode_id, std::size_t step, DecisionMode mode, const StepTrace& t) {
  return {episode_id, step, mode, t.path_taken, t.action_text, t.us_elapsed, t.token_count};
}

std::string trace_to_json(const TraceRecord& r) {
  nlohmann::ordered_json j;
  j["episode_id"] = r.episode_id;
  j["step"] = r.step;
  j["mode"] = decision_mode_name(r.mode);
  j["path"] = path_name(r.path);
  j["action_text"] = r.action_text;
  j["us_elapsed"] = r.us_elapsed;
  j["tokens"] = r.tokens;
  return j.dump();
}

std::vector<TraceRecord> parse_trace_log(const std::string& text) {
  std::vector<TraceRecord> out;
  std::istringstream is(text);
  std::string line;
  std::size_t n = 0;
  while (std::getline(is, line)) {
    ++n;
    if (line.empty()) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TraceRecord r;
      r.episode_id = j.at("episode_id").get<std::size_t>();
      r.step = j.at("step").get<std::size_t>();
      const auto mode = decision_mode_from_name(j.at("mode").get<std::string>());
      const auto path = path_from_name(j.at("path").get<std::string>());
      if (!mode || !path) throw ValidationError("bad mode or path");
      r.mode = *mode;
      r.path = *path;
      r.action_text = j.at("action_text").get<std::string>();
      r.us_elapsed = j.at("us_elapsed").get<std::int64_t>();
      r.tokens = j.at("tokens").get<std::size_t>();
      out.push_back(std::move(r));
    } catch (const std::exception& e) {
      throw ValidationError("trace log line " + std::to_string(n) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace sfa
