// SPDX-License-Identifier: Apache-2.0
#include "sfa/data/enhancer.hpp"

#include <algorithm>
#include <sstream>

#include "json.hpp"
#include "sfa/action/codec.hpp"
#include "sfa/errors.hpp"
#include "sfa/model/prompt.hpp"

namespace sfa {

namespace {

std::string lower(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

}  // namespace

EnhancedSample enhance_sample(std::shared_ptr<const PixelImage> image, std::string image_ref, std::string goal,
                              std::vector<std::string> history, const ActionDecision& action, const ModelConfig& config,
                              const PerceptionClassifier& classifier) {
  validate_action(action);
  EnhancedSample s;
  s.image_ref = std::move(image_ref);
  s.target_action = action;
  s.path_label = classifier.classify(action);
  s.goal = std::move(goal);
  s.history = std::move(history);
  auto& seq = s.sequence = build_prompt(std::move(image), s.goal, s.history, config);
  seq.push_token(tok::kBot, true);
  for (std::size_t i = 0; i < config.n_latent; ++i) seq.slots.push_back(Slot::latent());
  seq.push_token(tok::kEot, true);
  for (int t : request_turn_tokens()) seq.push_token(t);
  if (s.path_label == PathLabel::Slow) {
    seq.push_token(tok::kBop, true);
    seq.push_token(tok::kCtrl, true);
    seq.push_token(tok::kEop, true);
    seq.push_token(tok::kUser);
    seq.push_token(tok::kDetectionImage);
    for (std::size_t i = 0; i < config.perception_slots(); ++i) seq.slots.push_back(Slot::perception(i));
    seq.push_token(tok::kAssistant);
  }
  seq.push_text(serialize_action(action), true);
  seq.push_token(tok::kEos, true);
  return s;
}

std::string render_prompt(const EnhancedSample& sample) { return sample.sequence.text(); }

std::string enhanced_violation(const TokenSequence& seq, std::size_t n_latent, PathLabel label,
                               std::size_t perception_slots) {
  std::optional<std::size_t> bot, eot, bop, det;
  std::size_t latents = 0, frames = 0, perception = 0;
  const auto& s = seq.slots;
  for (std::size_t i = 0; i < s.size(); ++i) {
    const auto& x = s[i];
    if (!x.is_token() && x.loss) return "slot " + std::to_string(i) + ": continuous slot carries loss";
    if (x.tag == SlotTag::LatentThought) {
      if (!bot || eot) return "slot " + std::to_string(i) + ": latent outside the <bot>...<eot> span";
      ++latents;
      continue;
    }
    if (x.tag == SlotTag::PerceptionFeature) {
      if (!det || x.index != perception) return "slot " + std::to_string(i) + ": stray perception slot";
      ++perception;
      continue;
    }
    if (x.tag == SlotTag::ImagePatch) continue;
    if (bot && !eot && x.token != tok::kEot) return "slot " + std::to_string(i) + ": non-latent inside the latent span";
    switch (x.token) {
      case tok::kBot:
        if (bot) return "slot " + std::to_string(i) + ": second <bot>";
        bot = i;
        break;
      case tok::kEot:
        if (!bot || eot) return "slot " + std::to_string(i) + ": unbalanced <eot>";
        eot = i;
        break;
      case tok::kBop:
        if (i + 2 >= s.size() || !s[i + 1].is(tok::kCtrl) || !s[i + 2].is(tok::kEop)) {
          return "slot " + std::to_string(i) + ": <bop> not followed by <ctrl><eop>";
        }
        if (!eot) return "slot " + std::to_string(i) + ": perception frame before the latent span closes";
        bop = i;
        ++frames;
        break;
      case tok::kCtrl:
        if (!bop || *bop + 1 != i) return "slot " + std::to_string(i) + ": <ctrl> outside a frame";
        break;
      case tok::kEop:
        if (!bop || *bop + 2 != i) return "slot " + std::to_string(i) + ": <eop> outside a frame";
        break;
      case tok::kDetectionImage:
        if (!bop || det) return "slot " + std::to_string(i) + ": <detection_image> without a frame";
        det = i;
        break;
      default: break;
    }
  }
  if (!bot || !eot) return "missing <bot>...<eot> span";
  if (latents != n_latent) {
    return "latent span holds " + std::to_string(latents) + " slots, expected " + std::to_string(n_latent);
  }
  const bool slow = label == PathLabel::Slow;
  if (slow != (frames == 1) || frames > 1) return "perception frame count disagrees with the path label";
  if (slow != det.has_value()) return "<detection_image> turn disagrees with the path label";
  if (perception != (slow ? perception_slots : 0)) return "perception slot count " + std::to_string(perception);
  if (s.empty() || !s.back().is(tok::kEos)) return "sequence does not end with <eos>";
  return {};
}

ThoughtAnnotation make_thought(const Screen& screen, const ActionDecision& action) {
  std::string t;
  switch (action.type) {
    case ActionType::Click:
    case ActionType::Select: {
      std::string caption = "item";
      for (const auto& e : screen.elements) {
        if (e.bbox.contains_strictly(action.touch)) caption = e.caption;
      }
      const int r = std::min(3, static_cast<int>(action.touch.y * 4)), c = std::min(3, static_cast<int>(action.touch.x * 4));
      t = lower(std::string(wire_name(action.type))) + " " + caption + " at r" + std::to_string(r) + "c" +
          std::to_string(c) + "; precise";
      break;
    }
    case ActionType::Type: t = "type " + action.typed_text + "; coarse"; break;
    default: t = lower(std::string(wire_name(action.type))) + "; coarse"; break;
  }
  if (t.size() > kMaxThoughtBytes) t.resize(kMaxThoughtBytes);
  while (!t.empty() && t.back() == ' ') t.pop_back();
  return {t};
}

namespace {

std::pair<std::size_t, std::size_t> latent_span(const EnhancedSample& s) {
  const auto bot = s.sequence.find(tok::kBot);
  const auto eot = bot ? s.sequence.find(tok::kEot, *bot) : std::nullopt;
  if (!bot || !eot) throw DataError("sample has no <bot>...<eot> span");
  return {*bot + 1, *eot};
}

EnhancedSample replace_span(const EnhancedSample& s, const std::vector<Slot>& inner) {
  const auto [b, e] = latent_span(s);
  EnhancedSample out = s;
  auto& v = out.sequence.slots;
  v.erase(v.begin() + static_cast<std::ptrdiff_t>(b), v.begin() + static_cast<std::ptrdiff_t>(e));
  v.insert(v.begin() + static_cast<std::ptrdiff_t>(b), inner.begin(), inner.end());
  return out;
}

}  // namespace

EnhancedSample with_thought(const EnhancedSample& sample) {
  if (!sample.thought || sample.thought->text.empty()) {
    throw DataError("sample (episode " + std::to_string(sample.episode) + ", step " + std::to_string(sample.step) +
                    ") has no thought annotation");
  }
  std::vector<Slot> inner;
  for (char c : sample.thought->text) inner.push_back(Slot::tokenized(static_cast<unsigned char>(c), true));
  return replace_span(sample, inner);
}

EnhancedSample latent_swap(const EnhancedSample& sample, std::size_t n_latent) {
  return replace_span(sample, std::vector<Slot>(n_latent, Slot::latent()));
}

EnhancedCorpus enhance_corpus(const Corpus& corpus, const ModelConfig& config) {
  EnhancedCorpus out;
  for (std::size_t e = 0; e < corpus.episodes.size(); ++e) {
    const auto& ep = corpus.episodes[e];
    std::vector<std::string> window;
    for (std::size_t k = 0; k < ep.steps.size(); ++k) {
      const auto& st = ep.steps[k];
      auto img = std::make_shared<PixelImage>(PixelImage{st.screen.width, st.screen.height, st.screen.pixels});
      auto s = enhance_sample(std::move(img), pixels_ref(st.screen), ep.goal, window, st.action, config);
      s.thought = make_thought(st.screen, st.action);
      s.episode = e;
      s.step = k;
      ++(s.path_label == PathLabel::Slow ? out.stats.slow : out.stats.fast);
      out.samples.push_back(std::move(s));
      window.push_back(serialize_action(st.action));
      if (window.size() > kHistoryWindow) window.erase(window.begin());
    }
  }
  out.stats.samples = out.samples.size();
  return out;
}

void truncate_corpus(EnhancedCorpus& corpus, std::size_t n) {
  if (corpus.samples.size() > n) corpus.samples.resize(n);
  corpus.stats = {};
  for (const auto& s : corpus.samples) ++(s.path_label == PathLabel::Slow ? corpus.stats.slow : corpus.stats.fast);
  corpus.stats.samples = corpus.samples.size();
}

std::string enhanced_to_jsonl(const EnhancedCorpus& corpus) {
  std::ostringstream os;
  for (const auto& s : corpus.samples) {
    nlohmann::ordered_json j;
    j["schema_version"] = kEnhancedSchemaVersion;
    j["episode"] = s.episode;
    j["step"] = s.step;
    j["image_ref"] = s.image_ref;
    j["goal"] = s.goal;
    j["history"] = s.history;
    j["action_text"] = serialize_action(s.target_action);
    j["path_label"] = path_name(s.path_label);
    j["thought"] = s.thought ? nlohmann::json(s.thought->text) : nlohmann::json(nullptr);
    j["tokens"] = s.sequence.size();
    j["sequence"] = render_prompt(s);
    os << j.dump() << '\n';
  }
  return os.str();
}

EnhancedCorpus parse_enhanced_jsonl(const std::string& jsonl, const PixelStore& pixels, const ModelConfig& config) {
  EnhancedCorpus out;
  std::istringstream is(jsonl);
  std::string line;
  std::size_t index = 0;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto where = "enhanced record " + std::to_string(index);
    try {
      const auto j = nlohmann::json::parse(line);
      if (j.at("schema_version").get<int>() != kEnhancedSchemaVersion) throw DataError("unsupported schema_version");
      const auto ref = j.at("image_ref").get<std::string>();
      if (!pixels.contains(ref)) throw DataError("unknown image_ref " + ref);
      auto img = std::make_shared<PixelImage>(pixels.at(ref));
      auto s = enhance_sample(std::move(img), ref, j.at("goal").get<std::string>(),
                              j.at("history").get<std::vector<std::string>>(),
                              parse_action(j.at("action_text").get<std::string>()), config);
      if (path_name(s.path_label) != j.at("path_label").get<std::string>()) throw DataError("path_label disagrees");
      if (!j.at("thought").is_null()) s.thought = ThoughtAnnotation{j.at("thought").get<std::string>()};
      s.episode = j.at("episode").get<std::size_t>();
      s.step = j.at("step").get<std::size_t>();
      if (render_prompt(s) != j.at("sequence").get<std::string>()) throw DataError("sequence does not re-render");
      ++(s.path_label == PathLabel::Slow ? out.stats.slow : out.stats.fast);
      out.samples.push_back(std::move(s));
    } catch (const DataError& e) {
      throw DataError(where + ": " + e.what());
    } catch (const std::exception& e) {
      throw DataError(where + ": " + e.what());
    }
    ++index;
  }
  out.stats.samples = out.samples.size();
  return out;
}

}  // namespace sfa
