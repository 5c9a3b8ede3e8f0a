// SPDX-License-Identifier: Apache-2.0
#include "sfa/model/generate.hpp"

#include <algorithm>

#include "sfa/action/codec.hpp"
#include "sfa/errors.hpp"
#include "sfa/model/prompt.hpp"

namespace sfa {

namespace {

enum Next : int { kTypeName, kCoord, kCoordDone, kText, kDone };

void push_bytes(std::vector<int>& out, std::string_view s) {
  for (char c : s) out.push_back(static_cast<unsigned char>(c));
}

// Wire text of `a` after the comma that closes the type name.
std::string tail_after_type(const ActionDecision& a) {
  const auto full = serialize_action(a);
  return full.substr(kActionPrefix.size() + wire_name(a.type).size() + 1);
}

}  // namespace

ActionGrammar::ActionGrammar() {
  push_bytes(forced_, kActionPrefix);
  next_ = kTypeName;
}

std::vector<int> ActionGrammar::allowed() const {
  if (done_) return {};
  std::vector<int> out;
  switch (stage_) {
    case Stage::Forced:
      out.push_back(forced_[forced_pos_]);
      break;
    case Stage::TypeName:
      for (auto t : kAllActionTypes) {
        const auto w = wire_name(t);
        if (w.size() > name_.size() && w.substr(0, name_.size()) == name_) {
          out.push_back(static_cast<unsigned char>(w[name_.size()]));
        } else if (w == name_) {
          out.push_back(',');
        }
      }
      break;
    case Stage::Coord:
      if (coord_.empty()) {
        out = {'0', '1'};
      } else if (coord_ == "0") {
        out = {'.'};
      } else {
        for (int c = '0'; c <= '9'; ++c) out.push_back(c);
      }
      break;
    case Stage::Text: {
      const bool last_space = !text_.empty() && text_.back() == ' ';
      if (text_.size() < kMaxTypedText) {
        const bool space_ok = !text_.empty() && text_.size() + 1 < kMaxTypedText;
        for (int c = 0x20; c <= 0x7e; ++c) {
          if (c != ' ' || space_ok) out.push_back(c);
        }
      }
      if (!text_.empty() && !last_space) out.push_back(tok::kEos);
      break;
    }
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

void ActionGrammar::after_forced() {
  forced_.clear();
  forced_pos_ = 0;
  switch (next_) {
    case kTypeName: stage_ = Stage::TypeName; break;
    case kCoord:
      stage_ = Stage::Coord;
      coord_.clear();
      break;
    case kCoordDone: {
      coords_.push_back(coord_);
      stage_ = Stage::Forced;
      if (coords_.size() == 1) {
        push_bytes(forced_, ", ");
        next_ = kCoord;
      } else {
        push_bytes(forced_, "], lift_point:[" + coords_[0] + ", " + coords_[1] + "], typed_text:");
        forced_.push_back(tok::kEos);
        next_ = kDone;
      }
      break;
    }
    case kText: stage_ = Stage::Text; break;
    default: done_ = true; break;
  }
}

void ActionGrammar::feed(int token) {
  const auto ok = allowed();
  if (!std::binary_search(ok.begin(), ok.end(), token)) {
    throw GenerationError("token " + token_text(token) + " violates the action grammar");
  }
  switch (stage_) {
    case Stage::Forced:
      if (++forced_pos_ == forced_.size()) after_forced();
      return;
    case Stage::TypeName: {
      if (token != ',') {
        name_ += static_cast<char>(token);
        return;
      }
      const auto t = *action_type_from_wire(name_);
      type_ = t;
      stage_ = Stage::Forced;
      if (t == ActionType::Click || t == ActionType::Select) {
        push_bytes(forced_, " touch_point:[");
        next_ = kCoord;
      } else if (is_scroll(t)) {
        push_bytes(forced_, tail_after_type(make_scroll(t)));
        forced_.push_back(tok::kEos);
        next_ = kDone;
      } else if (t == ActionType::Type) {
        push_bytes(forced_, tail_after_type(make_type("x")));
        forced_.pop_back();
        next_ = kText;
      } else {
        push_bytes(forced_, tail_after_type(make_simple(t)));
        forced_.push_back(tok::kEos);
        next_ = kDone;
      }
      return;
    }
    case Stage::Coord:
      coord_ += static_cast<char>(token);
      if (coord_ == "1") {
        stage_ = Stage::Forced;
        push_bytes(forced_, ".0000");
        coord_ = "1.0000";
        next_ = kCoordDone;
      } else if (coord_.size() == 6) {
        next_ = kCoordDone;
        after_forced();
      }
      return;
    case Stage::Text:
      if (token == tok::kEos) {
        done_ = true;
      } else {
        text_ += static_cast<char>(token);
      }
      return;
  }
}

std::string_view decision_mode_name(DecisionMode m) noexcept {
  switch (m) {
    case DecisionMode::Adaptive: return "adaptive";
    case DecisionMode::ForceFast: return "fast";
    case DecisionMode::ForceSlow: return "slow";
  }
  return "?";
}

std::optional<DecisionMode> decision_mode_from_name(std::string_view name) noexcept {
  for (auto m : {DecisionMode::Adaptive, DecisionMode::ForceFast, DecisionMode::ForceSlow}) {
    if (decision_mode_name(m) == name) return m;
  }
  return std::nullopt;
}

namespace {

constexpr int kFirstActionByte = 'A';

// Structure after the prompt's assistant marker.
class Driver {
 public:
  enum class Phase { Bot, Latents, Eot, Request, Decision, Ctrl, Eop, DetUser, DetImage, Perception, DetAssistant, Action, Done };
  enum class Kind { Token, Latent, Perception };

  explicit Driver(const ModelConfig& cfg) : cfg_(cfg), request_(request_turn_tokens()) {}

  Phase phase() const noexcept { return phase_; }
  std::optional<PathLabel> decision() const noexcept { return decision_; }

  Kind kind() const noexcept {
    if (phase_ == Phase::Latents) return Kind::Latent;
    if (phase_ == Phase::Perception) return Kind::Perception;
    return Kind::Token;
  }
  std::size_t index() const noexcept { return count_; }

  std::vector<int> allowed() const {
    switch (phase_) {
      case Phase::Bot: return {tok::kBot};
      case Phase::Eot: return {tok::kEot};
      case Phase::Request: return {request_[count_]};
      case Phase::Decision: return {kFirstActionByte, tok::kBop};
      case Phase::Ctrl: return {tok::kCtrl};
      case Phase::Eop: return {tok::kEop};
      case Phase::DetUser: return {tok::kUser};
      case Phase::DetImage: return {tok::kDetectionImage};
      case Phase::DetAssistant: return {tok::kAssistant};
      case Phase::Action: return grammar_.allowed();
      default: return {};
    }
  }

  /// Throws GenerationError if `s` does not fit the structure.
  void advance(const Slot& s) {
    const auto k = kind();
    const bool fits = (k == Kind::Latent && s.tag == SlotTag::LatentThought) ||
                      (k == Kind::Perception && s.tag == SlotTag::PerceptionFeature && s.index == count_) ||
                      (k == Kind::Token && s.is_token());
    if (!fits) throw GenerationError(std::string("unexpected ") + std::string(slot_tag_name(s.tag)) + " slot");
    if (k == Kind::Token) {
      const auto ok = allowed();
      if (std::find(ok.begin(), ok.end(), s.token) == ok.end()) {
        throw GenerationError("token " + token_text(s.token) + " not allowed here");
      }
    }
    switch (phase_) {
      case Phase::Bot: phase_ = cfg_.n_latent == 0 ? Phase::Eot : Phase::Latents; count_ = 0; break;
      case Phase::Latents:
        if (++count_ == cfg_.n_latent) phase_ = Phase::Eot;
        break;
      case Phase::Eot: phase_ = Phase::Request; count_ = 0; break;
      case Phase::Request:
        if (++count_ == request_.size()) phase_ = Phase::Decision;
        break;
      case Phase::Decision:
        if (s.token == tok::kBop) {
          decision_ = PathLabel::Slow;
          phase_ = Phase::Ctrl;
        } else {
          decision_ = PathLabel::Fast;
          grammar_.feed(s.token);
          phase_ = Phase::Action;
        }
        break;
      case Phase::Ctrl: phase_ = Phase::Eop; break;
      case Phase::Eop: phase_ = Phase::DetUser; break;
      case Phase::DetUser: phase_ = Phase::DetImage; break;
      case Phase::DetImage: phase_ = Phase::Perception; count_ = 0; break;
      case Phase::Perception:
        if (++count_ == cfg_.perception_slots()) phase_ = Phase::DetAssistant;
        break;
      case Phase::DetAssistant: phase_ = Phase::Action; break;
      case Phase::Action:
        grammar_.feed(s.token);
        if (grammar_.done()) phase_ = Phase::Done;
        break;
      case Phase::Done: throw GenerationError("slot after <eos>");
    }
  }

 private:
  const ModelConfig& cfg_;
  std::vector<int> request_;
  Phase phase_ = Phase::Bot;
  std::size_t count_ = 0;
  ActionGrammar grammar_;
  std::optional<PathLabel> decision_;
};

}  // namespace

Generation generate(const LatentTransformer& model, const TokenSequence& prefix, const GenerateOptions& options) {
  const auto& cfg = model.config();
  if (prefix.size() == 0) throw SequenceError("generate needs a non-empty prefix");
  if (prefix.size() + options.max_new > cfg.max_seq) {
    throw SequenceError("prefix " + std::to_string(prefix.size()) + " + max_new " + std::to_string(options.max_new) +
                        " exceeds max_seq " + std::to_string(cfg.max_seq));
  }
  NoGradGuard guard;
  Driver dr(cfg);
  std::optional<std::size_t> action_begin;
  auto note_action_start = [&](std::size_t pos, Driver::Phase before) {
    if (action_begin) return;
    if (before == Driver::Phase::Decision && dr.decision() == PathLabel::Fast) action_begin = pos;
    if (before == Driver::Phase::DetAssistant) action_begin = pos + 1;
  };
  if (const auto b = prefix.find(tok::kBot)) {
    try {
      for (std::size_t i = *b; i < prefix.size(); ++i) {
        const auto before = dr.phase();
        dr.advance(prefix.slots[i]);
        note_action_start(i, before);
      }
    } catch (const GenerationError& e) {
      throw SequenceError(std::string("prefix does not follow the response structure: ") + e.what());
    }
  }

  Generation g;
  g.prefix_size = prefix.size();
  Session s(model, prefix.image);
  s.append(prefix.slots);

  std::vector<Slot> pending;
  auto flush = [&] {
    if (pending.empty()) return;
    const auto before = s.perception_calls();
    s.append(pending);
    pending.clear();
    if (s.perception_calls() > before && options.on_perception) options.on_perception(*s.last_perception());
  };

  while (dr.phase() != Driver::Phase::Done && g.appended < options.max_new) {
    Slot slot;
    const auto kind = dr.kind();
    if (kind == Driver::Kind::Latent) {
      slot = Slot::latent();
      ++g.latent_steps;
    } else if (kind == Driver::Kind::Perception) {
      slot = Slot::perception(dr.index());
    } else {
      auto allowed = dr.allowed();
      if (dr.phase() == Driver::Phase::Decision && options.mode != DecisionMode::Adaptive) {
        allowed = {options.mode == DecisionMode::ForceSlow ? tok::kBop : kFirstActionByte};
      }
      int token = allowed.front();
      if (allowed.size() > 1) {
        flush();
        auto logits = s.logits_at(s.size() - 1);
        if (options.logit_hook) options.logit_hook(logits.data(), s.size() - 1);
        ++g.logit_samples;
        double best = logits[static_cast<std::size_t>(token)];
        for (int t : allowed) {
          if (logits[static_cast<std::size_t>(t)] > best) {
            best = logits[static_cast<std::size_t>(t)];
            token = t;
          }
        }
      }
      slot = Slot::tokenized(token);
    }
    if (slot.is(tok::kBop)) ++g.bop_count;
    const auto before = dr.phase();
    dr.advance(slot);
    note_action_start(s.size() + pending.size(), before);
    pending.push_back(std::move(slot));
    ++g.appended;
  }
  flush();

  g.finished = dr.phase() == Driver::Phase::Done;
  g.decision = dr.decision();
  g.perception_calls = s.perception_calls();
  g.sequence.image = prefix.image;
  g.sequence.slots = s.slots();
  for (std::size_t i = prefix.size(); i < g.sequence.size(); ++i) {
    auto& slot = g.sequence.slots[i];
    if (!slot.is_token() && !slot.embedding) slot.embedding = s.resolved_embedding(i);
  }
  if (action_begin) {
    for (std::size_t i = *action_begin; i < g.sequence.size(); ++i) {
      const auto& slot = g.sequence.slots[i];
      if (!slot.is_token() || slot.token >= 256) break;
      g.action_text += static_cast<char>(slot.token);
    }
  }
  return g;
}

}  // namespace sfa
