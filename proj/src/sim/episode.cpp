// SPDX-License-Identifier: Apache-2.0
#include "sfa/sim/episode.hpp"

#include <algorithm>
#include <regex>

#include "sfa/action/codec.hpp"
#include "sfa/errors.hpp"
#include "sfa/rng.hpp"

namespace sfa {

std::string_view template_name(TaskTemplate t) noexcept {
  switch (t) {
    case TaskTemplate::TapTarget: return "tap_target";
    case TaskTemplate::ScrollThenTap: return "scroll_then_tap";
    case TaskTemplate::TypeText: return "type_text";
    case TaskTemplate::Impossible: return "impossible";
  }
  return "?";
}

std::optional<TaskTemplate> template_from_name(std::string_view name) noexcept {
  for (auto t : kAllTemplates) {
    if (template_name(t) == name) return t;
  }
  return std::nullopt;
}

namespace {

constexpr std::array<std::string_view, 4> kButtons = {"ok", "next", "menu", "back"};

std::string icon_caption(int icon) { return std::string(kIconCaptions[static_cast<std::size_t>(icon)]); }

void add_icon(Screen& s, CounterRng& rng, int icon) {
  const int size = rng.below(2) ? 12 : 8;
  place_element(s, rng, ElementKind::Icon, icon, icon_caption(icon), size, size);
}

void add_banner(Screen& s, int glyph, std::string caption) {
  UiElement e;
  e.id = static_cast<int>(s.elements.size());
  e.kind = ElementKind::Label;
  e.glyph = glyph;
  e.caption = std::move(caption);
  e.bbox = {0.0, 0.0, 1.0, 8.0 / s.height};
  s.elements.push_back(std::move(e));
}

// Pads the screen with random distractors up to `total` elements. Icons in
// `banned` never appear; icons already on the screen are not repeated.
void add_distractors(Screen& s, CounterRng& rng, std::size_t total, std::initializer_list<int> banned) {
  std::vector<int> pool;
  for (int i = 0; i < 8; ++i) {
    bool skip = std::find(banned.begin(), banned.end(), i) != banned.end();
    for (const auto& e : s.elements) skip = skip || (e.kind == ElementKind::Icon && e.glyph == i);
    if (!skip) pool.push_back(i);
  }
  rng.shuffle(std::span<int>(pool));
  std::size_t next = 0;
  while (s.elements.size() < total) {
    const auto roll = rng.below(10);
    if (roll < 6 && next < pool.size()) {
      add_icon(s, rng, pool[next++]);
    } else if (roll < 9) {
      place_element(s, rng, ElementKind::Button, kGlyphButton, std::string(kButtons[rng.below(kButtons.size())]), 12,
                    8);
    } else {
      place_element(s, rng, ElementKind::Label, kGlyphLabel, "label", 16, 4);
    }
  }
}

std::size_t screen_size(CounterRng& rng) { return static_cast<std::size_t>(rng.between(3, 6)); }

Screen finish(Screen s) {
  render_pixels(s);
  return s;
}

ActionDecision tap_action(bool select, const UiElement& e) {
  const Point p = quantize(e.bbox.center());
  return select ? make_select(p) : make_click(p);
}

Screen tap_screen(CounterRng& rng, int target) {
  Screen s;
  add_icon(s, rng, target);
  if (rng.below(4) != 0) add_icon(s, rng, twin_of(target));
  add_distractors(s, rng, screen_size(rng), {target});
  return finish(std::move(s));
}

Screen opened_screen(CounterRng& rng, int glyph, std::string caption, std::initializer_list<int> banned) {
  Screen s;
  add_banner(s, glyph, std::move(caption));
  add_distractors(s, rng, 1 + static_cast<std::size_t>(rng.between(1, 3)), banned);
  return finish(std::move(s));
}

}  // namespace

Episode generate_episode(std::uint64_t seed, TaskTemplate task) {
  CounterRng rng(seed);
  Episode ep;
  ep.seed = seed;
  ep.task = task;
  switch (task) {
    case TaskTemplate::TapTarget: {
      const int target = static_cast<int>(rng.below(8));
      const bool select = rng.below(8) == 0;
      ep.goal = std::string(select ? "select" : "tap") + " the " + icon_caption(target) + " icon";
      Screen s1 = tap_screen(rng, target);
      const auto act = tap_action(select, *s1.find(ElementKind::Icon, icon_caption(target)));
      ep.steps.push_back({std::move(s1), act});
      ep.steps.push_back({opened_screen(rng, target, icon_caption(target), {target}),
                          make_simple(ActionType::StatusTaskComplete)});
      break;
    }
    case TaskTemplate::ScrollThenTap: {
      static constexpr std::array<std::pair<std::string_view, ActionType>, 4> kDirs = {{
          {"up", ActionType::ScrollUp},
          {"down", ActionType::ScrollDown},
          {"left", ActionType::ScrollLeft},
          {"right", ActionType::ScrollRight},
      }};
      const auto& [word, dir] = kDirs[rng.below(4)];
      const int target = static_cast<int>(rng.below(8));
      ep.goal = "scroll " + std::string(word) + " then tap " + icon_caption(target);
      Screen s0;
      add_distractors(s0, rng, screen_size(rng), {target});
      ep.steps.push_back({finish(std::move(s0)), make_scroll(dir)});
      Screen s1 = tap_screen(rng, target);
      const auto act = tap_action(false, *s1.find(ElementKind::Icon, icon_caption(target)));
      ep.steps.push_back({std::move(s1), act});
      ep.steps.push_back({opened_screen(rng, target, icon_caption(target), {target}),
                          make_simple(ActionType::StatusTaskComplete)});
      break;
    }
    case TaskTemplate::TypeText: {
      const std::string word(kTypeWords[rng.below(kTypeWords.size())]);
      const bool enter = rng.below(2) == 1;
      ep.goal = "type " + word + (enter ? " and press enter" : "");
      Screen s0;
      place_element(s0, rng, ElementKind::TextField, kGlyphFieldEmpty, "", 24, 8);
      add_distractors(s0, rng, screen_size(rng), {});
      Screen s1 = s0;
      s1.elements[0].glyph = kGlyphFieldFilled;
      s1.elements[0].caption = word;
      ep.steps.push_back({finish(std::move(s0)), make_type(word)});
      if (enter) {
        ep.steps.push_back({finish(std::move(s1)), make_simple(ActionType::PressEnter)});
        ep.steps.push_back({opened_screen(rng, kGlyphLabel, word, {}), make_simple(ActionType::StatusTaskComplete)});
      } else {
        ep.steps.push_back({finish(std::move(s1)), make_simple(ActionType::StatusTaskComplete)});
      }
      break;
    }
    case TaskTemplate::Impossible: {
      const int target = static_cast<int>(rng.below(8));
      ep.goal = "tap the " + icon_caption(target) + " icon";
      Screen s;
      if (rng.below(2) == 0) add_icon(s, rng, twin_of(target));
      add_distractors(s, rng, screen_size(rng), {target});
      ep.steps.push_back({finish(std::move(s)), make_simple(ActionType::StatusTaskImpossible)});
      break;
    }
  }
  return ep;
}

std::optional<ActionDecision> oracle_action(std::string_view goal_view, const Screen& screen) {
  static const std::regex kTap("(tap|select) the ([a-z]+) icon");
  static const std::regex kScroll("scroll (up|down|left|right) then tap ([a-z]+)");
  static const std::regex kType("type ([a-z]+)( and press enter)?");
  const std::string goal(goal_view);
  std::smatch m;
  auto click_or = [&](const std::string& caption, bool select, ActionDecision otherwise) {
    if (screen.find(ElementKind::Label, caption)) return make_simple(ActionType::StatusTaskComplete);
    if (const auto* e = screen.find(ElementKind::Icon, caption)) {
      const Point c{(e->bbox.x0 + e->bbox.x1) / 2, (e->bbox.y0 + e->bbox.y1) / 2};
      return select ? make_select(quantize(c)) : make_click(quantize(c));
    }
    return otherwise;
  };
  if (std::regex_match(goal, m, kTap)) {
    return click_or(m[2], m[1] == "select", make_simple(ActionType::StatusTaskImpossible));
  }
  if (std::regex_match(goal, m, kScroll)) {
    const std::string d = m[1];
    const auto dir = d == "up" ? ActionType::ScrollUp
                     : d == "down" ? ActionType::ScrollDown
                     : d == "left" ? ActionType::ScrollLeft
                                   : ActionType::ScrollRight;
    return click_or(m[2], false, make_scroll(dir));
  }
  if (std::regex_match(goal, m, kType)) {
    const std::string word = m[1];
    if (screen.find(ElementKind::Label, word)) return make_simple(ActionType::StatusTaskComplete);
    if (screen.find(ElementKind::TextField, word)) {
      return m[2].matched ? make_simple(ActionType::PressEnter) : make_simple(ActionType::StatusTaskComplete);
    }
    return make_type(word);
  }
  return std::nullopt;
}

std::string episode_violation(const Episode& e) {
  if (e.steps.empty() || e.steps.size() > 8) return "episode length must lie in [1, 8]";
  const auto last = e.steps.back().action.type;
  const auto want = e.task == TaskTemplate::Impossible ? ActionType::StatusTaskImpossible
                                                       : ActionType::StatusTaskComplete;
  if (last != want) return "episode must end with " + std::string(enum_name(want));
  for (std::size_t i = 0; i < e.steps.size(); ++i) {
    const auto& st = e.steps[i];
    if (auto v = action_violation(st.action); !v.empty()) return "step " + std::to_string(i) + ": " + v;
    if (!elements_disjoint(st.screen)) return "step " + std::to_string(i) + ": overlapping elements";
    if (st.action.type == ActionType::Click || st.action.type == ActionType::Select) {
      bool inside = false;
      for (const auto& el : st.screen.elements) inside = inside || el.bbox.contains_strictly(st.action.touch);
      if (!inside) return "step " + std::to_string(i) + ": click outside every element";
    }
  }
  return {};
}

}  // namespace sfa
