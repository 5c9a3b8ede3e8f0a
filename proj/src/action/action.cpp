// SPDX-License-Identifier: Apache-2.0
#include "sfa/action/action.hpp"

#include <cctype>

#include "sfa/errors.hpp"

namespace sfa {

namespace {

struct Names {
  std::string_view wire;
  std::string_view ident;
};

constexpr std::array<Names, kActionTypeCount> kNames = {{
    {"CLICK", "CLICK"},
    {"TYPE", "TYPE"},
    {"SELECT", "SELECT"},
    {"SCROLL UP", "SCROLL_UP"},
    {"SCROLL DOWN", "SCROLL_DOWN"},
    {"SCROLL LEFT", "SCROLL_LEFT"},
    {"SCROLL RIGHT", "SCROLL_RIGHT"},
    {"PRESS BACK", "PRESS_BACK"},
    {"PRESS HOME", "PRESS_HOME"},
    {"PRESS ENTER", "PRESS_ENTER"},
    {"STATUS TASK COMPLETE", "STATUS_TASK_COMPLETE"},
    {"STATUS TASK IMPOSSIBLE", "STATUS_TASK_IMPOSSIBLE"},
}};

bool bad_text_char(char c) {
  const auto u = static_cast<unsigned char>(c);
  return u < 0x20 || u == 0x7f;
}

}  // namespace

std::string_view wire_name(ActionType type) noexcept { return kNames[static_cast<std::size_t>(type)].wire; }
std::string_view enum_name(ActionType type) noexcept { return kNames[static_cast<std::size_t>(type)].ident; }

std::optional<ActionType> action_type_from_wire(std::string_view name) noexcept {
  for (auto t : kAllActionTypes) {
    if (wire_name(t) == name) return t;
  }
  return std::nullopt;
}

std::optional<ActionType> action_type_from_enum_name(std::string_view name) noexcept {
  for (auto t : kAllActionTypes) {
    if (enum_name(t) == name) return t;
  }
  return std::nullopt;
}

bool is_scroll(ActionType t) noexcept {
  return t == ActionType::ScrollUp || t == ActionType::ScrollDown || t == ActionType::ScrollLeft ||
         t == ActionType::ScrollRight;
}

bool needs_point(ActionType t) noexcept { return t == ActionType::Click || t == ActionType::Select || is_scroll(t); }

ActionDecision make_click(Point at) { return {ActionType::Click, at, at, {}}; }
ActionDecision make_select(Point at) { return {ActionType::Select, at, at, {}}; }
ActionDecision make_type(std::string text) {
  return {ActionType::Type, Point::sentinel(), Point::sentinel(), std::move(text)};
}

ActionDecision make_scroll(ActionType direction) {
  // The finger travels opposite to the direction the content scrolls toward.
  switch (direction) {
    case ActionType::ScrollDown: return {direction, {0.5, 0.8}, {0.5, 0.2}, {}};
    case ActionType::ScrollUp: return {direction, {0.5, 0.2}, {0.5, 0.8}, {}};
    case ActionType::ScrollRight: return {direction, {0.8, 0.5}, {0.2, 0.5}, {}};
    case ActionType::ScrollLeft: return {direction, {0.2, 0.5}, {0.8, 0.5}, {}};
    default: throw ValidationError("make_scroll needs a SCROLL_* type, got " + std::string(enum_name(direction)));
  }
}

ActionDecision make_simple(ActionType type) {
  if (needs_point(type) || type == ActionType::Type) {
    throw ValidationError("make_simple cannot build " + std::string(enum_name(type)));
  }
  return {type, Point::sentinel(), Point::sentinel(), {}};
}

std::string action_violation(const ActionDecision& a) {
  const auto t = a.type;
  if (needs_point(t)) {
    if (!a.touch.in_unit_square()) return "touch_point: must lie in [0,1]^2";
    if (!a.lift.in_unit_square()) return "lift_point: must lie in [0,1]^2";
  } else {
    if (!a.touch.is_sentinel()) return "touch_point: must be the (-1,-1) sentinel";
    if (!a.lift.is_sentinel()) return "lift_point: must be the (-1,-1) sentinel";
  }
  switch (t) {
    case ActionType::ScrollDown:
      if (a.lift.x != a.touch.x || !(a.lift.y < a.touch.y)) return "lift_point: SCROLL DOWN lifts above the touch";
      break;
    case ActionType::ScrollUp:
      if (a.lift.x != a.touch.x || !(a.lift.y > a.touch.y)) return "lift_point: SCROLL UP lifts below the touch";
      break;
    case ActionType::ScrollRight:
      if (a.lift.y != a.touch.y || !(a.lift.x < a.touch.x)) return "lift_point: SCROLL RIGHT lifts left of the touch";
      break;
    case ActionType::ScrollLeft:
      if (a.lift.y != a.touch.y || !(a.lift.x > a.touch.x)) return "lift_point: SCROLL LEFT lifts right of the touch";
      break;
    default: break;
  }
  if (t == ActionType::Type) {
    if (a.typed_text.empty()) return "typed_text: TYPE needs text";
    if (std::isspace(static_cast<unsigned char>(a.typed_text.front())) ||
        std::isspace(static_cast<unsigned char>(a.typed_text.back()))) {
      return "typed_text: leading or trailing whitespace";
    }
    for (char c : a.typed_text) {
      if (bad_text_char(c)) return "typed_text: control character";
    }
  } else if (!a.typed_text.empty()) {
    return "typed_text: only TYPE carries text";
  }
  return {};
}

void validate_action(const ActionDecision& a) {
  if (auto v = action_violation(a); !v.empty()) {
    throw ValidationError("invalid " + std::string(enum_name(a.type)) + " action: " + v);
  }
}

std::string_view path_name(PathLabel label) noexcept { return label == PathLabel::Slow ? "Slow" : "Fast"; }

std::optional<PathLabel> path_from_name(std::string_view name) noexcept {
  if (name == "Slow") return PathLabel::Slow;
  if (name == "Fast") return PathLabel::Fast;
  return std::nullopt;
}

PerceptionClassifier::PerceptionClassifier() : PerceptionClassifier({ActionType::Click, ActionType::Select}) {}

PerceptionClassifier::PerceptionClassifier(std::initializer_list<ActionType> slow_types) {
  for (auto t : slow_types) slow_[static_cast<std::size_t>(t)] = true;
}

PathLabel PerceptionClassifier::classify(ActionType t) const noexcept {
  return is_slow(t) ? PathLabel::Slow : PathLabel::Fast;
}

PathLabel classify_perception(const ActionDecision& a) noexcept {
  static const PerceptionClassifier kDefault;
  return kDefault.classify(a);
}

}  // namespace sfa
