// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <optional>
#include <string>
#include <string_view>

namespace sfa {

/// The unified 12-action GUI space.
enum class ActionType : std::uint8_t {
  Click,
  Type,
  Select,
  ScrollUp,
  ScrollDown,
  ScrollLeft,
  ScrollRight,
  PressBack,
  PressHome,
  PressEnter,
  StatusTaskComplete,
  StatusTaskImpossible,
};

inline constexpr std::size_t kActionTypeCount = 12;

inline constexpr std::array<ActionType, kActionTypeCount> kAllActionTypes = {
    ActionType::Click,      ActionType::Type,       ActionType::Select,    ActionType::ScrollUp,
    ActionType::ScrollDown, ActionType::ScrollLeft, ActionType::ScrollRight, ActionType::PressBack,
    ActionType::PressHome,  ActionType::PressEnter, ActionType::StatusTaskComplete,
    ActionType::StatusTaskImpossible,
};

/// Spelling used on the wire ("SCROLL DOWN", "STATUS TASK COMPLETE").
std::string_view wire_name(ActionType type) noexcept;
/// Spelling used for identifiers and config ("SCROLL_DOWN").
std::string_view enum_name(ActionType type) noexcept;
std::optional<ActionType> action_type_from_wire(std::string_view name) noexcept;
std::optional<ActionType> action_type_from_enum_name(std::string_view name) noexcept;

bool is_scroll(ActionType type) noexcept;
bool needs_point(ActionType type) noexcept;  // CLICK, SELECT, SCROLL_*

/// Normalized screen coordinates in [0,1], or the (-1,-1) sentinel.
struct Point {
  double x = -1.0;
  double y = -1.0;

  static constexpr Point sentinel() noexcept { return {-1.0, -1.0}; }
  bool is_sentinel() const noexcept { return x == -1.0 && y == -1.0; }
  bool in_unit_square() const noexcept { return x >= 0.0 && x <= 1.0 && y >= 0.0 && y <= 1.0; }

  friend bool operator==(const Point&, const Point&) = default;
};

struct ActionDecision {
  ActionType type = ActionType::StatusTaskComplete;
  Point touch = Point::sentinel();
  Point lift = Point::sentinel();
  std::string typed_text;

  friend bool operator==(const ActionDecision&, const ActionDecision&) = default;
};

ActionDecision make_click(Point at);
ActionDecision make_select(Point at);
ActionDecision make_type(std::string text);
/// Scroll with the canonical gesture for its direction.
ActionDecision make_scroll(ActionType direction);
ActionDecision make_simple(ActionType type);  // PRESS_* / STATUS_*

/// Empty string when valid, otherwise the name of the first offending field
/// followed by a reason.
std::string action_violation(const ActionDecision& a);
/// Throws ValidationError on an invariant violation.
void validate_action(const ActionDecision& a);

enum class PathLabel : std::uint8_t { Fast, Slow };

std::string_view path_name(PathLabel label) noexcept;
std::optional<PathLabel> path_from_name(std::string_view name) noexcept;

/// Rule-based perception classifier: actions whose type is in the Slow set
/// need precise coordinates and take the perception path.
class PerceptionClassifier {
 public:
  PerceptionClassifier();  // Slow set {CLICK, SELECT}
  explicit PerceptionClassifier(std::initializer_list<ActionType> slow_types);

  PathLabel classify(const ActionDecision& a) const noexcept { return classify(a.type); }
  PathLabel classify(ActionType t) const noexcept;
  bool is_slow(ActionType t) const noexcept { return slow_[static_cast<std::size_t>(t)]; }

 private:
  std::array<bool, kActionTypeCount> slow_{};
};

PathLabel classify_perception(const ActionDecision& a) noexcept;

}  // namespace sfa
