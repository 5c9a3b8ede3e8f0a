// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>

#include "sfa/action/action.hpp"

namespace sfa {

enum class ForeignSpace { AndroidControl, GUIOdyssey, GUIAct };

std::string_view foreign_space_name(ForeignSpace s) noexcept;
std::optional<ForeignSpace> foreign_space_from_name(std::string_view name) noexcept;

/// One action record from a foreign dataset.
struct ForeignAction {
  std::string kind;
  std::optional<Point> point;      // tap / long-press target, swipe start
  std::optional<Point> end;        // swipe end, when given as coordinates
  std::optional<std::string> direction;  // "up" / "down" / "left" / "right"
  std::string text;
};

/// Static mapping tables loaded from versioned JSON. The default instance is
/// built from data/action_maps.json compiled into the library.
class ActionMapTable {
 public:
  static const ActionMapTable& builtin();
  static ActionMapTable from_json(std::string_view json_text);

  int version() const noexcept { return version_; }

  /// Throws UnmappedActionError for kinds without a mapping and
  /// ValidationError when the record lacks what its kind needs.
  ActionDecision normalize(const ForeignAction& a, ForeignSpace space) const;

  /// Whether long_press-style kinds were collapsed (mapping is lossy).
  bool is_lossy(ForeignSpace space, std::string_view kind) const;

 private:
  struct Entry {
    std::string target;  // an enum name or "SCROLL"
    bool lossy = false;
  };
  struct Space {
    bool finger_semantics = false;
    std::map<std::string, Entry, std::less<>> actions;
    std::set<std::string, std::less<>> unmapped;
  };
  int version_ = 0;
  std::map<ForeignSpace, Space> spaces_;
};

ActionDecision normalize_foreign(const ForeignAction& a, ForeignSpace space);

}  // namespace sfa
