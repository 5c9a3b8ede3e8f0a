// SPDX-License-Identifier: Apache-2.0
#include "sfa/action/foreign.hpp"

#include <cmath>
#include "json.hpp"

#include "action_maps_data.hpp"
#include "sfa/action/codec.hpp"
#include "sfa/errors.hpp"

namespace sfa {

std::string_view foreign_space_name(ForeignSpace s) noexcept {
  switch (s) {
    case ForeignSpace::AndroidControl: return "AndroidControl";
    case ForeignSpace::GUIOdyssey: return "GUIOdyssey";
    case ForeignSpace::GUIAct: return "GUIAct";
  }
  return "?";
}

std::optional<ForeignSpace> foreign_space_from_name(std::string_view name) noexcept {
  for (auto s : {ForeignSpace::AndroidControl, ForeignSpace::GUIOdyssey, ForeignSpace::GUIAct}) {
    if (foreign_space_name(s) == name) return s;
  }
  return std::nullopt;
}

const ActionMapTable& ActionMapTable::builtin() {
  static const ActionMapTable table = from_json(kActionMapsJson);
  return table;
}

ActionMapTable ActionMapTable::from_json(std::string_view json_text) {
  ActionMapTable t;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(json_text);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("action map table: ") + e.what());
  }
  try {
    t.version_ = j.at("version").get<int>();
    for (const auto& [name, body] : j.at("spaces").items()) {
      const auto space = foreign_space_from_name(name);
      if (!space) throw ValidationError("action map table: unknown source space '" + name + "'");
      Space s;
      s.finger_semantics = body.value("direction_semantics", std::string("content")) == "finger";
      for (const auto& [kind, entry] : body.at("actions").items()) {
        Entry e{entry.at("type").get<std::string>(), entry.value("lossy", false)};
        if (e.target != "SCROLL" && !action_type_from_enum_name(e.target)) {
          throw ValidationError("action map table: '" + kind + "' maps to unknown type '" + e.target + "'");
        }
        s.actions.emplace(kind, std::move(e));
      }
      for (const auto& k : body.value("unmapped", nlohmann::json::array())) s.unmapped.insert(k.get<std::string>());
      t.spaces_[*space] = std::move(s);
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("action map table: ") + e.what());
  }
  return t;
}

bool ActionMapTable::is_lossy(ForeignSpace space, std::string_view kind) const {
  auto s = spaces_.find(space);
  if (s == spaces_.end()) return false;
  auto e = s->second.actions.find(kind);
  return e != s->second.actions.end() && e->second.lossy;
}

namespace {

ActionType scroll_from_direction(std::string_view dir, bool finger, std::string_view space) {
  // With finger semantics a swipe "up" reveals content below, i.e. scrolls down.
  if (dir == "up") return finger ? ActionType::ScrollDown : ActionType::ScrollUp;
  if (dir == "down") return finger ? ActionType::ScrollUp : ActionType::ScrollDown;
  if (dir == "left") return finger ? ActionType::ScrollRight : ActionType::ScrollLeft;
  if (dir == "right") return finger ? ActionType::ScrollLeft : ActionType::ScrollRight;
  throw ValidationError("unknown scroll direction '" + std::string(dir) + "' in " + std::string(space));
}

std::string_view finger_direction(Point from, Point to) {
  const double dx = to.x - from.x;
  const double dy = to.y - from.y;
  if (dx == 0.0 && dy == 0.0) return "";
  if (std::abs(dy) >= std::abs(dx)) return dy < 0 ? "up" : "down";
  return dx < 0 ? "left" : "right";
}

}  // namespace

ActionDecision ActionMapTable::normalize(const ForeignAction& a, ForeignSpace space) const {
  const auto sname = foreign_space_name(space);
  auto s = spaces_.find(space);
  if (s == spaces_.end()) throw UnmappedActionError(std::string(sname), a.kind);
  auto e = s->second.actions.find(a.kind);
  if (e == s->second.actions.end()) throw UnmappedActionError(std::string(sname), a.kind);

  const auto& target = e->second.target;
  ActionDecision out;
  if (target == "SCROLL") {
    ActionType dir;
    if (a.direction) {
      dir = scroll_from_direction(*a.direction, s->second.finger_semantics, sname);
    } else if (a.point && a.end) {
      const auto f = finger_direction(*a.point, *a.end);
      if (f.empty()) throw ValidationError("zero-length swipe in " + std::string(sname));
      dir = scroll_from_direction(f, true, sname);
    } else {
      throw ValidationError("scroll record in " + std::string(sname) + " has neither direction nor end point");
    }
    out = make_scroll(dir);
  } else {
    const auto type = *action_type_from_enum_name(target);
    if (type == ActionType::Click || type == ActionType::Select) {
      if (!a.point) throw ValidationError("'" + a.kind + "' record in " + std::string(sname) + " has no point");
      const Point p = quantize(*a.point);
      out = type == ActionType::Click ? make_click(p) : make_select(p);
    } else if (type == ActionType::Type) {
      out = make_type(a.text);
    } else {
      out = make_simple(type);
    }
  }
  validate_action(out);
  return out;
}

ActionDecision normalize_foreign(const ForeignAction& a, ForeignSpace space) {
  return ActionMapTable::builtin().normalize(a, space);
}

}  // namespace sfa
