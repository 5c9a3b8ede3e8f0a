// SPDX-License-Identifier: Apache-2.0
#include "sfa/action/codec.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>

#include "sfa/errors.hpp"

namespace sfa {

double quantize_coord(double v) noexcept {
  if (v == -1.0) return v;
  return std::round(v * 10000.0) / 10000.0;
}

Point quantize(Point p) noexcept { return {quantize_coord(p.x), quantize_coord(p.y)}; }

std::string format_coord(double v) {
  char buf[32];
  const int n = std::snprintf(buf, sizeof buf, "%.4f", v);
  return std::string(buf, static_cast<std::size_t>(n));
}

std::string serialize_action(const ActionDecision& a) {
  validate_action(a);
  std::string out(kActionPrefix);
  out += wire_name(a.type);
  out += ", touch_point:[";
  out += format_coord(a.touch.x);
  out += ", ";
  out += format_coord(a.touch.y);
  out += "], lift_point:[";
  out += format_coord(a.lift.x);
  out += ", ";
  out += format_coord(a.lift.y);
  out += "], typed_text:";
  out += a.typed_text;
  return out;
}

namespace {

bool is_ws(char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v'; }

class Cursor {
 public:
  Cursor(std::string_view s, std::size_t base) : s_(s), base_(base) {}

  std::size_t offset() const { return base_ + pos_; }

  void expect(std::string_view lit, const char* field) {
    if (s_.substr(pos_, lit.size()) != lit) {
      // Point at the first byte that disagrees.
      std::size_t i = 0;
      while (i < lit.size() && pos_ + i < s_.size() && s_[pos_ + i] == lit[i]) ++i;
      const std::string what = pos_ + i >= s_.size() ? "input ends early, expected '" + std::string(lit) + "'"
                                                     : "expected '" + std::string(lit) + "'";
      throw ParseError(field, base_ + pos_ + i, what);
    }
    pos_ += lit.size();
  }

  // -?\d+\.\d{4}
  double coord(const char* field) {
    const std::size_t start = pos_;
    std::size_t i = pos_;
    if (i < s_.size() && s_[i] == '-') ++i;
    const std::size_t int_start = i;
    while (i < s_.size() && s_[i] >= '0' && s_[i] <= '9') ++i;
    if (i == int_start) throw ParseError(field, base_ + i, "expected a number");
    if (i >= s_.size() || s_[i] != '.') throw ParseError(field, base_ + i, "expected 4 decimal places");
    ++i;
    for (int d = 0; d < 4; ++d, ++i) {
      if (i >= s_.size() || s_[i] < '0' || s_[i] > '9') {
        throw ParseError(field, base_ + i, "expected 4 decimal places");
      }
    }
    double v = 0.0;
    auto [ptr, ec] = std::from_chars(s_.data() + start, s_.data() + i, v);
    if (ec != std::errc() || ptr != s_.data() + i) throw ParseError(field, base_ + start, "bad number");
    pos_ = i;
    return v;
  }

  Point point(const char* field) {
    expect("[", field);
    Point p;
    p.x = coord(field);
    expect(", ", field);
    p.y = coord(field);
    expect("]", field);
    return p;
  }

  std::string_view until(char stop) {
    const auto end = s_.find(stop, pos_);
    const auto len = (end == std::string_view::npos ? s_.size() : end) - pos_;
    auto out = s_.substr(pos_, len);
    pos_ += len;
    return out;
  }

  std::string_view rest() {
    auto out = s_.substr(pos_);
    pos_ = s_.size();
    return out;
  }

 private:
  std::string_view s_;
  std::size_t base_;
  std::size_t pos_ = 0;
};

}  // namespace

ActionDecision parse_action(std::string_view text) {
  std::size_t lead = 0;
  while (lead < text.size() && is_ws(text[lead])) ++lead;
  std::size_t end = text.size();
  while (end > lead && is_ws(text[end - 1])) --end;
  Cursor cur(text.substr(lead, end - lead), lead);

  cur.expect(kActionPrefix, "action_type");
  const std::size_t type_at = cur.offset();
  const auto type_text = cur.until(',');
  const auto type = action_type_from_wire(type_text);
  if (!type) throw ParseError("action_type", type_at, "unknown action type '" + std::string(type_text) + "'");

  ActionDecision a;
  a.type = *type;
  cur.expect(", touch_point:", "touch_point");
  a.touch = cur.point("touch_point");
  cur.expect(", lift_point:", "lift_point");
  a.lift = cur.point("lift_point");
  cur.expect(", typed_text:", "typed_text");
  const std::size_t text_at = cur.offset();
  a.typed_text = std::string(cur.rest());

  if (auto v = action_violation(a); !v.empty()) {
    const auto colon = v.find(':');
    const std::string field = v.substr(0, colon);
    const std::size_t at = field == "typed_text" ? text_at : type_at;
    throw ParseError(field, at, v.substr(colon + 2));
  }
  return a;
}

}  // namespace sfa
