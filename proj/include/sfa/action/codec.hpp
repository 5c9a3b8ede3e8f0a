// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <string>
#include <string_view>

#include "sfa/action/action.hpp"

namespace sfa {

inline constexpr std::string_view kActionPrefix = "Action Decision:action_type:";

/// Rounds to the 4-decimal grid the wire format can represent.
double quantize_coord(double v) noexcept;
Point quantize(Point p) noexcept;

/// `Action Decision:action_type:{T}, touch_point:[x, y], lift_point:[x, y], typed_text:{text}`
/// with every coordinate printed to 4 decimals. Throws ValidationError on an
/// invalid action.
std::string serialize_action(const ActionDecision& a);

/// Inverse of serialize_action. Surrounding whitespace is ignored; anything
/// else off-grammar raises ParseError naming the field and byte offset.
/// The parsed action must also satisfy the action invariants.
ActionDecision parse_action(std::string_view text);

/// Formats one coordinate the way the codec does ("0.5312", "-1.0000").
std::string format_coord(double v);

}  // namespace sfa
