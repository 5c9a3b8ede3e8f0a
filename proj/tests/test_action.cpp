// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <regex>

#include "sfa/action/action.hpp"
#include "sfa/action/codec.hpp"
#include "sfa/action/foreign.hpp"
#include "sfa/errors.hpp"
#include "sfa/rng.hpp"
#include "support.hpp"

using namespace sfa;
using sfa::testing::random_action;

namespace {

const std::regex kGrammar(
    "Action Decision:action_type:(CLICK|TYPE|SELECT|SCROLL (UP|DOWN|LEFT|RIGHT)|PRESS (BACK|HOME|ENTER)|"
    "STATUS TASK (COMPLETE|IMPOSSIBLE)), touch_point:\\[-?\\d+\\.\\d{4}, -?\\d+\\.\\d{4}\\], "
    "lift_point:\\[-?\\d+\\.\\d{4}, -?\\d+\\.\\d{4}\\], typed_text:.*");

}  // namespace

TEST(ActionCodec, ClickExample) {
  const auto s = serialize_action(make_click({0.5312, 0.2104}));
  EXPECT_EQ(s,
            "Action Decision:action_type:CLICK, touch_point:[0.5312, 0.2104], lift_point:[0.5312, 0.2104], "
            "typed_text:");
  EXPECT_EQ(parse_action(s), make_click({0.5312, 0.2104}));
}

TEST(ActionCodec, SentinelExample) {
  EXPECT_EQ(serialize_action(make_simple(ActionType::StatusTaskComplete)),
            "Action Decision:action_type:STATUS TASK COMPLETE, touch_point:[-1.0000, -1.0000], "
            "lift_point:[-1.0000, -1.0000], typed_text:");
}

TEST(ActionCodec, RoundTripThousandRandom) {
  CounterRng rng(2024);
  for (int i = 0; i < 1000; ++i) {
    const auto a = random_action(rng);
    const auto s = serialize_action(a);
    EXPECT_TRUE(std::regex_match(s, kGrammar)) << s;
    EXPECT_EQ(parse_action(s), a) << s;
    EXPECT_EQ(parse_action("  \n" + s + "\t "), a);
  }
}

TEST(ActionCodec, UnknownTypeNamesOffendingField) {
  try {
    parse_action("Action Decision:action_type:FLY, touch_point:[-1.0000, -1.0000], lift_point:[-1.0000, -1.0000], typed_text:");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "action_type");
    EXPECT_EQ(e.offset(), kActionPrefix.size());
    EXPECT_NE(std::string(e.what()).find("FLY"), std::string::npos);
  }
}

TEST(ActionCodec, TruncatedInputReportsOffset) {
  const std::string s = "Action Decision:action_type:CLICK, touch_point:[0.5000, 0.5000], lift_point:[0.5000, 0.5000]";
  try {
    parse_action(s);
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "typed_text");
    EXPECT_EQ(e.offset(), s.size());
  }
}

TEST(ActionCodec, MalformedCoordinates) {
  EXPECT_THROW(parse_action("Action Decision:action_type:CLICK, touch_point:[0.5, 0.5000], lift_point:[0.5000, "
                            "0.5000], typed_text:"),
               ParseError);
  try {
    parse_action("Action Decision:action_type:CLICK, touch_point:[0.5000, 0.5000], lift_point:[0.5000 0.5000], "
                 "typed_text:");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.field(), "lift_point");
  }
}

TEST(ActionCodec, ParseEnforcesInvariants) {
  EXPECT_THROW(parse_action("Action Decision:action_type:CLICK, touch_point:[-1.0000, -1.0000], lift_point:[-1.0000, "
                            "-1.0000], typed_text:"),
               ParseError);
  EXPECT_THROW(parse_action("Action Decision:action_type:TYPE, touch_point:[-1.0000, -1.0000], lift_point:[-1.0000, "
                            "-1.0000], typed_text:"),
               ParseError);
}

TEST(ActionCodec, SerializeRejectsInvalid) {
  ActionDecision a{ActionType::PressHome, {0.2, 0.2}, Point::sentinel(), {}};
  EXPECT_THROW(serialize_action(a), ValidationError);
  ActionDecision s{ActionType::ScrollDown, {0.5, 0.2}, {0.5, 0.8}, {}};
  EXPECT_THROW(serialize_action(s), ValidationError);
}

TEST(Classifier, ExhaustiveDefault) {
  const PerceptionClassifier c;
  for (auto t : kAllActionTypes) {
    const bool slow = t == ActionType::Click || t == ActionType::Select;
    EXPECT_EQ(c.classify(t), slow ? PathLabel::Slow : PathLabel::Fast) << enum_name(t);
  }
  EXPECT_EQ(classify_perception(make_click({0.1, 0.1})), PathLabel::Slow);
  EXPECT_EQ(classify_perception(make_scroll(ActionType::ScrollDown)), PathLabel::Fast);
  EXPECT_EQ(classify_perception(make_simple(ActionType::StatusTaskComplete)), PathLabel::Fast);
}

TEST(Classifier, ConfigurableSlowSet) {
  const PerceptionClassifier c({ActionType::Type});
  for (auto t : kAllActionTypes) EXPECT_EQ(c.is_slow(t), t == ActionType::Type);
}

TEST(Foreign, DocumentedMappings) {
  EXPECT_EQ(normalize_foreign({.kind = "navigate_home"}, ForeignSpace::AndroidControl),
            make_simple(ActionType::PressHome));
  EXPECT_EQ(normalize_foreign({.kind = "Tap", .point = Point{0.3, 0.7}}, ForeignSpace::GUIAct),
            make_click({0.3, 0.7}));
  EXPECT_EQ(normalize_foreign({.kind = "long_press", .point = Point{0.25, 0.5}}, ForeignSpace::AndroidControl),
            make_click({0.25, 0.5}));
  EXPECT_TRUE(ActionMapTable::builtin().is_lossy(ForeignSpace::AndroidControl, "long_press"));
  EXPECT_EQ(normalize_foreign({.kind = "scroll", .direction = "down"}, ForeignSpace::AndroidControl),
            make_scroll(ActionType::ScrollDown));
  EXPECT_EQ(normalize_foreign({.kind = "SCROLL", .point = Point{0.5, 0.9}, .end = Point{0.5, 0.1}},
                              ForeignSpace::GUIOdyssey),
            make_scroll(ActionType::ScrollDown));
  EXPECT_EQ(normalize_foreign({.kind = "Input", .text = "hi"}, ForeignSpace::GUIAct), make_type("hi"));
  EXPECT_EQ(normalize_foreign({.kind = "COMPLETE"}, ForeignSpace::GUIOdyssey),
            make_simple(ActionType::StatusTaskComplete));
}

TEST(Foreign, UnmappedKindsError) {
  for (auto [space, kind] : {std::pair{ForeignSpace::AndroidControl, "open_app"},
                             std::pair{ForeignSpace::AndroidControl, "wait"}, std::pair{ForeignSpace::GUIAct, "Hover"},
                             std::pair{ForeignSpace::GUIAct, "Copy"}, std::pair{ForeignSpace::GUIAct, "Paste"},
                             std::pair{ForeignSpace::GUIAct, "Drag"}, std::pair{ForeignSpace::GUIAct, "Answer"}}) {
    try {
      normalize_foreign({.kind = kind, .text = "Chrome"}, space);
      FAIL() << kind;
    } catch (const UnmappedActionError& e) {
      EXPECT_EQ(e.kind(), kind);
    }
  }
}

TEST(Foreign, ImageAlwaysValidAndDeterministic) {
  CounterRng rng(77);
  const char* dirs[] = {"up", "down", "left", "right"};
  for (int i = 0; i < 200; ++i) {
    ForeignAction a{.kind = (i % 3 == 0) ? "Tap" : (i % 3 == 1 ? "Swipe" : "Enter"),
                    .point = Point{rng.uniform(), rng.uniform()},
                    .direction = std::string(dirs[rng.below(4)])};
    const auto x = normalize_foreign(a, ForeignSpace::GUIAct);
    EXPECT_TRUE(action_violation(x).empty());
    EXPECT_EQ(x, normalize_foreign(a, ForeignSpace::GUIAct));
    EXPECT_EQ(parse_action(serialize_action(x)), x);
  }
}

TEST(Foreign, TableLoadsFromJson) {
  const auto t = ActionMapTable::from_json(R"({"version": 2, "spaces": {"GUIAct": {"actions": {"Poke": {"type": "CLICK"}}}}})");
  EXPECT_EQ(t.version(), 2);
  EXPECT_EQ(t.normalize({.kind = "Poke", .point = Point{0.1, 0.2}}, ForeignSpace::GUIAct), make_click({0.1, 0.2}));
  EXPECT_THROW(ActionMapTable::from_json(R"({"version": 1, "spaces": {"GUIAct": {"actions": {"Poke": {"type": "FLY"}}}}})"),
               ValidationError);
}
