// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include "sfa/action/codec.hpp"
#include "sfa/data/enhancer.hpp"
#include "sfa/errors.hpp"
#include "sfa/model/vocab.hpp"
#include "support.hpp"

using namespace sfa;

namespace {

std::shared_ptr<PixelImage> blank() {
  return std::make_shared<PixelImage>(PixelImage{64, 64, std::vector<std::uint8_t>(64 * 64 * 3, 236)});
}

std::size_t count_text(const std::string& hay, const std::string& needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST(Enhancer, ClickIsSlowWithFrame) {
  const ModelConfig cfg;
  const auto s = enhance_sample(blank(), "r", "tap the mail icon", {}, make_click({0.5, 0.5}), cfg);
  EXPECT_EQ(s.path_label, PathLabel::Slow);
  EXPECT_EQ(s.sequence.count_tag(SlotTag::LatentThought), 8u);
  const auto text = render_prompt(s);
  EXPECT_NE(text.find("<bop><ctrl><eop><user><detection_image><assistant>Action Decision:"), std::string::npos);
  EXPECT_EQ(s.sequence.count_tag(SlotTag::PerceptionFeature), cfg.perception_slots());
  EXPECT_EQ(enhanced_violation(s, cfg), "");
}

TEST(Enhancer, ScrollIsFastWithoutPerception) {
  const ModelConfig cfg;
  const auto s = enhance_sample(blank(), "r", "scroll up then tap the bank icon", {}, make_scroll(ActionType::ScrollUp), cfg);
  EXPECT_EQ(s.path_label, PathLabel::Fast);
  EXPECT_EQ(s.sequence.count(tok::kBop), 0u);
  EXPECT_EQ(s.sequence.count(tok::kDetectionImage), 0u);
  EXPECT_EQ(s.sequence.count_tag(SlotTag::PerceptionFeature), 0u);
  const auto text = render_prompt(s);
  EXPECT_NE(text.find("Let's think step by step."), std::string::npos);
  EXPECT_EQ(count_text(text, "<assistant>Action Decision:"), 1u);
  EXPECT_EQ(enhanced_violation(s, cfg), "");
}

TEST(Enhancer, ZeroLatentsLeaveAdjacentMarkers) {
  ModelConfig cfg;
  cfg.n_latent = 0;
  const auto s = enhance_sample(blank(), "r", "type hello", {}, make_type("hello"), cfg);
  EXPECT_NE(render_prompt(s).find("<bot><eot>"), std::string::npos);
  EXPECT_EQ(enhanced_violation(s, cfg), "");
}

TEST(Enhancer, TemplateLayout) {
  const ModelConfig cfg;
  const std::vector<std::string> hist = {"Action Decision:action_type:PRESS HOME, touch_point:[-1.0000, -1.0000], "
                                         "lift_point:[-1.0000, -1.0000], typed_text:"};
  const auto s = enhance_sample(blank(), "r", "type jazz", hist, make_type("jazz"), cfg);
  const auto text = render_prompt(s);
  const std::string want =
      "<user><image>\nPrevious Actions: " + hist[0] +
      "\nGoal: type jazz\nPredict the next action to be taken according to the Goal\nLet's think step by "
      "step.<assistant><bot><latent><latent><latent><latent><latent><latent><latent><latent><eot><user>Request for "
      "additional features if required or answer the question directly based on your "
      "observations<assistant>Action Decision:action_type:TYPE, touch_point:[-1.0000, -1.0000], lift_point:[-1.0000, "
      "-1.0000], typed_text:jazz<eos>";
  EXPECT_EQ(text, want);
  EXPECT_EQ(render_prompt(s), render_prompt(enhance_sample(blank(), "r", "type jazz", hist, make_type("jazz"), cfg)));
}

TEST(Enhancer, LossOnlyOnControlAndAction) {
  const ModelConfig cfg;
  const auto s = enhance_sample(blank(), "r", "tap the mail icon", {}, make_click({0.5, 0.5}), cfg);
  const auto action = serialize_action(s.target_action);
  std::size_t loss = 0;
  for (const auto& x : s.sequence.slots) {
    if (!x.loss) continue;
    ASSERT_TRUE(x.is_token());
    ++loss;
  }
  EXPECT_EQ(loss, 5u + action.size() + 1u);
}

TEST(Enhancer, ValidatorRejectsBrokenFrames) {
  const ModelConfig cfg;
  auto s = enhance_sample(blank(), "r", "tap the mail icon", {}, make_click({0.5, 0.5}), cfg);
  auto no_ctrl = s;
  no_ctrl.sequence.slots.erase(no_ctrl.sequence.slots.begin() + static_cast<std::ptrdiff_t>(*s.sequence.find(tok::kCtrl)));
  EXPECT_NE(enhanced_violation(no_ctrl, cfg), "");
  auto mislabeled = s;
  mislabeled.path_label = PathLabel::Fast;
  EXPECT_NE(enhanced_violation(mislabeled, cfg), "");
  auto extra = s;
  extra.sequence.slots.insert(extra.sequence.slots.begin() + 3, Slot::latent());
  EXPECT_NE(enhanced_violation(extra, cfg), "");
}

TEST(Enhancer, CorpusStatsMatchRecount) {
  const ModelConfig cfg;
  const auto corpus = generate_corpus(4, 60);
  const auto e = enhance_corpus(corpus, cfg);
  std::size_t steps = 0;
  for (const auto& ep : corpus.episodes) steps += ep.steps.size();
  ASSERT_EQ(e.samples.size(), steps);
  std::size_t slow = 0;
  for (const auto& s : e.samples) {
    EXPECT_EQ(s.path_label, classify_perception(s.target_action));
    slow += classify_perception(s.target_action) == PathLabel::Slow;
    EXPECT_EQ(enhanced_violation(s, cfg), "");
    EXPECT_LE(s.history.size(), 2u);
    ASSERT_TRUE(s.thought.has_value());
    EXPECT_LE(s.thought->text.size(), kMaxThoughtBytes);
    EXPECT_FALSE(s.thought->text.empty());
  }
  EXPECT_EQ(e.stats.slow, slow);
  EXPECT_EQ(e.stats.fast, steps - slow);
}

TEST(Enhancer, ExactSlowCountOnHandBuiltCorpus) {
  Corpus c;
  CounterRng rng(3);
  for (int i = 0; i < 100; ++i) {
    Episode ep;
    ep.goal = "g";
    EpisodeStep st;
    st.screen = generate_screen(static_cast<std::uint64_t>(i));
    st.action = i < 40 ? make_click(sfa::testing::random_point(rng)) : make_simple(ActionType::PressBack);
    ep.steps.push_back(st);
    c.episodes.push_back(ep);
  }
  EXPECT_EQ(enhance_corpus(c, ModelConfig{}).stats.slow, 40u);
  const auto empty = enhance_corpus(Corpus{}, ModelConfig{});
  EXPECT_EQ(empty.samples.size(), 0u);
  EXPECT_EQ(empty.stats.samples + empty.stats.slow + empty.stats.fast, 0u);
}

TEST(Enhancer, HistoryWindowSlides) {
  const auto corpus = generate_corpus(8, 40, TemplateMix::parse("scroll_then_tap=1"));
  const auto e = enhance_corpus(corpus, ModelConfig{});
  for (const auto& s : e.samples) EXPECT_EQ(s.history.size(), std::min<std::size_t>(s.step, 2));
}

TEST(Enhancer, JsonlRoundTrip) {
  const ModelConfig cfg;
  const auto corpus = generate_corpus(6, 20);
  const auto e = enhance_corpus(corpus, cfg);
  PixelStore store;
  for (const auto& ep : corpus.episodes) {
    for (const auto& st : ep.steps) store.add(st.screen);
  }
  const auto text = enhanced_to_jsonl(e);
  const auto back = parse_enhanced_jsonl(text, store, cfg);
  ASSERT_EQ(back.samples.size(), e.samples.size());
  EXPECT_EQ(enhanced_to_jsonl(back), text);
  auto bad = text;
  bad.replace(bad.find("\"schema_version\":1"), 18, "\"schema_version\":7");
  EXPECT_THROW(parse_enhanced_jsonl(bad, store, cfg), DataError);
}

TEST(LatentSwap, ShrinksIdempotentAndLocal) {
  const ModelConfig cfg;
  auto s = enhance_sample(blank(), "r", "tap the mail icon", {}, make_click({0.5, 0.5}), cfg);
  s.thought = ThoughtAnnotation{"twenty bytes thought"};
  ASSERT_EQ(s.thought->text.size(), 20u);
  const auto a = with_thought(s);
  EXPECT_EQ(a.sequence.count_tag(SlotTag::LatentThought), 0u);
  EXPECT_NE(render_prompt(a).find("<bot>twenty bytes thought<eot>"), std::string::npos);
  const auto b = latent_swap(a, 8);
  EXPECT_EQ(a.sequence.size() - b.sequence.size(), 12u);
  EXPECT_EQ(render_prompt(b), render_prompt(s));
  EXPECT_EQ(render_prompt(latent_swap(b, 8)), render_prompt(b));
  EXPECT_EQ(enhanced_violation(b, cfg), "");
  const auto bot = *a.sequence.find(tok::kBot);
  for (std::size_t i = 0; i <= bot; ++i) EXPECT_EQ(a.sequence.slots[i].tag, b.sequence.slots[i].tag);
  for (std::size_t i = 1; i <= 200; ++i) {
    const auto& x = a.sequence.slots[a.sequence.size() - i];
    const auto& y = b.sequence.slots[b.sequence.size() - i];
    EXPECT_EQ(x.tag, y.tag);
    EXPECT_EQ(x.token, y.token);
    EXPECT_EQ(x.loss, y.loss);
  }
  EnhancedSample none;
  none.sequence.push_text("abc");
  EXPECT_THROW(latent_swap(none, 8), DataError);
  EnhancedSample unannotated = s;
  unannotated.thought.reset();
  EXPECT_THROW(with_thought(unannotated), DataError);
}
