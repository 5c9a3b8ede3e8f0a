// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>

#include "sfa/action/codec.hpp"
#include "sfa/errors.hpp"
#include "sfa/rng.hpp"
#include "sfa/sim/corpus.hpp"
#include "sfa/sim/episode.hpp"
#include "sfa/sim/screen.hpp"

using namespace sfa;

TEST(Screen, SeedDeterminism) {
  const auto a = generate_screen(7);
  const auto b = generate_screen(7);
  EXPECT_EQ(a.elements, b.elements);
  EXPECT_EQ(a.pixels, b.pixels);
}

TEST(Screen, SingleElementConfig) {
  for (std::uint64_t s = 0; s < 20; ++s) EXPECT_EQ(generate_screen(s, {1, 1}).elements.size(), 1u);
}

TEST(Screen, RejectsBadRange) {
  EXPECT_THROW(generate_screen(1, {0, 3}), ValidationError);
  EXPECT_THROW(generate_screen(1, {2, 13}), ValidationError);
}

TEST(Screen, TooDenseIsGenerationError) {
  Screen s;
  CounterRng rng(3);
  place_element(s, rng, ElementKind::Label, kGlyphLabel, "x", 64, 64);
  EXPECT_THROW(place_element(s, rng, ElementKind::Icon, 0, "mail", 8, 8), GenerationError);
}

TEST(Screen, PairwiseNonOverlapBruteForce) {
  for (std::uint64_t seed = 0; seed < 300; ++seed) {
    const auto s = generate_screen(seed, {1, 8});
    for (std::size_t i = 0; i < s.elements.size(); ++i) {
      const auto& a = s.elements[i].bbox;
      EXPECT_TRUE(a.x0 >= 0 && a.x0 < a.x1 && a.x1 <= 1 && a.y0 >= 0 && a.y0 < a.y1 && a.y1 <= 1);
      for (std::size_t j = 0; j < s.elements.size(); ++j) {
        if (i == j) continue;
        const auto& b = s.elements[j].bbox;
        const bool overlap = std::max(a.x0, b.x0) < std::min(a.x1, b.x1) && std::max(a.y0, b.y0) < std::min(a.y1, b.y1);
        EXPECT_FALSE(overlap) << "seed " << seed;
      }
    }
  }
}

TEST(Render, EmptyIsBackground) {
  Screen s;
  render_pixels(s);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) EXPECT_EQ(s.pixel(x, y), kBackground);
  }
}

TEST(Render, FullWidthElementCoversItsRows) {
  Screen s;
  s.elements.push_back({0, ElementKind::Label, {0.0, 0.25, 1.0, 0.5}, kGlyphLabel, "label"});
  render_pixels(s);
  for (int y = 0; y < 64; ++y) {
    for (int x = 0; x < 64; ++x) {
      const bool in = y >= 16 && y < 32;
      EXPECT_EQ(s.pixel(x, y) != kBackground, in) << x << "," << y;
    }
  }
}

TEST(Render, CenterPixelMatchesGlyphOracle) {
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    const auto s = generate_screen(seed);
    for (const auto& e : s.elements) {
      const int x0 = static_cast<int>(e.bbox.x0 * 64), y0 = static_cast<int>(e.bbox.y0 * 64);
      const int w = static_cast<int>(e.bbox.x1 * 64) - x0, h = static_cast<int>(e.bbox.y1 * 64) - y0;
      const int cx = x0 + w / 2, cy = y0 + h / 2;
      EXPECT_EQ(s.pixel(cx, cy), glyph_color(e.glyph, cx - x0, cy - y0, w, h));
      EXPECT_NE(s.pixel(x0, y0), kBackground);
    }
  }
}

// Twins have equal means over any 4-aligned block, so 8x8 pooling cannot tell
// them apart while 4x4 patches can.
TEST(Render, TwinsIndistinguishableWhenPooled) {
  for (int icon = 0; icon < 8; icon += 2) {
    double a[3] = {0, 0, 0}, b[3] = {0, 0, 0};
    bool differ = false;
    for (int y = 0; y < 4; ++y) {
      for (int x = 0; x < 4; ++x) {
        const auto ca = glyph_color(icon, x, y, 8, 8), cb = glyph_color(icon + 1, x, y, 8, 8);
        for (int c = 0; c < 3; ++c) {
          a[c] += ca[static_cast<std::size_t>(c)];
          b[c] += cb[static_cast<std::size_t>(c)];
        }
        differ = differ || ca != cb;
      }
    }
    EXPECT_TRUE(differ);
    for (int c = 0; c < 3; ++c) EXPECT_EQ(a[c], b[c]);
  }
}

TEST(Episode, TapTargetShape) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto e = generate_episode(seed, TaskTemplate::TapTarget);
    ASSERT_EQ(e.steps.size(), 2u);
    const auto& a = e.steps[0].action;
    EXPECT_TRUE(a.type == ActionType::Click || a.type == ActionType::Select);
    const auto caption = e.goal.substr(e.goal.find(" the ") + 5, e.goal.size() - e.goal.find(" the ") - 10);
    const auto* el = e.steps[0].screen.find(ElementKind::Icon, caption);
    ASSERT_NE(el, nullptr) << e.goal;
    EXPECT_EQ(a.touch, quantize(el->bbox.center()));
    EXPECT_EQ(e.steps[1].action, make_simple(ActionType::StatusTaskComplete));
  }
}

TEST(Episode, ScrollThenTapStartsWithDisplacedScroll) {
  for (std::uint64_t seed = 0; seed < 30; ++seed) {
    const auto e = generate_episode(seed, TaskTemplate::ScrollThenTap);
    ASSERT_EQ(e.steps.size(), 3u);
    const auto& a = e.steps[0].action;
    EXPECT_TRUE(is_scroll(a.type));
    EXPECT_FALSE(a.touch.is_sentinel());
    EXPECT_NE(a.touch, a.lift);
    if (e.goal.rfind("scroll down", 0) == 0) {
      EXPECT_EQ(a.type, ActionType::ScrollDown);
      EXPECT_EQ(a.touch.x, a.lift.x);
    }
  }
}

TEST(Episode, OracleReproducesEveryAction) {
  std::size_t checked = 0;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto e = generate_episode(seed * 7919 + 1, kAllTemplates[seed % 4]);
    EXPECT_EQ(episode_violation(e), "") << e.goal;
    for (const auto& st : e.steps) {
      const auto o = oracle_action(e.goal, st.screen);
      ASSERT_TRUE(o.has_value()) << e.goal;
      EXPECT_EQ(*o, st.action) << e.goal;
      ++checked;
    }
  }
  EXPECT_GT(checked, 400u);
}

TEST(Episode, ClicksStrictlyInsideTarget) {
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    const auto e = generate_episode(seed, TaskTemplate::TapTarget);
    const auto& st = e.steps[0];
    bool inside = false;
    for (const auto& el : st.screen.elements) inside = inside || el.bbox.contains_strictly(st.action.touch);
    EXPECT_TRUE(inside);
  }
}

TEST(Corpus, ExactTemplateCounts) {
  TemplateMix mix = TemplateMix::parse("tap_target=0.5,scroll_then_tap=0.5");
  const auto c = generate_corpus(11, 100, mix);
  EXPECT_EQ(c.manifest.template_counts[0], 50u);
  EXPECT_EQ(c.manifest.template_counts[1], 50u);
  EXPECT_EQ(c.manifest.template_counts[2], 0u);
  std::array<std::size_t, 4> seen{};
  for (const auto& e : c.episodes) ++seen[static_cast<std::size_t>(e.task)];
  EXPECT_EQ(seen, c.manifest.template_counts);
}

TEST(Corpus, ByteIdenticalAcrossRuns) {
  const auto a = serialize_corpus(generate_corpus(5, 40));
  const auto b = serialize_corpus(generate_corpus(5, 40));
  EXPECT_EQ(a.jsonl, b.jsonl);
  EXPECT_EQ(a.pixels, b.pixels);
  EXPECT_EQ(a.manifest_json, b.manifest_json);
}

TEST(Corpus, ShardsMatchSequential) {
  const auto whole = generate_corpus(9, 30);
  for (std::size_t i = 0; i < 30; ++i) {
    const auto& e = whole.episodes[i];
    const auto again = generate_episode(e.seed, e.task);
    EXPECT_EQ(again.goal, e.goal);
    EXPECT_EQ(again.steps.size(), e.steps.size());
  }
}

TEST(Corpus, LabelCountsMatchRecount) {
  const auto c = generate_corpus(21, 120);
  std::size_t slow = 0, fast = 0;
  for (const auto& e : c.episodes) {
    for (const auto& st : e.steps) {
      const bool s = st.action.type == ActionType::Click || st.action.type == ActionType::Select;
      ++(s ? slow : fast);
    }
  }
  EXPECT_EQ(c.manifest.slow_steps, slow);
  EXPECT_EQ(c.manifest.fast_steps, fast);
}

TEST(Corpus, FileRoundTrip) {
  const auto dir = std::filesystem::temp_directory_path() / "sfa_corpus_rt";
  std::filesystem::remove_all(dir);
  const auto c = generate_corpus(3, 25);
  write_corpus(dir, c);
  const auto back = read_corpus(dir);
  ASSERT_EQ(back.episodes.size(), c.episodes.size());
  for (std::size_t i = 0; i < c.episodes.size(); ++i) {
    ASSERT_EQ(back.episodes[i].steps.size(), c.episodes[i].steps.size());
    for (std::size_t k = 0; k < c.episodes[i].steps.size(); ++k) {
      EXPECT_EQ(back.episodes[i].steps[k].screen.pixels, c.episodes[i].steps[k].screen.pixels);
      EXPECT_EQ(back.episodes[i].steps[k].screen.elements, c.episodes[i].steps[k].screen.elements);
      EXPECT_EQ(back.episodes[i].steps[k].action, c.episodes[i].steps[k].action);
    }
  }
  EXPECT_EQ(serialize_corpus(back).jsonl, serialize_corpus(c).jsonl);
  EXPECT_EQ(back.manifest.corpus_hash, c.manifest.corpus_hash);
  std::filesystem::remove_all(dir);
}

TEST(Corpus, MalformedRecordNamesIndex) {
  const auto ser = serialize_corpus(generate_corpus(3, 3));
  auto bad = ser.jsonl;
  bad.insert(bad.find('\n') + 1, "{\"seed\": 1}\n");
  try {
    parse_corpus(bad, ser.pixels);
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("record 1"), std::string::npos);
  }
}
