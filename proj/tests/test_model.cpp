// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cmath>

#include "sfa/action/codec.hpp"
#include "sfa/errors.hpp"
#include "sfa/model/generate.hpp"
#include "sfa/model/prompt.hpp"
#include "sfa/model/transformer.hpp"
#include "sfa/tensor/grad_check.hpp"
#include "sfa/tensor/ops.hpp"
#include "support.hpp"

using namespace sfa;
using sfa::testing::random_action;
using sfa::testing::random_image;
using sfa::testing::tiny_config;

namespace {

TokenSequence random_sequence(CounterRng& rng, const ModelConfig& cfg, std::size_t len,
                              std::shared_ptr<PixelImage> img) {
  TokenSequence s;
  s.image = std::move(img);
  s.push_token(tok::kUser);
  for (std::size_t i = 0; i < cfg.global_slots(); ++i) s.slots.push_back(Slot::image(i));
  while (s.size() < len) {
    const auto r = rng.below(10);
    if (r == 0 && s.size() > 1) {
      s.slots.push_back(Slot::latent());
    } else {
      s.push_token(static_cast<int>(rng.below(kVocabSize)), rng.below(3) == 0);
    }
  }
  return s;
}

TokenSequence slow_sequence(const ModelConfig& cfg, std::shared_ptr<PixelImage> img, const ActionDecision& a) {
  auto seq = build_prompt(img, "tap the mail icon", {}, cfg);
  seq.push_token(tok::kBot, true);
  for (std::size_t i = 0; i < cfg.n_latent; ++i) seq.slots.push_back(Slot::latent());
  seq.push_token(tok::kEot, true);
  for (int t : request_turn_tokens()) seq.push_token(t);
  seq.push_token(tok::kBop, true);
  seq.push_token(tok::kCtrl, true);
  seq.push_token(tok::kEop, true);
  seq.push_token(tok::kUser);
  seq.push_token(tok::kDetectionImage);
  for (std::size_t i = 0; i < cfg.perception_slots(); ++i) seq.slots.push_back(Slot::perception(i));
  seq.push_token(tok::kAssistant);
  seq.push_text(serialize_action(a), true);
  seq.push_token(tok::kEos, true);
  return seq;
}

}  // namespace

TEST(Vocab, SpecialsOutsideByteRange) {
  EXPECT_EQ(kVocabSize, 268);
  for (int id = 256; id < kVocabSize; ++id) {
    EXPECT_TRUE(is_special(id));
    EXPECT_EQ(special_from_name(special_name(id)), id);
  }
  EXPECT_FALSE(is_special(255));
  EXPECT_EQ(token_text('a'), "a");
  EXPECT_EQ(token_text(tok::kBop), "<bop>");
}

TEST(ModelConfig, JsonRoundTripAndUnknownKeys) {
  ModelConfig c;
  c.latent_map = LatentMap::Linear;
  c.n_latent = 4;
  const auto back = ModelConfig::from_json(c.to_json());
  EXPECT_EQ(back.to_json(), c.to_json());
  EXPECT_EQ(back.digest(), c.digest());
  EXPECT_THROW(ModelConfig::from_json("{\"d_modle\": 3}"), ValidationError);
  ModelConfig bad;
  bad.n_heads = 5;
  EXPECT_THROW(bad.validate(), ValidationError);
}

TEST(Model, DefaultCensusUnderBudget) {
  LatentTransformer m(ModelConfig{});
  const auto census = m.census();
  std::size_t sum = 0;
  for (std::size_t i = 0; i + 1 < census.size(); ++i) sum += census[i].second;
  EXPECT_EQ(census.back().first, "total");
  EXPECT_EQ(census.back().second, sum);
  EXPECT_LT(m.parameter_count(), 1'500'000u);
}

TEST(Model, GlobalImageMatchesPoolingOracle) {
  LatentTransformer m(ModelConfig{});
  CounterRng rng(4);
  const auto img = random_image(rng);
  const auto slots = m.encode_global_image(*img);
  ASSERT_EQ(slots.rows(), 64u);
  const auto& w = m.params().at("image.proj.weight").var.value();
  const auto& b = m.params().at("image.proj.bias").var.value();
  for (std::size_t j = 0; j < 64; ++j) {
    double mean[3] = {0, 0, 0};
    const std::size_t pr = j / 8, pc = j % 8;
    for (std::size_t y = 0; y < 8; ++y) {
      for (std::size_t x = 0; x < 8; ++x) {
        for (std::size_t c = 0; c < 3; ++c) mean[c] += img->pixels[((pr * 8 + y) * 64 + pc * 8 + x) * 3 + c] / 255.0 / 64.0;
      }
    }
    for (std::size_t k = 0; k < 64; ++k) {
      const double want = b[k] + mean[0] * w.at(0, k) + mean[1] * w.at(1, k) + mean[2] * w.at(2, k);
      EXPECT_NEAR(slots.at(j, k), want, 1e-12);
    }
  }
}

TEST(Model, ConstantImageGivesIdenticalSlots) {
  LatentTransformer m(ModelConfig{});
  PixelImage img{64, 64, std::vector<std::uint8_t>(64 * 64 * 3, 77)};
  const auto slots = m.encode_global_image(img);
  for (std::size_t j = 1; j < slots.rows(); ++j) {
    for (std::size_t k = 0; k < slots.cols(); ++k) EXPECT_EQ(slots.at(j, k), slots.at(0, k));
  }
  PixelImage odd{60, 64, std::vector<std::uint8_t>(60 * 64 * 3, 0)};
  EXPECT_THROW(m.encode_global_image(odd), DimensionError);
}

TEST(Model, LengthOneSequence) {
  LatentTransformer m(tiny_config());
  TokenSequence s;
  s.push_token('x');
  const auto out = m.forward(s);
  EXPECT_EQ(out.hidden.rows(), 1u);
  EXPECT_EQ(out.logits.rows(), 1u);
  EXPECT_EQ(out.logits.cols(), static_cast<std::size_t>(kVocabSize));
}

TEST(Model, OverlengthIsSequenceError) {
  auto cfg = tiny_config();
  cfg.max_seq = 8;
  LatentTransformer m(cfg);
  TokenSequence s;
  s.push_text("123456789");
  EXPECT_THROW(m.forward(s), SequenceError);
}

TEST(Model, FuturePerturbationLeavesPastUnchanged) {
  const auto cfg = tiny_config();
  LatentTransformer m(cfg);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CounterRng rng(seed);
    const auto img = random_image(rng, 16, 16);
    auto s = random_sequence(rng, cfg, 40, img);
    const auto base = m.forward(s);
    const std::size_t t = 6 + rng.below(30);
    auto p = s;
    for (std::size_t i = t + 1; i < p.size(); ++i) p.slots[i] = Slot::tokenized(static_cast<int>(rng.below(256)));
    const auto pert = m.forward(p);
    for (std::size_t i = 0; i <= t; ++i) {
      for (std::size_t k = 0; k < base.logits.cols(); ++k) EXPECT_NEAR(base.logits.at(i, k), pert.logits.at(i, k), 1e-12);
    }
  }
}

TEST(Model, IncrementalMatchesSinglePass) {
  const auto cfg = tiny_config();
  LatentTransformer m(cfg);
  CounterRng rng(9);
  const auto img = random_image(rng, 16, 16);
  auto s = slow_sequence(cfg, img, make_click({0.25, 0.5}));
  const auto whole = m.forward(s);
  NoGradGuard g;
  Session inc(m, img);
  for (const auto& slot : s.slots) inc.append(slot);
  const auto h = inc.hidden_all().value();
  EXPECT_LT(max_abs_diff(h, whole.hidden), 1e-9);
  EXPECT_EQ(inc.perception_calls(), 1u);
}

TEST(Model, IdenticalCallsBitwiseEqual) {
  const auto cfg = tiny_config();
  LatentTransformer m(cfg);
  CounterRng rng(2);
  auto s = random_sequence(rng, cfg, 30, random_image(rng, 16, 16));
  EXPECT_EQ(m.forward(s).logits, m.forward(s).logits);
}

TEST(Model, IdentityLatentStepIsExact) {
  LatentTransformer m(tiny_config());
  Tensor h({16});
  for (std::size_t i = 0; i < 16; ++i) h[i] = std::sin(static_cast<double>(i) * 1.3);
  EXPECT_EQ(m.latent_step(h), h);
}

TEST(Model, LatentSlotFeedsPreviousHidden) {
  const auto cfg = tiny_config();
  LatentTransformer m(cfg);
  TokenSequence s;
  s.push_text("ab");
  s.push_token(tok::kBot);
  s.slots.push_back(Slot::latent());
  NoGradGuard g;
  Session sess(m, nullptr);
  sess.append(s.slots);
  EXPECT_EQ(sess.resolved_embedding(3), sess.hidden(2).value().reshaped({16}));
}

TEST(Model, LossRejectsContinuousTargets) {
  LatentTransformer m(tiny_config());
  TokenSequence s;
  s.push_text("ab");
  s.slots.push_back(Slot::latent());
  s.slots.back().loss = true;
  EXPECT_THROW(m.loss(s), SequenceError);
  TokenSequence none;
  none.push_text("ab");
  EXPECT_THROW(m.loss(none), SequenceError);
}

TEST(Model, FullLossGradCheck) {
  auto cfg = tiny_config();
  cfg.latent_map = LatentMap::Linear;
  cfg.control_keys = ControlKeys::AllThree;
  cfg.perception_pool = 2;
  LatentTransformer m(cfg);
  CounterRng rng(5);
  const auto img = random_image(rng, 16, 16);
  auto s = slow_sequence(cfg, img, make_click({0.125, 0.75}));
  std::vector<Parameter> trainable;
  for (auto& p : m.params().items()) trainable.push_back(p);
  const auto report = grad_check([&] { return m.loss(s); }, trainable, {1e-4, 8, 3});
  EXPECT_LE(report.max_rel_error, 1e-4) << report.worst_parameter;
  EXPECT_GT(report.coordinates, 100u);
}

TEST(Perception, FineFeaturesShapeAndConstantRows) {
  LatentTransformer m(ModelConfig{});
  PixelImage img{64, 64, std::vector<std::uint8_t>(64 * 64 * 3, 200)};
  const auto f = m.vpm().encode_fine(img);
  EXPECT_EQ(f.features.rows(), 256u);
  EXPECT_EQ(f.rows * f.cols, 256u);
  for (std::size_t r = 1; r < 256; ++r) {
    for (std::size_t c = 0; c < f.features.cols(); ++c) EXPECT_EQ(f.features.at(r, c), f.features.at(0, c));
  }
  PixelImage odd{62, 64, std::vector<std::uint8_t>(62 * 64 * 3, 0)};
  EXPECT_THROW(m.vpm().encode_fine(odd), DimensionError);
}

// softmax(Q K^T / sqrt(d_k)) V + F written out with explicit loops.
TEST(Perception, CrossAttendMatchesFormulaOracle) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    auto cfg = tiny_config();
    cfg.m_slots = 1 + seed % 4;
    cfg.seed = seed;
    LatentTransformer m(cfg);
    const auto& P = m.params();
    CounterRng rng(seed + 100);
    const auto img = random_image(rng, 16, 16);
    const auto f = m.vpm().encode_fine(*img);
    Tensor h({1, cfg.d_model});
    for (auto& x : h.data()) x = rng.normal();
    const auto out = m.vpm().cross_attend(f, h);
    const std::size_t dk = cfg.d_k(), df = cfg.d_f, ms = cfg.m_slots, d = cfg.d_model;
    const auto& wq = P.at("vpm.proj_q.weight").var.value();
    const auto& bq = P.at("vpm.proj_q.bias").var.value();
    const auto& wk = P.at("vpm.proj_k.weight").var.value();
    const auto& bk = P.at("vpm.proj_k.bias").var.value();
    const auto& wv = P.at("vpm.proj_v.weight").var.value();
    const auto& bv = P.at("vpm.proj_v.bias").var.value();
    std::vector<double> K(ms * dk), V(ms * df);
    for (std::size_t j = 0; j < ms * dk; ++j) {
      K[j] = bk[j];
      for (std::size_t i = 0; i < d; ++i) K[j] += h[i] * wk.at(i, j);
    }
    for (std::size_t j = 0; j < ms * df; ++j) {
      V[j] = bv[j];
      for (std::size_t i = 0; i < d; ++i) V[j] += h[i] * wv.at(i, j);
    }
    for (std::size_t p = 0; p < f.features.rows(); ++p) {
      std::vector<double> q(dk);
      for (std::size_t j = 0; j < dk; ++j) {
        q[j] = bq[j];
        for (std::size_t i = 0; i < df; ++i) q[j] += f.features.at(p, i) * wq.at(i, j);
      }
      std::vector<double> s(ms);
      double mx = -1e300, total = 0;
      for (std::size_t k = 0; k < ms; ++k) {
        s[k] = 0;
        for (std::size_t j = 0; j < dk; ++j) s[k] += q[j] * K[k * dk + j];
        s[k] /= std::sqrt(static_cast<double>(dk));
        mx = std::max(mx, s[k]);
      }
      for (auto& x : s) total += (x = std::exp(x - mx));
      double row_sum = 0;
      for (std::size_t k = 0; k < ms; ++k) {
        EXPECT_NEAR(out.attention.at(p, k), s[k] / total, 1e-12);
        row_sum += out.attention.at(p, k);
      }
      EXPECT_NEAR(row_sum, 1.0, 1e-12);
      for (std::size_t c = 0; c < df; ++c) {
        double z = f.features.at(p, c);
        for (std::size_t k = 0; k < ms; ++k) z += s[k] / total * V[k * df + c];
        EXPECT_NEAR(out.z_p.at(p, c), z, 1e-12);
      }
    }
  }
}

TEST(Perception, ZeroValueProjectionIsResidualIdentity) {
  LatentTransformer m(ModelConfig{});
  m.params().at("vpm.proj_v.weight").var.mutable_value().fill(0.0);
  m.params().at("vpm.proj_v.bias").var.mutable_value().fill(0.0);
  CounterRng rng(1);
  const auto f = m.vpm().encode_fine(*random_image(rng));
  Tensor h({1, 64});
  for (auto& x : h.data()) x = rng.normal();
  EXPECT_EQ(m.vpm().cross_attend(f, h).z_p, f.features);
}

TEST(Perception, SingleSlotAttentionIsOne) {
  auto cfg = ModelConfig{};
  cfg.m_slots = 1;
  LatentTransformer m(cfg);
  CounterRng rng(3);
  const auto f = m.vpm().encode_fine(*random_image(rng));
  Tensor h({1, 64});
  for (auto& x : h.data()) x = rng.normal();
  const auto out = m.vpm().cross_attend(f, h);
  const auto& wv = m.params().at("vpm.proj_v.weight").var.value();
  const auto& bv = m.params().at("vpm.proj_v.bias").var.value();
  for (std::size_t p = 0; p < 256; ++p) {
    EXPECT_EQ(out.attention.at(p, 0), 1.0);
    for (std::size_t c = 0; c < 32; ++c) {
      double v = bv[c];
      for (std::size_t i = 0; i < 64; ++i) v += h[i] * wv.at(i, c);
      EXPECT_NEAR(out.z_p.at(p, c), f.features.at(p, c) + v, 1e-12);
    }
  }
}

// Padding Q and K with zero columns doubles d_k without changing Q K^T, so the
// pre-softmax scores shrink by exactly 1/sqrt(2).
TEST(Perception, DoublingKeyWidthScalesScores) {
  CounterRng rng(8);
  Tensor q({5, 4}), k({3, 4}), q2({5, 8}), k2({3, 8});
  for (std::size_t r = 0; r < 5; ++r) {
    for (std::size_t c = 0; c < 4; ++c) q2.at(r, c) = q.at(r, c) = rng.normal();
  }
  for (std::size_t r = 0; r < 3; ++r) {
    for (std::size_t c = 0; c < 4; ++c) k2.at(r, c) = k.at(r, c) = rng.normal();
  }
  const auto a = ops::attention_weights(q, k), b = ops::attention_weights(q2, k2);
  for (std::size_t r = 0; r < 5; ++r) {
    // log-odds between keys 0 and 1 are the score difference
    const double la = std::log(a.at(r, 0) / a.at(r, 1)), lb = std::log(b.at(r, 0) / b.at(r, 1));
    EXPECT_NEAR(lb, la / std::sqrt(2.0), 1e-12);
  }
}

TEST(Perception, WidthMismatchIsDimensionError) {
  LatentTransformer m(ModelConfig{});
  FineFeatureMap f{Tensor({256, 31}), 16, 16};
  EXPECT_THROW(m.vpm().cross_attend(f, Tensor({1, 64})), DimensionError);
  FineFeatureMap ok{Tensor({256, 32}), 16, 16};
  EXPECT_THROW(m.vpm().cross_attend(ok, Tensor({1, 63})), DimensionError);
}

TEST(Perception, InjectAppendsProjectedRows) {
  LatentTransformer m(ModelConfig{});
  CounterRng rng(6);
  const auto f = m.vpm().encode_fine(*random_image(rng));
  Tensor h({1, 64});
  for (auto& x : h.data()) x = rng.normal();
  const auto out = m.vpm().cross_attend(f, h);
  TokenSequence seq;
  seq.push_text("abc");
  seq.push_token(tok::kDetectionImage);
  m.vpm().inject_features(seq, out.z_p);
  EXPECT_EQ(seq.size(), 4u + 256u);
  const auto proj = m.vpm().project(out.z_p);
  for (std::size_t k = 0; k < 256; ++k) {
    const auto& slot = seq.slots[4 + k];
    EXPECT_EQ(slot.tag, SlotTag::PerceptionFeature);
    EXPECT_EQ(slot.index, k);
    for (std::size_t c = 0; c < 64; ++c) EXPECT_EQ((*slot.embedding)[c], proj.at(k, c));
  }
}

TEST(Grammar, AcceptsEverySerializedAction) {
  CounterRng rng(12);
  for (int i = 0; i < 1000; ++i) {
    auto a = random_action(rng, true);
    ActionGrammar g;
    for (char c : serialize_action(a)) g.feed(static_cast<unsigned char>(c));
    g.feed(tok::kEos);
    EXPECT_TRUE(g.done());
    EXPECT_EQ(g.type(), a.type);
  }
}

TEST(Grammar, RejectsOffGrammarTokens) {
  ActionGrammar g;
  EXPECT_THROW(g.feed('B'), GenerationError);
  for (char c : kActionPrefix) g.feed(static_cast<unsigned char>(c));
  EXPECT_THROW(g.feed(tok::kCtrl), GenerationError);
  for (char c : std::string_view("CLICK, touch_point:[")) g.feed(static_cast<unsigned char>(c));
  EXPECT_THROW(g.feed('2'), GenerationError);
  g.feed('1');
  EXPECT_EQ(g.allowed(), std::vector<int>{'.'});
}

class GenerateTest : public ::testing::Test {
 protected:
  GenerateTest() : model(make_cfg()) {}
  static ModelConfig make_cfg() {
    auto c = tiny_config();
    c.max_seq = 800;
    return c;
  }
  TokenSequence prompt() {
    CounterRng rng(21);
    return build_prompt(random_image(rng, 16, 16), "tap the bank icon", {}, model.config());
  }
  LatentTransformer model;
};

TEST_F(GenerateTest, EveryModeYieldsParsableAction) {
  for (auto mode : {DecisionMode::Adaptive, DecisionMode::ForceFast, DecisionMode::ForceSlow}) {
    const auto g = generate(model, prompt(), {400, mode});
    ASSERT_TRUE(g.finished) << decision_mode_name(mode);
    EXPECT_NO_THROW(parse_action(g.action_text)) << g.action_text;
    EXPECT_EQ(g.sequence.count(tok::kBot), 1u);
    EXPECT_EQ(g.sequence.count(tok::kEot), 1u);
    EXPECT_EQ(g.sequence.count_tag(SlotTag::LatentThought), model.config().n_latent);
    EXPECT_EQ(g.latent_steps, model.config().n_latent);
    EXPECT_EQ(g.perception_calls, g.bop_count);
    if (mode == DecisionMode::ForceSlow) {
      EXPECT_EQ(g.perception_calls, 1u);
    }
    if (mode == DecisionMode::ForceFast) {
      EXPECT_EQ(g.perception_calls, 0u);
    }
    EXPECT_EQ(g.sequence.slots.back().token, tok::kEos);
  }
}

TEST_F(GenerateTest, RiggedBopProducesOneFrame) {
  GenerateOptions opt;
  std::size_t hooked = 0;
  opt.on_perception = [&](const PerceptionOutput&) { ++hooked; };
  opt.logit_hook = [](std::span<double> logits, std::size_t) { logits[tok::kBop] = 1e9; };
  auto p = prompt();
  p.push_token(tok::kBot);
  for (std::size_t i = 0; i < model.config().n_latent; ++i) p.slots.push_back(Slot::latent());
  p.push_token(tok::kEot);
  for (int t : request_turn_tokens()) p.push_token(t);
  const auto g = generate(model, p, opt);
  EXPECT_EQ(g.decision, PathLabel::Slow);
  EXPECT_EQ(g.bop_count, 1u);
  EXPECT_EQ(hooked, 1u);
  const auto text = g.sequence.text();
  EXPECT_NE(text.find("<bop><ctrl><eop><user><detection_image><assistant>Action Decision:"), std::string::npos);
  EXPECT_EQ(text.find("<bop>"), text.rfind("<bop>"));
  EXPECT_EQ(g.sequence.count_tag(SlotTag::PerceptionFeature), model.config().perception_slots());
}

TEST_F(GenerateTest, LatentPositionsNeverSampled) {
  GenerateOptions opt;
  std::vector<std::size_t> sampled;
  opt.logit_hook = [&](std::span<double>, std::size_t pos) { sampled.push_back(pos); };
  const auto g = generate(model, prompt(), opt);
  for (auto pos : sampled) {
    ASSERT_LT(pos + 1, g.sequence.size());
    EXPECT_TRUE(g.sequence.slots[pos + 1].is_token());
    EXPECT_NE(g.sequence.slots[pos].tag, SlotTag::LatentThought);
  }
  EXPECT_GT(sampled.size(), 0u);
}

TEST_F(GenerateTest, ContinuesInsideActionTurn) {
  auto p = prompt();
  p.push_token(tok::kBot);
  for (std::size_t i = 0; i < model.config().n_latent; ++i) p.slots.push_back(Slot::latent());
  p.push_token(tok::kEot);
  for (int t : request_turn_tokens()) p.push_token(t);
  p.push_text("Action Decision:action_type:SCROLL U");
  const auto g = generate(model, p);
  EXPECT_TRUE(g.finished);
  EXPECT_EQ(g.perception_calls, 0u);
  EXPECT_EQ(parse_action(g.action_text), make_scroll(ActionType::ScrollUp));
}

TEST_F(GenerateTest, DeterministicAcrossRuns) {
  const auto a = generate(model, prompt());
  const auto b = generate(model, prompt());
  EXPECT_EQ(a.sequence.text(), b.sequence.text());
  EXPECT_EQ(a.action_text, b.action_text);
}

TEST_F(GenerateTest, MaxNewStopsEarly) {
  const auto g = generate(model, prompt(), {20, DecisionMode::Adaptive});
  EXPECT_FALSE(g.finished);
  EXPECT_EQ(g.appended, 20u);
}
