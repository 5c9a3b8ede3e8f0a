// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <filesystem>

#include "sfa/errors.hpp"
#include "sfa/io.hpp"
#include "sfa/model/vocab.hpp"
#include "sfa/sim/corpus.hpp"
#include "sfa/train/trainer.hpp"
#include "support.hpp"

using namespace sfa;
using sfa::testing::screen_config;

namespace {

EnhancedCorpus small_corpus(std::size_t episodes, const TemplateMix& mix = {}) {
  return enhance_corpus(generate_corpus(21, episodes, mix), screen_config());
}

PhaseConfig quick(Phase p, std::size_t epochs = 1) {
  auto c = PhaseConfig::defaults(p);
  c.epochs = epochs;
  c.lr = 3e-3;
  return c;
}

std::vector<Tensor> values(const LatentTransformer& m) { return m.params().snapshot(); }

bool same(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  for (std::size_t i = 0; i < a.numel(); ++i) {
    if (a[i] != b[i]) return false;
  }
  return true;
}

}  // namespace

TEST(Phases, DefaultsAndTrainableSets) {
  EXPECT_EQ(PhaseConfig::defaults(Phase::Align).lr, 2e-3);
  EXPECT_EQ(PhaseConfig::defaults(Phase::Thought).lr, 3e-5);
  EXPECT_EQ(PhaseConfig::defaults(Phase::Finetune).lr, 2e-5);
  EXPECT_EQ(PhaseConfig::defaults(Phase::Finetune).batch, 8u);
  EXPECT_TRUE(trainable(Phase::Align, "vpm.proj_q.weight"));
  EXPECT_FALSE(trainable(Phase::Align, "blocks.0.attn.q.weight"));
  EXPECT_FALSE(trainable(Phase::Align, "vpm.encoder.weight"));
  EXPECT_FALSE(trainable(Phase::Finetune, "vpm.encoder.bias"));
  EXPECT_TRUE(trainable(Phase::Thought, "embed.tokens"));
  EXPECT_EQ(phase_from_name("thought"), Phase::Thought);
  EXPECT_FALSE(phase_from_name("warmup"));
}

TEST(Phases, AlignTouchesOnlyTheProjector) {
  LatentTransformer model(screen_config());
  const auto corpus = small_corpus(12);
  const auto before = values(model);
  phase_align(model, corpus, quick(Phase::Align));
  const auto after = values(model);
  const auto items = model.params().items();
  bool moved = false;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (PerceptionModule::is_projector(items[i].name)) {
      moved = moved || !same(before[i], after[i]);
    } else {
      EXPECT_TRUE(same(before[i], after[i])) << items[i].name;
    }
  }
  EXPECT_TRUE(moved);
  // Frozen flags come back after the phase.
  for (const auto& p : items) EXPECT_TRUE(p.var.requires_grad()) << p.name;
}

TEST(Phases, AlignLossDecreases) {
  LatentTransformer model(screen_config());
  const auto corpus = small_corpus(90);
  ASSERT_GE(corpus.stats.samples, 200u);
  const auto r = phase_align(model, corpus, quick(Phase::Align, 3));
  ASSERT_EQ(r.trace.size(), 3u);
  EXPECT_LT(r.trace.back().mean_loss, r.trace.front().mean_loss);
}

TEST(Phases, AlignNeedsSlowSamples) {
  LatentTransformer model(screen_config());
  const auto corpus = small_corpus(5, TemplateMix::parse("type_text=1"));
  ASSERT_EQ(corpus.stats.slow, 0u);
  EXPECT_THROW(phase_align(model, corpus, quick(Phase::Align)), DataError);
}

TEST(Phases, CheckpointReloadReproducesLoss) {
  const auto cfg = screen_config();
  LatentTransformer model(cfg);
  const auto corpus = small_corpus(6);
  const auto r = phase_finetune(model, corpus, quick(Phase::Finetune));
  const double trained = mean_loss(model, corpus.samples);
  LatentTransformer fresh(cfg);
  restore_checkpoint(decode_checkpoint(encode_checkpoint(r.checkpoint)), fresh.params(), cfg.digest());
  EXPECT_EQ(mean_loss(fresh, corpus.samples), trained);
}

TEST(Phases, ThoughtNeedsAnnotations) {
  LatentTransformer model(screen_config());
  auto corpus = small_corpus(4);
  corpus.samples[1].thought.reset();
  EXPECT_THROW(phase_thought(model, corpus, quick(Phase::Thought, 2)), DataError);
}

TEST(Phases, ThoughtStagesAlternateContent) {
  LatentTransformer model(screen_config());
  const auto corpus = small_corpus(4);
  const auto r = phase_thought(model, corpus, quick(Phase::Thought, 2));
  ASSERT_EQ(r.trace.size(), 2u);
  EXPECT_EQ(r.trace[0].stage, "explicit");
  EXPECT_EQ(r.trace[1].stage, "latent");
  const auto& s = corpus.samples[0];
  const auto a = with_thought(s);
  EXPECT_NE(a.sequence.text().find("<bot>" + s.thought->text + "<eot>"), std::string::npos);
  const auto b = latent_swap(a, model.config().n_latent);
  EXPECT_EQ(b.sequence.count_tag(SlotTag::LatentThought), model.config().n_latent);
  EXPECT_EQ(enhanced_violation(b, model.config()), "");
}

TEST(Phases, LatentTargetsDoNotReachTheLoss) {
  const LatentTransformer model(screen_config());
  const auto corpus = small_corpus(3);
  for (const auto& s : corpus.samples) {
    auto probe = s.sequence;
    for (auto& slot : probe.slots) {
      if (slot.tag == SlotTag::LatentThought || slot.tag == SlotTag::PerceptionFeature) slot.token = 'Z';
    }
    NoGradGuard ng;
    EXPECT_EQ(model.loss(probe).value()[0], model.loss(s.sequence).value()[0]);
  }
}

TEST(Recipe, DeterministicAndFrozenEncoder) {
  const auto cfg = screen_config();
  const auto corpus = small_corpus(5);
  auto recipe = Recipe::desk(3);
  for (auto* p : {&recipe.align, &recipe.thought, &recipe.finetune}) p->epochs = 1;
  const auto dir = std::filesystem::temp_directory_path() / "sfa_recipe_test";
  std::filesystem::remove_all(dir);

  LatentTransformer a(cfg);
  const auto encoder = a.params().at("vpm.encoder.weight").var.value();
  const auto ra = train_recipe(a, corpus, recipe, dir / "a");
  LatentTransformer b(cfg);
  const auto rb = train_recipe(b, corpus, recipe, dir / "b");

  EXPECT_TRUE(same(encoder, a.params().at("vpm.encoder.weight").var.value()));
  EXPECT_EQ(ra.checkpoint_hashes, rb.checkpoint_hashes);
  EXPECT_EQ(ra.checkpoint_hashes.size(), 3u);
  ASSERT_EQ(ra.trace.size(), rb.trace.size());
  for (std::size_t i = 0; i < ra.trace.size(); ++i) EXPECT_EQ(ra.trace[i].mean_loss, rb.trace[i].mean_loss);
  for (const char* f : {"config.json", "loss_trace.jsonl", "manifest.json", "checkpoints/align.ckpt",
                        "checkpoints/thought.ckpt", "checkpoints/finetune.ckpt", "checkpoints/model_config.json"}) {
    EXPECT_TRUE(std::filesystem::exists(dir / "a" / f)) << f;
    EXPECT_EQ(read_file_text(dir / "a" / f), read_file_text(dir / "b" / f)) << f;
  }
  EXPECT_NE(read_file_text(dir / "a" / "manifest.json").find(ra.corpus_hash), std::string::npos);
  std::filesystem::remove_all(dir);
}
