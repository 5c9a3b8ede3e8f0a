// SPDX-License-Identifier: Apache-2.0
#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <set>
#include <sstream>

#include "sfa/errors.hpp"
#include "sfa/eval/sweep.hpp"
#include "sfa/io.hpp"
#include "sfa/model/grad_suite.hpp"
#include "sfa/sim/corpus.hpp"
#include "support.hpp"

using namespace sfa;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  auto p = fs::temp_directory_path() / ("sfa_tools_" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

int run_cli(const std::string& args, const fs::path& cwd) {
  const std::string cmd = "cd '" + cwd.string() + "' && '" SFA_CLI_PATH "' " + args + " >cli.out 2>cli.err";
  const int rc = std::system(cmd.c_str());
  return WIFEXITED(rc) ? WEXITSTATUS(rc) : -1;
}

const char* kTinyModel = "--d-model 16 --layers 1 --heads 2 --n-latent 2";

}  // namespace

TEST(GradSuite, EveryPrimitiveAndTheModelLossPass) {
  const auto entries = gradient_suite(5, 16);
  std::set<std::string> names;
  for (const auto& e : entries) {
    names.insert(e.name);
    EXPECT_GT(e.report.coordinates, 0u) << e.name;
    EXPECT_LE(e.report.max_rel_error, 1e-4) << e.name;
  }
  for (const char* n : {"matmul", "layer_norm", "softmax", "scaled_attention", "multi_head_attention",
                        "masked_cross_entropy", "gather_rows", "model.loss"}) {
    EXPECT_TRUE(names.count(n)) << n;
  }
  EXPECT_LE(max_rel_error(entries), 1e-4);
}

TEST(Ppm, RoundTripAndMalformedInput) {
  const auto dir = scratch("ppm");
  CounterRng rng(3);
  const auto img = *sfa::testing::random_image(rng, 7, 5);
  write_ppm(dir / "a.ppm", img);
  const auto back = read_ppm(dir / "a.ppm");
  EXPECT_EQ(back.width, 7);
  EXPECT_EQ(back.height, 5);
  EXPECT_EQ(back.pixels, img.pixels);

  write_file_text(dir / "c.ppm", "P6\n# comment\n2 1\n255\n" + std::string(6, 'x'));
  EXPECT_EQ(read_ppm(dir / "c.ppm").width, 2);
  write_file_text(dir / "p3.ppm", "P3\n1 1\n255\n0 0 0\n");
  EXPECT_THROW(read_ppm(dir / "p3.ppm"), ValidationError);
  write_file_text(dir / "short.ppm", "P6\n4 4\n255\nabc");
  EXPECT_THROW(read_ppm(dir / "short.ppm"), ValidationError);
  write_file_text(dir / "depth.ppm", "P6\n1 1\n65535\n");
  EXPECT_THROW(read_ppm(dir / "depth.ppm"), ValidationError);
}

TEST(Corpus, FirstStepsKeepsExactlyNSteps) {
  const auto c = generate_corpus(4, 30);
  for (std::size_t n : {0u, 1u, 7u, 40u, 100000u}) {
    const auto eps = first_steps(c.episodes, n);
    std::size_t total = 0;
    for (const auto& e : eps) total += e.steps.size();
    EXPECT_EQ(total, std::min(n, c.manifest.steps)) << n;
    for (std::size_t i = 0; i < eps.size(); ++i) EXPECT_EQ(eps[i].goal, c.episodes[i].goal);
  }
}

TEST(Corpus, TruncateRecountsStats) {
  auto e = enhance_corpus(generate_corpus(4, 30), sfa::testing::screen_config());
  const auto full = e.samples.size();
  truncate_corpus(e, 10);
  EXPECT_EQ(e.samples.size(), 10u);
  EXPECT_EQ(e.stats.samples, 10u);
  EXPECT_EQ(e.stats.slow + e.stats.fast, 10u);
  std::size_t slow = 0;
  for (const auto& s : e.samples) slow += s.path_label == PathLabel::Slow;
  EXPECT_EQ(e.stats.slow, slow);
  truncate_corpus(e, full + 5);
  EXPECT_EQ(e.samples.size(), 10u);
}

TEST(Sweep, OneRowPerValueAndWellFormedPlotData) {
  auto cfg = sfa::testing::screen_config();
  const auto train = generate_corpus(8, 12);
  const auto held = generate_corpus(9, 3);
  Recipe r = Recipe::desk(1);
  r.align.epochs = r.thought.epochs = r.finetune.epochs = 1;
  const std::size_t ns[] = {0, 2};
  const auto rows = sweep_latent(cfg, train, held.episodes, ns, r, 12);
  ASSERT_EQ(rows.size(), 2u);
  EXPECT_EQ(rows[0].n_latent, 0u);
  EXPECT_EQ(rows[1].n_latent, 2u);
  for (const auto& row : rows) {
    EXPECT_GE(row.ams, 0.0);
    EXPECT_LE(row.ams, 100.0);
    EXPECT_GE(row.routing_accuracy, 0.0);
    EXPECT_LE(row.routing_accuracy, 1.0);
  }
  std::istringstream is(sweep_plot_data(rows));
  std::string line;
  std::getline(is, line);
  EXPECT_EQ(line, "n_latent,ams,routing_accuracy");
  std::size_t n = 0;
  while (std::getline(is, line)) {
    EXPECT_EQ(std::count(line.begin(), line.end(), ','), 2);
    ++n;
  }
  EXPECT_EQ(n, 2u);
  EXPECT_THROW(sweep_latent(cfg, train, held.episodes, {}, r), ValidationError);
}

TEST(Cli, ExitCodes) {
  const auto dir = scratch("exit");
  EXPECT_EQ(run_cli("", dir), 1);
  EXPECT_EQ(run_cli("gen-corpus --no-such-flag", dir), 1);
  EXPECT_EQ(run_cli("eval --checkpoint missing.ckpt", dir), 1);
  EXPECT_EQ(run_cli("train --d-model 15", dir), 1);
  EXPECT_EQ(run_cli("--help", dir), 0);
  const auto help = read_file_text(dir / "cli.out");
  EXPECT_NE(help.find("--seed"), std::string::npos);
  EXPECT_EQ(run_cli("gradcheck --coords 8", dir), 0);
  EXPECT_NE(read_file_text(dir / "cli.out").find("max relative error"), std::string::npos);
}

TEST(Cli, TrainAndEvalAreByteReproducible) {
  const auto dir = scratch("repro");
  ASSERT_EQ(run_cli("gen-corpus --episodes 10 --out c", dir), 0);
  ASSERT_EQ(run_cli("--seed 2 gen-corpus --episodes 3 --out h", dir), 0);
  const std::string train = std::string("train --phase all --corpus c --max-samples 16 ") + kTinyModel;
  ASSERT_EQ(run_cli(train + " --out r1", dir), 0);
  ASSERT_EQ(run_cli(train + " --out r2", dir), 0);
  for (const char* f : {"checkpoints/align.ckpt", "checkpoints/thought.ckpt", "checkpoints/finetune.ckpt",
                        "loss_trace.jsonl", "manifest.json"}) {
    EXPECT_EQ(read_file_text(dir / "r1" / f), read_file_text(dir / "r2" / f)) << f;
  }
  ASSERT_EQ(run_cli("eval --mode slow --checkpoint r1/checkpoints/finetune.ckpt --corpus h --out e1", dir), 0);
  ASSERT_EQ(run_cli("eval --mode slow --checkpoint r2/checkpoints/finetune.ckpt --corpus h --out e2", dir), 0);
  EXPECT_EQ(read_file_text(dir / "e1/report_slow.json"), read_file_text(dir / "e2/report_slow.json"));
  EXPECT_EQ(read_file_text(dir / "e1/divergence_slow.csv"), read_file_text(dir / "e2/divergence_slow.csv"));

  ASSERT_EQ(run_cli("eval --mode fast --checkpoint r1/checkpoints/finetune.ckpt --corpus h --out e1", dir), 0);
  const auto tsv = read_file_text(dir / "e1/latency.tsv");
  EXPECT_EQ(tsv.rfind("mode\tsteps\tmean_us", 0), 0u);
  EXPECT_NE(tsv.find("\nfast\t"), std::string::npos);
  EXPECT_NE(tsv.find("\nslow\t"), std::string::npos);
}

TEST(Cli, SnapshotReplaysTheSameRun) {
  const auto dir = scratch("replay");
  ASSERT_EQ(run_cli("--seed 7 gen-corpus --episodes 5 --out c", dir), 0);
  fs::rename(dir / "c/gen-corpus.config.toml", dir / "snap.toml");
  const auto first = read_file_text(dir / "c/corpus.jsonl");
  fs::remove_all(dir / "c");
  ASSERT_EQ(run_cli("--config snap.toml", dir), 0);
  EXPECT_EQ(read_file_text(dir / "c/corpus.jsonl"), first);
}

TEST(Cli, OutputDirectoryOverride) {
  const auto dir = scratch("envout");
  ASSERT_EQ(run_cli("", dir), 1);
  const std::string cmd = "cd '" + dir.string() + "' && SFA_OUTPUT_DIR=outs '" SFA_CLI_PATH
                          "' gen-corpus --episodes 2 --out c >/dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_TRUE(fs::exists(dir / "outs/c/corpus.jsonl"));
  EXPECT_FALSE(fs::exists(dir / "c"));
}

TEST(Cli, InferAndAttentionDump) {
  const auto dir = scratch("infer");
  ASSERT_EQ(run_cli("gen-corpus --episodes 4 --out c --export-ppm shots", dir), 0);
  ASSERT_EQ(run_cli(std::string("train --phase finetune --corpus c --max-samples 4 --epochs-finetune 1 ") + kTinyModel +
                        " --out r",
                    dir),
            0);
  const std::string ck = "--checkpoint r/checkpoints/finetune.ckpt --screen shots/ep0_step0.ppm --goal 'open mail'";
  EXPECT_EQ(run_cli("infer --mode slow " + ck, dir), 0);
  EXPECT_NE(read_file_text(dir / "cli.out").find("\"path\": \"Slow\""), std::string::npos);
  EXPECT_EQ(run_cli("infer " + ck + " --history a b c", dir), 1);
  EXPECT_EQ(run_cli("dump-attn " + ck + " --out att/a.json", dir), 0);
  EXPECT_NE(read_file_text(dir / "att/a.json").find("\"weights\""), std::string::npos);
}
