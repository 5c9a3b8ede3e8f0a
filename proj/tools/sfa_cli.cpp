// SPDX-License-Identifier: Apache-2.0
// Command-line entry point: corpus generation, enhancement, training,
// evaluation, inference and the verification tools.
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "sfa/action/codec.hpp"
#include "sfa/agent/controller.hpp"
#include "sfa/data/enhancer.hpp"
#include "sfa/errors.hpp"
#include "sfa/eval/harness.hpp"
#include "sfa/eval/sweep.hpp"
#include "sfa/io.hpp"
#include "sfa/model/grad_suite.hpp"
#include "sfa/model/prompt.hpp"
#include "sfa/sim/corpus.hpp"
#include "sfa/train/trainer.hpp"

namespace fs = std::filesystem;
using namespace sfa;

namespace {

constexpr const char* kOutputEnv = "SFA_OUTPUT_DIR";

/// Relative output paths land under $SFA_OUTPUT_DIR when it is set.
fs::path out_path(const std::string& p) {
  const char* base = std::getenv(kOutputEnv);
  if (base && *base && fs::path(p).is_relative()) return fs::path(base) / p;
  return p;
}

struct ModelFlags {
  std::size_t d_model = ModelConfig{}.d_model;
  std::size_t layers = ModelConfig{}.n_layers;
  std::size_t heads = ModelConfig{}.n_heads;
  std::size_t max_seq = ModelConfig{}.max_seq;
  std::size_t n_latent = ModelConfig{}.n_latent;
  std::size_t m_slots = ModelConfig{}.m_slots;
  std::size_t pool = ModelConfig{}.perception_pool;
  std::string latent_map = "identity";
  std::string control_keys = "ctrl";

  void attach(CLI::App* app) {
    app->add_option("--d-model", d_model, "model width")->capture_default_str();
    app->add_option("--layers", layers, "transformer blocks")->capture_default_str();
    app->add_option("--heads", heads, "attention heads")->capture_default_str();
    app->add_option("--max-seq", max_seq, "position table size")->capture_default_str();
    app->add_option("--n-latent", n_latent, "latent slots per step")->capture_default_str();
    app->add_option("--m-slots", m_slots, "perception keys derived from the control state")->capture_default_str();
    app->add_option("--perception-pool", pool, "pooling window for injected features")->capture_default_str();
    app->add_option("--latent-map", latent_map, "g: identity or linear")
        ->check(CLI::IsMember({"identity", "linear"}))
        ->capture_default_str();
    app->add_option("--control-keys", control_keys, "ctrl or all3")
        ->check(CLI::IsMember({"ctrl", "all3"}))
        ->capture_default_str();
  }

  ModelConfig config(std::uint64_t seed) const {
    ModelConfig c;
    c.d_model = d_model;
    c.n_layers = layers;
    c.n_heads = heads;
    c.max_seq = max_seq;
    c.n_latent = n_latent;
    c.m_slots = m_slots;
    c.perception_pool = pool;
    c.latent_map = latent_map == "linear" ? LatentMap::Linear : LatentMap::Identity;
    c.control_keys = control_keys == "all3" ? ControlKeys::AllThree : ControlKeys::CtrlOnly;
    c.seed = seed;
    c.validate();
    return c;
  }
};

struct RecipeFlags {
  std::string recipe = "desk";
  double lr_align = -1, lr_thought = -1, lr_finetune = -1;
  int epochs_align = -1, epochs_thought = -1, epochs_finetune = -1;
  std::size_t batch = 8;

  void attach(CLI::App* app) {
    app->add_option("--recipe", recipe, "desk (fits one core in minutes) or full (PhaseConfig defaults)")
        ->check(CLI::IsMember({"desk", "full"}))
        ->capture_default_str();
    app->add_option("--lr-align", lr_align, "override; negative keeps the recipe value")->capture_default_str();
    app->add_option("--lr-thought", lr_thought, "override")->capture_default_str();
    app->add_option("--lr-finetune", lr_finetune, "override")->capture_default_str();
    app->add_option("--epochs-align", epochs_align, "override")->capture_default_str();
    app->add_option("--epochs-thought", epochs_thought, "override")->capture_default_str();
    app->add_option("--epochs-finetune", epochs_finetune, "override")->capture_default_str();
    app->add_option("--batch", batch, "samples per optimizer step")->capture_default_str();
  }

  Recipe build(std::uint64_t seed) const {
    Recipe r = recipe == "full" ? Recipe::full(seed) : Recipe::desk(seed);
    auto apply = [&](PhaseConfig& p, double lr, int epochs) {
      if (lr >= 0) p.lr = lr;
      if (epochs >= 0) p.epochs = static_cast<std::size_t>(epochs);
      p.batch = batch;
    };
    apply(r.align, lr_align, epochs_align);
    apply(r.thought, lr_thought, epochs_thought);
    apply(r.finetune, lr_finetune, epochs_finetune);
    return r;
  }
};

/// Writes the global options and the section of the command that ran;
/// `sfa --config FILE` replays it.
void snapshot(const CLI::App& root, const fs::path& dir, const std::string& section, const std::string& file) {
  fs::create_directories(dir);
  std::istringstream is(root.config_to_str(true, false));
  std::string out, line;
  while (std::getline(is, line)) {
    const auto eq = line.find('=');
    const auto dot = line.find('.');
    if (dot == std::string::npos || dot > eq || line.compare(0, section.size() + 1, section + ".") == 0) {
      out += line + "\n";
    }
  }
  write_file_text(dir / (file + ".config.toml"), out);
}
void snapshot(const CLI::App& root, const fs::path& dir, const std::string& section) {
  snapshot(root, dir, section, section);
}

std::unique_ptr<LatentTransformer> load_model(const fs::path& ckpt) {
  const auto cfg_path = ckpt.parent_path() / "model_config.json";
  if (!fs::exists(cfg_path)) throw ValidationError("no model_config.json next to " + ckpt.string());
  const auto cfg = ModelConfig::from_json(read_file_text(cfg_path));
  auto model = std::make_unique<LatentTransformer>(cfg);
  restore_checkpoint(load_checkpoint(ckpt), model->params(), cfg.digest());
  return model;
}

EnhancedCorpus load_training_corpus(const fs::path& dir, const ModelConfig& cfg, std::size_t max_samples) {
  auto corpus = enhance_corpus(read_corpus(dir), cfg);
  if (max_samples > 0) truncate_corpus(corpus, max_samples);
  return corpus;
}

void progress(const EpochLoss& e) {
  std::fprintf(stderr, "[train] %s%s%s epoch %zu: mean loss %.6f over %zu samples\n",
               std::string(phase_name(e.phase)).c_str(), e.stage.empty() ? "" : "/", e.stage.c_str(), e.epoch,
               e.mean_loss, e.samples);
}

nlohmann::ordered_json ams_json(const AMSReport& r) {
  nlohmann::ordered_json j;
  j["total"] = r.total;
  j["matches"] = r.matches;
  j["parse_failures"] = r.parse_failures;
  j["ams_percent"] = r.ams_percent;
  nlohmann::ordered_json per = nlohmann::ordered_json::object();
  for (std::size_t k = 0; k < kActionTypeCount; ++k) {
    if (r.per_type[k].total == 0) continue;
    per[std::string(enum_name(kAllActionTypes[k]))] = {{"total", r.per_type[k].total},
                                                       {"matches", r.per_type[k].matches}};
  }
  j["per_type"] = per;
  return j;
}

/// Deterministic part of an evaluation (timings live in the trace log).
std::string eval_report(const EvalRun& run, double tau) {
  const auto ams = compute_ams(run.predictions(), run.truth, tau);
  const auto paths = path_stats(run.paths(), run.labels);
  nlohmann::ordered_json j;
  j["mode"] = decision_mode_name(run.mode);
  j["tau"] = tau;
  j["ams"] = ams_json(ams);
  j["ams_slow_labeled"] = ams_on(run, PathLabel::Slow, tau).ams_percent;
  j["ams_fast_labeled"] = ams_on(run, PathLabel::Fast, tau).ams_percent;
  j["paths"] = {{"pred_fast_label_fast", paths.counts[0][0]},
                {"pred_fast_label_slow", paths.counts[0][1]},
                {"pred_slow_label_fast", paths.counts[1][0]},
                {"pred_slow_label_slow", paths.counts[1][1]},
                {"routing_accuracy", paths.routing_accuracy()}};
  j["perception_calls"] = run.perception_calls();
  j["bop_emitted"] = run.bop_count();
  j["slow_traces"] = run.slow_traces();
  std::size_t tokens = 0;
  for (const auto& t : run.traces) tokens += t.token_count;
  j["tokens"] = tokens;
  return j.dump(2) + "\n";
}

/// latency.tsv keeps one row per mode; rerunning a mode replaces its row.
void merge_latency(const fs::path& file, const LatencyRow& row) {
  std::map<std::string, std::string> rows;
  if (fs::exists(file)) {
    std::istringstream is(read_file_text(file));
    std::string line;
    std::getline(is, line);
    while (std::getline(is, line)) {
      if (!line.empty()) rows[line.substr(0, line.find('\t'))] = line;
    }
  }
  char buf[160];
  std::snprintf(buf, sizeof buf, "%s\t%zu\t%.1f\t%.1f\t%.2f\t%.4f", std::string(decision_mode_name(row.mode)).c_str(),
                row.steps, row.mean_us, row.median_us, row.mean_tokens, row.ams);
  rows[std::string(decision_mode_name(row.mode))] = buf;
  std::string out = "mode\tsteps\tmean_us\tmedian_us\tmean_tokens\tams\n";
  for (const char* m : {"fast", "adaptive", "slow"}) {
    if (rows.count(m)) out += rows[m] + "\n";
  }
  write_file_text(file, out);
}

LatencyRow latency_row(const EvalRun& run, double tau) {
  LatencyRow r;
  r.mode = run.mode;
  r.steps = run.traces.size();
  std::vector<double> us;
  for (const auto& t : run.traces) {
    us.push_back(static_cast<double>(t.us_elapsed));
    r.mean_tokens += static_cast<double>(t.token_count);
  }
  if (r.steps) {
    double s = 0;
    for (double u : us) s += u;
    r.mean_us = s / static_cast<double>(r.steps);
    r.mean_tokens /= static_cast<double>(r.steps);
    std::sort(us.begin(), us.end());
    r.median_us = us.size() % 2 ? us[us.size() / 2] : 0.5 * (us[us.size() / 2 - 1] + us[us.size() / 2]);
  }
  r.ams = compute_ams(run.predictions(), run.truth, tau).ams_percent;
  return r;
}

std::vector<std::size_t> parse_list(const std::string& s) {
  std::vector<std::size_t> out;
  std::stringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) {
    try {
      std::size_t used = 0;
      const auto v = std::stoul(item, &used);
      if (used != item.size()) throw std::invalid_argument(item);
      out.push_back(v);
    } catch (const std::logic_error&) {
      throw ValidationError("bad list entry '" + item + "'");
    }
  }
  if (out.empty()) throw ValidationError("empty list");
  return out;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Slow-fast GUI agent toolkit: corpus, training, evaluation and checks"};
  app.set_config("--config", "", "replay a saved .config.toml snapshot");
  app.require_subcommand(1);
  std::uint64_t seed = 1;
  app.add_option("--seed", seed, "seed for every stochastic step")->capture_default_str();

  // gen-corpus
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic episode corpus");
  std::string gen_out = "corpus";
  std::size_t gen_episodes = 870;
  std::string gen_mix = TemplateMix{}.str();
  std::string gen_ppm;
  gen->add_option("--out", gen_out, "output directory")->capture_default_str();
  gen->add_option("--episodes", gen_episodes, "episode count")->capture_default_str();
  gen->add_option("--mix", gen_mix, "template weights")->capture_default_str();
  gen->add_option("--export-ppm", gen_ppm, "also write every screen as PPM into this directory");

  // enhance
  auto* enh = app.add_subcommand("enhance", "render training sequences with path labels and thoughts");
  std::string enh_corpus = "corpus", enh_out = "enhanced";
  ModelFlags enh_model;
  enh->add_option("--corpus", enh_corpus, "corpus directory")->capture_default_str();
  enh->add_option("--out", enh_out, "output directory")->capture_default_str();
  enh_model.attach(enh);

  // train
  auto* train = app.add_subcommand("train", "run training phases");
  std::string tr_phase = "all", tr_corpus = "corpus", tr_out = "run", tr_init;
  std::size_t tr_max = 2000;
  bool tr_skip_thought = false;
  ModelFlags tr_model;
  RecipeFlags tr_recipe;
  train->add_option("--phase", tr_phase, "align, thought, finetune or all")
      ->check(CLI::IsMember({"align", "thought", "finetune", "all"}))
      ->capture_default_str();
  train->add_option("--corpus", tr_corpus, "corpus directory")->capture_default_str();
  train->add_option("--out", tr_out, "run directory")->capture_default_str();
  train->add_option("--init", tr_init, "checkpoint to start from (single phases)");
  train->add_option("--max-samples", tr_max, "training samples kept (0 = all)")->capture_default_str();
  train->add_flag("--skip-thought", tr_skip_thought, "with --phase all: leave out the thought phase");
  tr_model.attach(train);
  tr_recipe.attach(train);

  // eval
  auto* ev = app.add_subcommand("eval", "score a checkpoint on a corpus");
  std::string ev_mode = "adaptive", ev_ckpt, ev_corpus = "heldout", ev_out = "eval";
  std::size_t ev_steps = 0, ev_warmup = 3;
  double ev_tau = kDefaultTau;
  ev->add_option("--mode", ev_mode, "adaptive, fast, slow or all (interleaved latency profile)")
      ->check(CLI::IsMember({"adaptive", "fast", "slow", "all"}))
      ->capture_default_str();
  ev->add_option("--checkpoint", ev_ckpt, "checkpoint file")->required();
  ev->add_option("--corpus", ev_corpus, "corpus directory")->capture_default_str();
  ev->add_option("--max-steps", ev_steps, "steps kept (0 = all)")->capture_default_str();
  ev->add_option("--warmup", ev_warmup, "discarded warm-up steps for --mode all")->capture_default_str();
  ev->add_option("--tau", ev_tau, "click match radius")->capture_default_str();
  ev->add_option("--out", ev_out, "report directory")->capture_default_str();

  // infer
  auto* inf = app.add_subcommand("infer", "predict one action for a screen");
  std::string inf_ckpt, inf_screen, inf_goal, inf_mode = "adaptive", inf_out;
  std::vector<std::string> inf_history;
  inf->add_option("--checkpoint", inf_ckpt, "checkpoint file")->required();
  inf->add_option("--screen", inf_screen, "screen image (binary PPM)")->required();
  inf->add_option("--goal", inf_goal, "task goal")->required();
  inf->add_option("--history", inf_history, "previous action texts, oldest first (at most 2)");
  inf->add_option("--mode", inf_mode, "adaptive, fast or slow")
      ->check(CLI::IsMember({"adaptive", "fast", "slow"}))
      ->capture_default_str();
  inf->add_option("--out", inf_out, "directory for the step record");

  // gradcheck
  auto* gc = app.add_subcommand("gradcheck", "finite-difference check of primitives and the model loss");
  std::size_t gc_coords = 64;
  double gc_eps = 1e-4, gc_tol = 1e-4;
  std::string gc_out;
  gc->add_option("--coords", gc_coords, "sampled coordinates per tensor")->capture_default_str();
  gc->add_option("--eps", gc_eps, "central-difference step")->capture_default_str();
  gc->add_option("--tolerance", gc_tol, "pass threshold on max relative error")->capture_default_str();
  gc->add_option("--out", gc_out, "directory for the report");

  // sweep-latent
  auto* sw = app.add_subcommand("sweep-latent", "retrain per latent count and score held-out steps");
  std::string sw_corpus = "corpus", sw_heldout = "heldout", sw_out = "sweep", sw_values = "0,4,8,16,20";
  std::size_t sw_max = 2000, sw_steps = 500;
  ModelFlags sw_model;
  RecipeFlags sw_recipe;
  sw->add_option("--corpus", sw_corpus, "training corpus directory")->capture_default_str();
  sw->add_option("--heldout", sw_heldout, "held-out corpus directory")->capture_default_str();
  sw->add_option("--n-values", sw_values, "comma-separated latent counts")->capture_default_str();
  sw->add_option("--max-samples", sw_max, "training samples kept (0 = all)")->capture_default_str();
  sw->add_option("--max-steps", sw_steps, "held-out steps kept (0 = all)")->capture_default_str();
  sw->add_option("--out", sw_out, "output directory")->capture_default_str();
  sw_model.attach(sw);
  sw_recipe.attach(sw);

  // dump-attn
  auto* da = app.add_subcommand("dump-attn", "write perception attention weights for one slow step");
  std::string da_ckpt, da_screen, da_goal, da_out = "attention.json";
  da->add_option("--checkpoint", da_ckpt, "checkpoint file")->required();
  da->add_option("--screen", da_screen, "screen image (binary PPM)")->required();
  da->add_option("--goal", da_goal, "task goal")->required();
  da->add_option("--out", da_out, "output JSON file")->capture_default_str();

  for (auto* sub : {gen, enh, train, ev, inf, gc, sw, da}) sub->configurable();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    if (*gen) {
      const auto dir = out_path(gen_out);
      const auto corpus = generate_corpus(seed, gen_episodes, TemplateMix::parse(gen_mix));
      write_corpus(dir, corpus);
      if (!gen_ppm.empty()) {
        const auto pdir = out_path(gen_ppm);
        fs::create_directories(pdir);
        for (std::size_t e = 0; e < corpus.episodes.size(); ++e) {
          for (std::size_t k = 0; k < corpus.episodes[e].steps.size(); ++k) {
            const auto& s = corpus.episodes[e].steps[k].screen;
            write_ppm(pdir / ("ep" + std::to_string(e) + "_step" + std::to_string(k) + ".ppm"),
                      PixelImage{s.width, s.height, s.pixels});
          }
        }
      }
      snapshot(app, dir, "gen-corpus");
      std::printf("episodes %zu steps %zu slow %zu fast %zu hash %s\n", corpus.manifest.episodes,
                  corpus.manifest.steps, corpus.manifest.slow_steps, corpus.manifest.fast_steps,
                  corpus.manifest.corpus_hash.c_str());
    } else if (*enh) {
      const auto cfg = enh_model.config(seed);
      const auto corpus = enhance_corpus(read_corpus(enh_corpus), cfg);
      for (const auto& s : corpus.samples) {
        const auto why = enhanced_violation(s, cfg);
        if (!why.empty()) throw Error("enhanced sample failed validation: " + why);
      }
      const auto dir = out_path(enh_out);
      fs::create_directories(dir);
      write_file_text(dir / "enhanced.jsonl", enhanced_to_jsonl(corpus));
      nlohmann::ordered_json st;
      st["samples"] = corpus.stats.samples;
      st["slow"] = corpus.stats.slow;
      st["fast"] = corpus.stats.fast;
      st["corpus_hash"] = corpus_hash(corpus);
      write_file_text(dir / "enhance_stats.json", st.dump(2) + "\n");
      snapshot(app, dir, "enhance");
      std::printf("samples %zu slow %zu fast %zu\n", corpus.stats.samples, corpus.stats.slow, corpus.stats.fast);
    } else if (*train) {
      const auto cfg = tr_model.config(seed);
      const auto corpus = load_training_corpus(tr_corpus, cfg, tr_max);
      Recipe recipe = tr_recipe.build(seed);
      if (tr_phase != "all") {
        const auto p = *phase_from_name(tr_phase);
        recipe.run_align = p == Phase::Align;
        recipe.run_thought = p == Phase::Thought;
        recipe.run_finetune = p == Phase::Finetune;
      } else if (tr_skip_thought) {
        recipe.run_thought = false;
      }
      LatentTransformer model(cfg);
      if (!tr_init.empty()) restore_checkpoint(load_checkpoint(tr_init), model.params(), cfg.digest());
      const auto dir = out_path(tr_out);
      snapshot(app, dir, "train");
      const auto summary = train_recipe(model, corpus, recipe, dir, progress);
      for (const auto& [p, h] : summary.checkpoint_hashes) std::printf("%s checkpoint %s\n", p.c_str(), h.c_str());
    } else if (*ev) {
      const auto model = load_model(ev_ckpt);
      const auto corpus = read_corpus(ev_corpus);
      const auto episodes =
          ev_steps ? first_steps(corpus.episodes, ev_steps) : std::vector<Episode>(corpus.episodes);
      const auto dir = out_path(ev_out);
      fs::create_directories(dir);
      snapshot(app, dir, "eval", "eval-" + ev_mode);
      if (ev_mode == "all") {
        const auto prof = latency_profile(*model, episodes, ev_warmup, ev_tau);
        for (const auto& run : prof.runs) {
          const std::string m(decision_mode_name(run.mode));
          write_file_text(dir / ("report_" + m + ".json"), eval_report(run, ev_tau));
          write_file_text(dir / ("traces_" + m + ".jsonl"), run.trace_log());
        }
        write_file_text(dir / "latency_profile.txt", latency_table(prof));
        std::printf("%s", latency_table(prof).c_str());
      } else {
        const auto run = evaluate(*model, episodes, *decision_mode_from_name(ev_mode));
        const auto report = eval_report(run, ev_tau);
        write_file_text(dir / ("report_" + ev_mode + ".json"), report);
        write_file_text(dir / ("traces_" + ev_mode + ".jsonl"), run.trace_log());
        write_file_text(dir / ("divergence_" + ev_mode + ".csv"),
                        divergence_plot_data(divergence_report(run.predictions(), run.truth)));
        merge_latency(dir / "latency.tsv", latency_row(run, ev_tau));
        std::printf("%s%s", ams_table(compute_ams(run.predictions(), run.truth, ev_tau)).c_str(),
                    path_table(path_stats(run.paths(), run.labels)).c_str());
        std::printf("%s", read_file_text(dir / "latency.tsv").c_str());
      }
    } else if (*inf) {
      if (inf_history.size() > kHistoryWindow) throw ValidationError("at most 2 --history entries");
      const auto model = load_model(inf_ckpt);
      const auto img = read_ppm(inf_screen);
      const auto t = predict_step(*model, img, inf_goal, inf_history, *decision_mode_from_name(inf_mode));
      nlohmann::ordered_json j;
      j["path"] = path_name(t.path_taken);
      j["action_text"] = t.action_text;
      j["parsed"] = t.action.has_value();
      if (!t.parse_error.empty()) j["parse_error"] = t.parse_error;
      j["tokens"] = t.token_count;
      j["us_elapsed"] = t.us_elapsed;
      j["perception_invocations"] = t.perception_invocations;
      std::printf("%s\n", j.dump(2).c_str());
      if (!inf_out.empty()) {
        const auto dir = out_path(inf_out);
        snapshot(app, dir, "infer");
        write_file_text(dir / "step.json", j.dump(2) + "\n");
      }
    } else if (*gc) {
      const auto entries = gradient_suite(seed, gc_coords, gc_eps);
      nlohmann::ordered_json j = nlohmann::ordered_json::object();
      for (const auto& e : entries) {
        std::printf("%-22s coords %5zu  max_rel_error %.3e\n", e.name.c_str(), e.report.coordinates,
                    e.report.max_rel_error);
        j[e.name] = e.report.max_rel_error;
      }
      const double worst = max_rel_error(entries);
      std::printf("max relative error %.3e (tolerance %.1e)\n", worst, gc_tol);
      if (!gc_out.empty()) {
        const auto dir = out_path(gc_out);
        snapshot(app, dir, "gradcheck");
        write_file_text(dir / "gradcheck.json", j.dump(2) + "\n");
      }
      return worst <= gc_tol ? 0 : 1;
    } else if (*sw) {
      const auto cfg = sw_model.config(seed);
      const auto train_corpus = read_corpus(sw_corpus);
      const auto held = read_corpus(sw_heldout);
      const auto episodes = sw_steps ? first_steps(held.episodes, sw_steps) : std::vector<Episode>(held.episodes);
      const auto values = parse_list(sw_values);
      const auto rows = sweep_latent(cfg, train_corpus, episodes, values, sw_recipe.build(seed), sw_max, progress);
      const auto dir = out_path(sw_out);
      snapshot(app, dir, "sweep-latent");
      write_file_text(dir / "sweep_latent.csv", sweep_plot_data(rows));
      std::printf("%s", sweep_plot_data(rows).c_str());
    } else if (*da) {
      const auto model = load_model(da_ckpt);
      const auto img = read_ppm(da_screen);
      std::optional<PerceptionOutput> captured;
      GenerateOptions opt;
      opt.on_perception = [&](const PerceptionOutput& p) { captured = p; };
      const auto t = predict_step(*model, img, da_goal, {}, DecisionMode::ForceSlow, opt);
      if (!captured) throw Error("slow step produced no perception output");
      const auto& c = model->config();
      const auto dump = attention_dump_json(*captured, c.fine_grid(), c.fine_grid(), t.action_text);
      const auto file = out_path(da_out);
      if (file.has_parent_path()) fs::create_directories(file.parent_path());
      write_file_text(file, dump);
      snapshot(app, file.has_parent_path() ? file.parent_path() : fs::path("."), "dump-attn");
      std::printf("%s\n", t.action_text.c_str());
    }
  } catch (const ValidationError& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 1;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "internal error: %s\n", e.what());
    return 2;
  }
  return 0;
}
