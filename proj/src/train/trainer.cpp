// SPDX-License-Identifier: Apache-2.0
#include "sfa/train/trainer.hpp"

#include <cmath>
#include <numeric>

#include "json.hpp"
#include "sfa/errors.hpp"
#include "sfa/io.hpp"
#include "sfa/rng.hpp"
#include "sfa/tensor/adamw.hpp"

namespace sfa {

std::string_view phase_name(Phase p) noexcept {
  switch (p) {
    case Phase::Align: return "align";
    case Phase::Thought: return "thought";
    case Phase::Finetune: return "finetune";
  }
  return "?";
}

std::optional<Phase> phase_from_name(std::string_view name) noexcept {
  for (auto p : {Phase::Align, Phase::Thought, Phase::Finetune}) {
    if (phase_name(p) == name) return p;
  }
  return std::nullopt;
}

PhaseConfig PhaseConfig::defaults(Phase p) {
  PhaseConfig c;
  c.phase = p;
  switch (p) {
    case Phase::Align: c.lr = 2e-3, c.epochs = 3; break;
    case Phase::Thought: c.lr = 3e-5, c.epochs = 6; break;
    case Phase::Finetune: c.lr = 2e-5, c.epochs = 10; break;
  }
  return c;
}

std::string PhaseConfig::to_json() const {
  nlohmann::ordered_json j;
  j["phase"] = phase_name(phase);
  j["lr"] = lr;
  j["batch"] = batch;
  j["grad_accum"] = grad_accum;
  j["epochs"] = epochs;
  j["seed"] = seed;
  j["weight_decay"] = weight_decay;
  j["explicit_share"] = explicit_share;
  return j.dump();
}

bool trainable(Phase phase, const std::string& name) {
  if (PerceptionModule::is_frozen(name)) return false;
  return phase != Phase::Align || PerceptionModule::is_projector(name);
}

std::string epoch_loss_json(const EpochLoss& e) {
  nlohmann::ordered_json j;
  j["phase"] = phase_name(e.phase);
  j["stage"] = e.stage;
  j["epoch"] = e.epoch;
  j["samples"] = e.samples;
  j["updates"] = e.updates;
  j["first_loss"] = e.first_loss;
  j["mean_loss"] = e.mean_loss;
  return j.dump();
}

namespace {

/// Marks non-trainable leaves as constants for the guard's lifetime so the
/// graph skips them entirely.
class FreezeGuard {
 public:
  FreezeGuard(ParameterSet& params, Phase phase) {
    for (auto& p : params.items()) {
      if (!trainable(phase, p.name) && p.var.requires_grad()) {
        p.var.node()->requires_grad = false;
        frozen_.push_back(p.var);
      }
    }
  }
  ~FreezeGuard() {
    for (auto& v : frozen_) v.node()->requires_grad = true;
  }
  FreezeGuard(const FreezeGuard&) = delete;
  FreezeGuard& operator=(const FreezeGuard&) = delete;

 private:
  std::vector<Var> frozen_;
};

using Transform = std::function<EnhancedSample(const EnhancedSample&)>;

/// Epochs [first, first + count) of one stage. Sample order per epoch is a
/// pure function of (seed, phase, epoch).
void run_epochs(LatentTransformer& model, const std::vector<const EnhancedSample*>& samples, const PhaseConfig& cfg,
                const std::string& stage, std::size_t first, std::size_t count, const Transform& transform,
                AdamW& opt, PhaseResult& result, const TrainObserver& observer) {
  FreezeGuard freeze(model.params(), cfg.phase);
  const auto keep = [&](const std::string& name) { return trainable(cfg.phase, name); };
  const std::size_t group = std::max<std::size_t>(1, cfg.batch * std::max<std::size_t>(1, cfg.grad_accum));
  const CounterRng root = CounterRng(cfg.seed).split(static_cast<std::uint64_t>(cfg.phase) + 101);
  for (std::size_t epoch = first; epoch < first + count; ++epoch) {
    std::vector<std::size_t> order(samples.size());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = root.split(epoch);
    rng.shuffle(std::span<std::size_t>(order));

    EpochLoss rec;
    rec.phase = cfg.phase;
    rec.stage = stage;
    rec.epoch = epoch;
    double total = 0.0;
    for (std::size_t start = 0; start < order.size(); start += group) {
      const std::size_t end = std::min(order.size(), start + group);
      const double scale = 1.0 / static_cast<double>(end - start);
      model.params().zero_grad();
      double batch_loss = 0.0;
      for (std::size_t i = start; i < end; ++i) {
        const auto& s = *samples[order[i]];
        const Var loss = transform ? model.loss(transform(s).sequence) : model.loss(s.sequence);
        const double v = loss.value()[0];
        if (!std::isfinite(v)) throw NumericError("non-finite training loss");
        batch_loss += v;
        backward(loss, Tensor(loss.shape(), scale));
      }
      opt.step(model.params(), keep);
      if (rec.updates == 0) rec.first_loss = batch_loss * scale;
      ++rec.updates;
      total += batch_loss;
    }
    rec.samples = order.size();
    rec.mean_loss = order.empty() ? 0.0 : total / static_cast<double>(order.size());
    result.trace.push_back(rec);
    if (observer) observer(rec);
  }
  model.params().zero_grad();
}

AdamW make_optimizer(const PhaseConfig& cfg) {
  AdamWConfig a;
  a.lr = cfg.lr;
  a.weight_decay = cfg.weight_decay;
  return AdamW(a);
}

std::vector<const EnhancedSample*> all_of(const EnhancedCorpus& corpus) {
  std::vector<const EnhancedSample*> v;
  for (const auto& s : corpus.samples) v.push_back(&s);
  return v;
}

}  // namespace

PhaseResult phase_align(LatentTransformer& model, const EnhancedCorpus& corpus, const PhaseConfig& cfg,
                        const TrainObserver& observer) {
  std::vector<const EnhancedSample*> slow;
  for (const auto& s : corpus.samples) {
    if (s.path_label == PathLabel::Slow) slow.push_back(&s);
  }
  if (slow.empty()) throw DataError("align phase needs Slow samples; the corpus has none");
  PhaseResult r;
  auto opt = make_optimizer(cfg);
  run_epochs(model, slow, cfg, "", 0, cfg.epochs, {}, opt, r, observer);
  r.checkpoint = checkpoint_from(model.params(), model.config().digest());
  return r;
}

PhaseResult phase_thought(LatentTransformer& model, const EnhancedCorpus& corpus, const PhaseConfig& cfg,
                          const TrainObserver& observer) {
  for (const auto& s : corpus.samples) {
    if (!s.thought || s.thought->text.empty()) {
      throw DataError("thought phase: sample (episode " + std::to_string(s.episode) + ", step " +
                      std::to_string(s.step) + ") has no thought annotation");
    }
  }
  const auto samples = all_of(corpus);
  const auto n_explicit =
      static_cast<std::size_t>(std::llround(static_cast<double>(cfg.epochs) * std::clamp(cfg.explicit_share, 0.0, 1.0)));
  const std::size_t n_latent = model.config().n_latent;
  PhaseResult r;
  auto opt = make_optimizer(cfg);
  run_epochs(model, samples, cfg, "explicit", 0, n_explicit, [](const EnhancedSample& s) { return with_thought(s); },
             opt, r, observer);
  run_epochs(model, samples, cfg, "latent", n_explicit, cfg.epochs - n_explicit,
             [n_latent](const EnhancedSample& s) { return latent_swap(with_thought(s), n_latent); }, opt, r,
             observer);
  r.checkpoint = checkpoint_from(model.params(), model.config().digest());
  return r;
}

PhaseResult phase_finetune(LatentTransformer& model, const EnhancedCorpus& corpus, const PhaseConfig& cfg,
                           const TrainObserver& observer) {
  PhaseResult r;
  auto opt = make_optimizer(cfg);
  run_epochs(model, all_of(corpus), cfg, "", 0, cfg.epochs, {}, opt, r, observer);
  r.checkpoint = checkpoint_from(model.params(), model.config().digest());
  return r;
}

double mean_loss(const LatentTransformer& model, const std::vector<EnhancedSample>& samples) {
  NoGradGuard ng;
  double total = 0.0;
  for (const auto& s : samples) total += model.loss(s.sequence).value()[0];
  return samples.empty() ? 0.0 : total / static_cast<double>(samples.size());
}

Recipe Recipe::desk(std::uint64_t seed) {
  Recipe r;
  r.align.lr = 2e-3;
  r.align.epochs = 1;
  r.thought.lr = 3e-3;
  r.thought.epochs = 2;
  r.finetune.lr = 1e-3;
  r.finetune.epochs = 2;
  r.set_seed(seed);
  return r;
}

Recipe Recipe::full(std::uint64_t seed) {
  Recipe r;
  r.set_seed(seed);
  return r;
}

void Recipe::set_seed(std::uint64_t seed) {
  align.seed = thought.seed = finetune.seed = seed;
}

std::string Recipe::to_json() const {
  nlohmann::ordered_json j;
  j["align"] = run_align ? nlohmann::json::parse(align.to_json()) : nlohmann::json(nullptr);
  j["thought"] = run_thought ? nlohmann::json::parse(thought.to_json()) : nlohmann::json(nullptr);
  j["finetune"] = run_finetune ? nlohmann::json::parse(finetune.to_json()) : nlohmann::json(nullptr);
  return j.dump(2);
}

std::string corpus_hash(const EnhancedCorpus& corpus) {
  const auto text = enhanced_to_jsonl(corpus);
  return hex64(fnv1a64(text.data(), text.size()));
}

RunSummary train_recipe(LatentTransformer& model, const EnhancedCorpus& corpus, const Recipe& recipe,
                        const std::optional<std::filesystem::path>& run_dir, const TrainObserver& observer) {
  RunSummary out;
  out.corpus_hash = corpus_hash(corpus);
  std::string trace_text;
  if (run_dir) {
    std::filesystem::create_directories(*run_dir / "checkpoints");
    nlohmann::ordered_json cfg;
    cfg["model"] = nlohmann::json::parse(model.config().to_json());
    cfg["recipe"] = nlohmann::json::parse(recipe.to_json());
    cfg["corpus_hash"] = out.corpus_hash;
    write_file_text(*run_dir / "config.json", cfg.dump(2) + "\n");
    write_file_text(*run_dir / "checkpoints" / "model_config.json", model.config().to_json() + "\n");
  }
  const auto finish = [&](Phase p, PhaseResult r) {
    for (const auto& e : r.trace) {
      trace_text += epoch_loss_json(e) + "\n";
      out.trace.push_back(e);
    }
    const auto bytes = encode_checkpoint(r.checkpoint);
    out.checkpoint_hashes.emplace_back(std::string(phase_name(p)), hex64(fnv1a64(bytes.data(), bytes.size())));
    if (run_dir) {
      write_file_bytes(*run_dir / "checkpoints" / (std::string(phase_name(p)) + ".ckpt"), bytes.data(), bytes.size());
      write_file_text(*run_dir / "loss_trace.jsonl", trace_text);
    }
  };
  if (recipe.run_align) finish(Phase::Align, phase_align(model, corpus, recipe.align, observer));
  if (recipe.run_thought) finish(Phase::Thought, phase_thought(model, corpus, recipe.thought, observer));
  if (recipe.run_finetune) finish(Phase::Finetune, phase_finetune(model, corpus, recipe.finetune, observer));

  if (run_dir) {
    nlohmann::ordered_json m;
    m["corpus_hash"] = out.corpus_hash;
    m["samples"] = corpus.stats.samples;
    m["slow"] = corpus.stats.slow;
    m["fast"] = corpus.stats.fast;
    nlohmann::ordered_json census = nlohmann::ordered_json::object();
    for (const auto& [name, n] : model.census()) census[name] = n;
    m["census"] = census;
    nlohmann::ordered_json ck = nlohmann::ordered_json::object();
    for (const auto& [p, h] : out.checkpoint_hashes) ck[p] = h;
    m["checkpoints"] = ck;
    write_file_text(*run_dir / "manifest.json", m.dump(2) + "\n");
    if (out.trace.empty()) write_file_text(*run_dir / "loss_trace.jsonl", "");
  }
  return out;
}

}  // namespace sfa
