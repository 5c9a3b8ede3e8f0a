// SPDX-License-Identifier: Apache-2.0
#include "sfa/model/transformer.hpp"

#include <algorithm>
#include <cmath>

#include "sfa/errors.hpp"
#include "sfa/tensor/ops.hpp"

namespace sfa {

namespace {

constexpr double kInitStd = 0.02;

Tensor normal(CounterRng rng, Shape shape, double std) {
  Tensor t(std::move(shape));
  for (auto& x : t.data()) x = rng.normal() * std;
  return t;
}

Var row_var(const Tensor& t, std::size_t d) {
  if (t.numel() != d) throw DimensionError("slot embedding has " + std::to_string(t.numel()) + " values, expected " + std::to_string(d));
  return Var(t.reshaped({1, d}));
}

}  // namespace

LatentTransformer::LatentTransformer(const ModelConfig& config) : config_(config) {
  config_.validate();
  const std::size_t d = config_.d_model, V = kVocabSize;
  CounterRng root(config_.seed);
  const auto r = root.split(0x6d6f64656c);
  tok_emb_ = params_.add("embed.tokens", normal(r.split(1), {V, d}, kInitStd));
  pos_emb_ = params_.add("embed.positions", normal(r.split(2), {config_.max_seq, d}, kInitStd));
  img_w_ = params_.add("image.proj.weight", normal(r.split(3), {3, d}, 1.0));
  img_b_ = params_.add("image.proj.bias", Tensor({d}));
  for (std::size_t l = 0; l < config_.n_layers; ++l) {
    const auto p = "blocks." + std::to_string(l) + ".";
    const auto br = r.split(100 + l);
    const double out_std = kInitStd / std::sqrt(2.0 * static_cast<double>(config_.n_layers));
    Block b;
    b.ln1_g = params_.add(p + "ln1.gamma", Tensor({d}, 1.0));
    b.ln1_b = params_.add(p + "ln1.beta", Tensor({d}));
    b.q_w = params_.add(p + "attn.q.weight", normal(br.split(1), {d, d}, kInitStd));
    b.q_b = params_.add(p + "attn.q.bias", Tensor({d}));
    b.k_w = params_.add(p + "attn.k.weight", normal(br.split(2), {d, d}, kInitStd));
    b.k_b = params_.add(p + "attn.k.bias", Tensor({d}));
    b.v_w = params_.add(p + "attn.v.weight", normal(br.split(3), {d, d}, kInitStd));
    b.v_b = params_.add(p + "attn.v.bias", Tensor({d}));
    b.o_w = params_.add(p + "attn.out.weight", normal(br.split(4), {d, d}, out_std));
    b.o_b = params_.add(p + "attn.out.bias", Tensor({d}));
    b.ln2_g = params_.add(p + "ln2.gamma", Tensor({d}, 1.0));
    b.ln2_b = params_.add(p + "ln2.beta", Tensor({d}));
    b.up_w = params_.add(p + "mlp.up.weight", normal(br.split(5), {d, 4 * d}, kInitStd));
    b.up_b = params_.add(p + "mlp.up.bias", Tensor({4 * d}));
    b.down_w = params_.add(p + "mlp.down.weight", normal(br.split(6), {4 * d, d}, out_std));
    b.down_b = params_.add(p + "mlp.down.bias", Tensor({d}));
    blocks_.push_back(b);
  }
  fln_g_ = params_.add("final_ln.gamma", Tensor({d}, 1.0));
  fln_b_ = params_.add("final_ln.beta", Tensor({d}));
  head_w_ = params_.add("head.weight", normal(r.split(4), {d, V}, kInitStd));
  head_b_ = params_.add("head.bias", Tensor({V}));
  if (config_.latent_map == LatentMap::Linear) {
    lat_w_ = params_.add("latent.g.weight", Tensor::identity(d));
    lat_b_ = params_.add("latent.g.bias", Tensor({d}));
  }
  auto vr = r.split(5);
  vpm_ = std::make_unique<PerceptionModule>(config_, params_, vr);
}

Var LatentTransformer::global_image(const PixelImage& image) const {
  const auto cp = config_.coarse_patch;
  if (image.width <= 0 || image.height <= 0 || image.width % static_cast<int>(cp) != 0 ||
      image.height % static_cast<int>(cp) != 0) {
    throw DimensionError("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                         " not divisible by coarse_patch " + std::to_string(cp));
  }
  if (image.pixels.size() != static_cast<std::size_t>(image.width * image.height * 3)) {
    throw DimensionError("pixel buffer size disagrees with image dimensions");
  }
  const std::size_t cols = static_cast<std::size_t>(image.width) / cp, rows = static_cast<std::size_t>(image.height) / cp;
  Tensor pooled({rows * cols, 3});
  const double inv = 1.0 / (255.0 * static_cast<double>(cp * cp));
  for (std::size_t pr = 0; pr < rows; ++pr) {
    for (std::size_t pc = 0; pc < cols; ++pc) {
      for (std::size_t c = 0; c < 3; ++c) {
        double s = 0.0;
        for (std::size_t y = 0; y < cp; ++y) {
          for (std::size_t x = 0; x < cp; ++x) {
            s += image.pixels[((pr * cp + y) * static_cast<std::size_t>(image.width) + pc * cp + x) * 3 + c];
          }
        }
        pooled.at(pr * cols + pc, c) = s * inv;
      }
    }
  }
  return ops::linear(Var(std::move(pooled)), img_w_, img_b_);
}

Tensor LatentTransformer::encode_global_image(const PixelImage& image) const {
  NoGradGuard guard;
  return global_image(image).value();
}

Var LatentTransformer::latent_map(const Var& h) const {
  if (config_.latent_map == LatentMap::Identity) return h;
  return ops::linear(h, lat_w_, lat_b_);
}

Tensor LatentTransformer::latent_step(const Tensor& h_prev) const {
  NoGradGuard guard;
  return latent_map(row_var(h_prev, config_.d_model)).value().reshaped({config_.d_model});
}

Var LatentTransformer::head(const Var& hidden) const { return ops::linear(hidden, head_w_, head_b_); }

LatentTransformer::Output LatentTransformer::forward(const TokenSequence& seq) const {
  if (seq.size() == 0) throw SequenceError("forward on an empty sequence");
  NoGradGuard guard;
  Session s(*this, seq.image);
  s.append(seq.slots);
  const auto h = s.hidden_all();
  return {h.value(), head(h).value()};
}

Var LatentTransformer::loss(const TokenSequence& seq) const {
  std::vector<std::size_t> rows;
  std::vector<std::int64_t> targets;
  for (std::size_t t = 0; t < seq.size(); ++t) {
    const auto& s = seq.slots[t];
    if (!s.loss) continue;
    if (!s.is_token()) throw SequenceError("continuous slot at " + std::to_string(t) + " carries loss");
    if (t == 0) throw SequenceError("the first slot cannot carry loss");
    rows.push_back(t - 1);
    targets.push_back(s.token);
  }
  if (rows.empty()) throw SequenceError("sequence has no loss-bearing slot");
  Session s(*this, seq.image);
  s.append(seq.slots);
  const auto logits = head(ops::gather_rows(s.hidden_all(), rows));
  std::unique_ptr<bool[]> mask(new bool[rows.size()]);
  std::fill_n(mask.get(), rows.size(), true);
  return ops::masked_cross_entropy(logits, targets, std::span<const bool>(mask.get(), rows.size()));
}

std::vector<std::pair<std::string, std::size_t>> LatentTransformer::census() const {
  std::vector<std::pair<std::string, std::size_t>> out;
  for (const auto& p : params_.items()) out.emplace_back(p.name, p.var.value().numel());
  out.emplace_back("total", params_.scalar_count());
  return out;
}

Session::Session(const LatentTransformer& model, std::shared_ptr<const PixelImage> image)
    : model_(model), image_(std::move(image)), k_cache_(model.config().n_layers), v_cache_(model.config().n_layers) {}

void Session::append(const Slot& slot) { append(std::span<const Slot>(&slot, 1)); }

void Session::append(std::span<const Slot> slots) {
  if (slots_.size() + slots.size() > model_.config().max_seq) {
    throw SequenceError("sequence length " + std::to_string(slots_.size() + slots.size()) + " exceeds max_seq " +
                        std::to_string(model_.config().max_seq));
  }
  slots_.insert(slots_.end(), slots.begin(), slots.end());
  resolved_.resize(slots_.size());
  process();
}

std::optional<std::size_t> Session::control_dependency(std::size_t pos) const {
  for (std::size_t i = pos; i-- > 0;) {
    if (!slots_[i].is(tok::kCtrl)) continue;
    if (model_.config().control_keys == ControlKeys::CtrlOnly) return i;
    if (i == 0 || i + 1 >= pos || !slots_[i - 1].is(tok::kBop) || !slots_[i + 1].is(tok::kEop)) {
      throw SequenceError("perception slot without a complete <bop><ctrl><eop> frame");
    }
    return i + 1;
  }
  throw SequenceError("perception slot at " + std::to_string(pos) + " has no preceding <ctrl>");
}

const Var& Session::injected_for(std::size_t dep) {
  if (injected_dep_ == dep) return injected_;
  Var h_ctrl;
  if (model_.config().control_keys == ControlKeys::CtrlOnly) {
    h_ctrl = hidden(dep);
  } else {
    h_ctrl = ops::slice_rows(hidden_all(), dep - 2, dep + 1);
  }
  if (!image_) throw SequenceError("perception slot without an image");
  if (!fine_) fine_ = Var(model_.vpm().encode_fine(*image_).features);
  const auto g = model_.vpm().cross_attend(*fine_, h_ctrl);
  injected_ = model_.vpm().inject(g.z_p);
  injected_dep_ = dep;
  ++perception_calls_;
  last_perception_ = PerceptionOutput{g.z_p.value(), g.attention.value()};
  return injected_;
}

void Session::process() {
  while (done_ < slots_.size()) {
    std::size_t end = done_;
    for (; end < slots_.size(); ++end) {
      const auto& s = slots_[end];
      if (s.embedding) continue;
      if (s.tag == SlotTag::LatentThought) {
        if (end == 0) throw SequenceError("latent slot at position 0");
        if (end > done_) break;
      } else if (s.tag == SlotTag::PerceptionFeature) {
        const auto dep = *control_dependency(end);
        if (injected_dep_ != dep && dep >= done_) break;
      }
    }
    run_block(done_, end);
    done_ = end;
  }
}

void Session::run_block(std::size_t begin, std::size_t end) {
  const auto& m = model_;
  const auto& cfg = m.config();
  const std::size_t d = cfg.d_model;
  std::vector<Var> pieces;
  std::size_t i = begin;
  while (i < end) {
    const auto& s = slots_[i];
    std::size_t j = i + 1;
    if (s.embedding && s.tag != SlotTag::PerceptionFeature) {
      pieces.push_back(row_var(*s.embedding, d));
    } else if (s.tag == SlotTag::Token) {
      while (j < end && slots_[j].tag == SlotTag::Token) ++j;
      std::vector<std::size_t> ids;
      for (std::size_t k = i; k < j; ++k) {
        if (slots_[k].token < 0 || slots_[k].token >= kVocabSize) {
          throw SequenceError("token id " + std::to_string(slots_[k].token) + " out of range");
        }
        ids.push_back(static_cast<std::size_t>(slots_[k].token));
      }
      pieces.push_back(ops::gather_rows(m.tok_emb_, ids));
    } else if (s.tag == SlotTag::ImagePatch) {
      while (j < end && slots_[j].tag == SlotTag::ImagePatch && !slots_[j].embedding) ++j;
      if (!global_) {
        if (!image_) throw SequenceError("image slot without an image");
        global_ = m.global_image(*image_);
      }
      std::vector<std::size_t> idx;
      for (std::size_t k = i; k < j; ++k) {
        if (slots_[k].index >= global_->rows()) throw SequenceError("image slot index out of range");
        idx.push_back(slots_[k].index);
      }
      const auto rows = ops::gather_rows(*global_, idx);
      pieces.push_back(rows);
      for (std::size_t k = i; k < j; ++k) resolved_[k] = Tensor({d}, std::vector<double>(rows.value().row(k - i).begin(), rows.value().row(k - i).end()));
    } else if (s.tag == SlotTag::LatentThought) {
      const auto g = m.latent_map(hidden(i - 1));
      resolved_[i] = g.value().reshaped({d});
      pieces.push_back(g);
    } else {
      // Perception run: injected rows (or carried embeddings) plus the learned patch position.
      const bool placeholder = !s.embedding;
      while (j < end && slots_[j].tag == SlotTag::PerceptionFeature && !slots_[j].embedding == placeholder) ++j;
      std::vector<std::size_t> idx;
      for (std::size_t k = i; k < j; ++k) {
        if (slots_[k].index >= cfg.perception_slots()) throw SequenceError("perception slot index out of range");
        idx.push_back(slots_[k].index);
      }
      Var base;
      if (placeholder) {
        base = ops::gather_rows(injected_for(*control_dependency(i)), idx);
        for (std::size_t k = i; k < j; ++k) {
          const auto r = base.value().row(k - i);
          resolved_[k] = Tensor({d}, std::vector<double>(r.begin(), r.end()));
        }
      } else {
        std::vector<Var> rows;
        for (std::size_t k = i; k < j; ++k) rows.push_back(row_var(*slots_[k].embedding, d));
        base = rows.size() == 1 ? rows[0] : ops::concat_rows(rows);
      }
      pieces.push_back(ops::add(base, ops::gather_rows(m.vpm().patch_pos(), idx)));
    }
    i = j;
  }
  auto x = pieces.size() == 1 ? pieces[0] : ops::concat_rows(pieces);
  x = ops::add(x, ops::slice_rows(m.pos_emb_, begin, end));
  for (std::size_t l = 0; l < m.blocks_.size(); ++l) {
    const auto& b = m.blocks_[l];
    const auto a = ops::layer_norm(x, b.ln1_g, b.ln1_b);
    const auto q = ops::linear(a, b.q_w, b.q_b);
    auto k = ops::linear(a, b.k_w, b.k_b);
    auto v = ops::linear(a, b.v_w, b.v_b);
    if (begin > 0) {
      const Var ks[] = {k_cache_[l], k};
      const Var vs[] = {v_cache_[l], v};
      k = ops::concat_rows(ks);
      v = ops::concat_rows(vs);
    }
    k_cache_[l] = k;
    v_cache_[l] = v;
    const auto att = ops::multi_head_attention(q, k, v, cfg.n_heads, true, begin);
    x = ops::add(x, ops::linear(att, b.o_w, b.o_b));
    const auto h2 = ops::layer_norm(x, b.ln2_g, b.ln2_b);
    x = ops::add(x, ops::linear(ops::gelu(ops::linear(h2, b.up_w, b.up_b)), b.down_w, b.down_b));
  }
  chunks_.push_back({begin, end, ops::layer_norm(x, m.fln_g_, m.fln_b_)});
}

Var Session::hidden(std::size_t pos) const {
  if (pos >= done_) throw SequenceError("hidden state at " + std::to_string(pos) + " not computed yet");
  const auto it = std::upper_bound(chunks_.begin(), chunks_.end(), pos,
                                   [](std::size_t p, const Chunk& c) { return p < c.end; });
  if (it->begin == pos && it->end == pos + 1) return it->hidden;
  return ops::slice_rows(it->hidden, pos - it->begin, pos - it->begin + 1);
}

Var Session::hidden_all() const {
  if (chunks_.empty()) throw SequenceError("no hidden states");
  if (chunks_.size() == 1) return chunks_[0].hidden;
  std::vector<Var> parts;
  parts.reserve(chunks_.size());
  for (const auto& c : chunks_) parts.push_back(c.hidden);
  return ops::concat_rows(parts);
}

Tensor Session::logits_at(std::size_t pos) const {
  NoGradGuard guard;
  return model_.head(hidden(pos)).value().reshaped({static_cast<std::size_t>(kVocabSize)});
}

Tensor Session::resolved_embedding(std::size_t pos) const {
  if (pos >= slots_.size()) throw SequenceError("position out of range");
  if (slots_[pos].embedding) return *slots_[pos].embedding;
  if (pos >= done_ || resolved_[pos].numel() == 0) throw SequenceError("no resolved embedding at " + std::to_string(pos));
  return resolved_[pos];
}

}  // namespace sfa
