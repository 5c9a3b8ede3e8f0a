// SPDX-License-Identifier: Apache-2.0
#include "sfa/perception/vpm.hpp"

#include <cmath>

#include "json.hpp"
#include "sfa/errors.hpp"
#include "sfa/tensor/ops.hpp"

namespace sfa {

namespace {

Tensor normal_init(CounterRng rng, Shape shape, double std) {
  Tensor t(std::move(shape));
  for (auto& x : t.data()) x = rng.normal() * std;
  return t;
}

// Row r, column c of a g x g grid: the first half of the columns encodes the
// row, the second half the column, each as sin/cos pairs of falling frequency.
Tensor grid_sinusoid(std::size_t g, std::size_t d, double amplitude) {
  Tensor t({g * g, d});
  const std::size_t half = d / 2;
  for (std::size_t r = 0; r < g; ++r) {
    for (std::size_t c = 0; c < g; ++c) {
      auto row = t.row(r * g + c);
      for (std::size_t k = 0; k < half; ++k) {
        const double freq = M_PI / static_cast<double>(g) * std::pow(2.0, -static_cast<double>(k / 2) / 2.0);
        const double p0 = (static_cast<double>(r) + 0.5) * freq, p1 = (static_cast<double>(c) + 0.5) * freq;
        row[k] = amplitude * (k % 2 == 0 ? std::sin(p0) : std::cos(p0));
        row[half + k] = amplitude * (k % 2 == 0 ? std::sin(p1) : std::cos(p1));
      }
    }
  }
  return t;
}

}  // namespace

PerceptionModule::PerceptionModule(const ModelConfig& config, ParameterSet& params, CounterRng& rng)
    : config_(config), dk_(config.d_k()) {
  const std::size_t d = config.d_model, df = config.d_f, m = config.m_slots;
  const std::size_t patch_dim = config.fine_patch * config.fine_patch * 3;
  const auto r = rng.split(0x76706d);
  enc_w_ = params.add("vpm.encoder.weight", normal_init(r.split(1), {patch_dim, df}, 1.0 / std::sqrt(patch_dim)));
  enc_b_ = params.add("vpm.encoder.bias", normal_init(r.split(2), {df}, 0.1));
  q_w_ = params.add("vpm.proj_q.weight", normal_init(r.split(3), {df, dk_}, 1.0 / std::sqrt(df)));
  q_b_ = params.add("vpm.proj_q.bias", Tensor({dk_}));
  k_w_ = params.add("vpm.proj_k.weight", normal_init(r.split(4), {d, m * dk_}, 1.0 / std::sqrt(d)));
  k_b_ = params.add("vpm.proj_k.bias", normal_init(r.split(5), {m * dk_}, 1.0));
  v_w_ = params.add("vpm.proj_v.weight", normal_init(r.split(6), {d, m * df}, 1.0 / std::sqrt(d)));
  v_b_ = params.add("vpm.proj_v.bias", Tensor({m * df}));
  out_w_ = params.add("vpm.proj_out.weight", normal_init(r.split(7), {df, d}, 1.0 / std::sqrt(df)));
  out_b_ = params.add("vpm.proj_out.bias", Tensor({d}));
  patch_pos_ = params.add("vpm.proj_patch_pos", grid_sinusoid(config.pooled_grid(), d, 0.5));
}

Tensor PerceptionModule::patch_matrix(const PixelImage& image) const {
  const auto fp = config_.fine_patch;
  if (image.width <= 0 || image.height <= 0 || image.width % static_cast<int>(fp) != 0 ||
      image.height % static_cast<int>(fp) != 0) {
    throw DimensionError("image " + std::to_string(image.width) + "x" + std::to_string(image.height) +
                         " not divisible by fine_patch " + std::to_string(fp));
  }
  if (image.pixels.size() != static_cast<std::size_t>(image.width * image.height * 3)) {
    throw DimensionError("pixel buffer size disagrees with image dimensions");
  }
  const std::size_t cols = static_cast<std::size_t>(image.width) / fp, rows = static_cast<std::size_t>(image.height) / fp;
  Tensor out({rows * cols, fp * fp * 3});
  for (std::size_t pr = 0; pr < rows; ++pr) {
    for (std::size_t pc = 0; pc < cols; ++pc) {
      auto row = out.row(pr * cols + pc);
      std::size_t k = 0;
      for (std::size_t y = 0; y < fp; ++y) {
        for (std::size_t x = 0; x < fp; ++x) {
          const std::size_t px = (pr * fp + y) * static_cast<std::size_t>(image.width) + pc * fp + x;
          for (std::size_t c = 0; c < 3; ++c) row[k++] = image.pixels[px * 3 + c] / 255.0 - 0.5;
        }
      }
    }
  }
  return out;
}

FineFeatureMap PerceptionModule::encode_fine(const PixelImage& image) const {
  NoGradGuard guard;
  FineFeatureMap f;
  f.features = ops::linear(Var(patch_matrix(image)), enc_w_, enc_b_).value();
  f.rows = static_cast<std::size_t>(image.height) / config_.fine_patch;
  f.cols = static_cast<std::size_t>(image.width) / config_.fine_patch;
  return f;
}

PerceptionModule::Graph PerceptionModule::cross_attend(const Var& f_img, const Var& h_ctrl) const {
  if (f_img.value().rank() != 2 || f_img.cols() != config_.d_f) {
    throw DimensionError("F_img width " + shape_str(f_img.shape()) + " != d_f " + std::to_string(config_.d_f));
  }
  if (h_ctrl.value().rank() != 2 || h_ctrl.cols() != config_.d_model || h_ctrl.rows() == 0) {
    throw DimensionError("h_ctrl shape " + shape_str(h_ctrl.shape()) + " incompatible with d_model");
  }
  const std::size_t keys = h_ctrl.rows() * config_.m_slots;
  const auto q = ops::linear(f_img, q_w_, q_b_);
  const auto k = ops::reshape(ops::linear(h_ctrl, k_w_, k_b_), {keys, dk_});
  const auto v = ops::reshape(ops::linear(h_ctrl, v_w_, v_b_), {keys, config_.d_f});
  Graph g;
  g.z_p = ops::add(ops::scaled_attention(q, k, v), f_img);
  g.attention = Var(ops::attention_weights(q.value(), k.value()));
  return g;
}

PerceptionOutput PerceptionModule::cross_attend(const FineFeatureMap& f, const Tensor& h_ctrl) const {
  NoGradGuard guard;
  Tensor h = h_ctrl;
  if (h.rank() == 1) h = h.reshaped({1, h.numel()});
  auto g = cross_attend(Var(f.features), Var(h));
  return {g.z_p.value(), g.attention.value()};
}

Var PerceptionModule::pool(const Var& z_p) const {
  const std::size_t w = config_.perception_pool;
  if (w == 1) return z_p;
  const std::size_t g = config_.fine_grid(), pg = config_.pooled_grid();
  if (z_p.rows() != g * g) throw DimensionError("z_p rows disagree with the fine grid");
  Tensor pm({pg * pg, g * g});
  const double inv = 1.0 / static_cast<double>(w * w);
  for (std::size_t r = 0; r < g; ++r) {
    for (std::size_t c = 0; c < g; ++c) pm.at((r / w) * pg + c / w, r * g + c) = inv;
  }
  return ops::matmul(Var(std::move(pm)), z_p);
}

Var PerceptionModule::inject(const Var& z_p) const {
  if (z_p.value().rank() != 2 || z_p.cols() != config_.d_f) {
    throw DimensionError("z_p shape " + shape_str(z_p.shape()) + " incompatible with d_f");
  }
  return ops::linear(pool(z_p), out_w_, out_b_);
}

Tensor PerceptionModule::project(const Tensor& z_p) const {
  NoGradGuard guard;
  return inject(Var(z_p)).value();
}

void PerceptionModule::inject_features(TokenSequence& seq, const Tensor& z_p) const {
  const auto proj = project(z_p);
  for (std::size_t i = 0; i < proj.rows(); ++i) {
    auto slot = Slot::perception(i);
    const auto r = proj.row(i);
    slot.embedding = Tensor({proj.cols()}, std::vector<double>(r.begin(), r.end()));
    seq.slots.push_back(std::move(slot));
  }
}

std::string attention_dump_json(const PerceptionOutput& out, std::size_t grid_rows, std::size_t grid_cols,
                                const std::string& action_text) {
  nlohmann::ordered_json j;
  j["patch_grid"] = {grid_rows, grid_cols};
  j["keys"] = out.attention.cols();
  auto& w = j["weights"] = nlohmann::json::array();
  for (std::size_t r = 0; r < out.attention.rows(); ++r) {
    const auto row = out.attention.row(r);
    w.push_back(std::vector<double>(row.begin(), row.end()));
  }
  j["action"] = action_text;
  return j.dump() + "\n";
}

}  // namespace sfa
