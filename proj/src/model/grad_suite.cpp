// SPDX-License-Identifier: Apache-2.0
#include "sfa/model/grad_suite.hpp"

#include <algorithm>

#include "sfa/action/action.hpp"
#include "sfa/data/enhancer.hpp"
#include "sfa/model/transformer.hpp"
#include "sfa/rng.hpp"
#include "sfa/tensor/ops.hpp"

namespace sfa {

namespace {

Tensor random_tensor(const Shape& shape, CounterRng& rng, double scale = 1.0) {
  Tensor t(shape);
  for (auto& x : t.data()) x = scale * rng.normal();
  return t;
}

}  // namespace

std::vector<GradSuiteEntry> gradient_suite(std::uint64_t seed, std::size_t coords, double eps) {
  std::vector<GradSuiteEntry> out;
  const GradCheckOptions opt{eps, coords, seed};
  CounterRng rng(seed);
  ParameterSet ps;
  auto a = ps.add("a", random_tensor({5, 6}, rng));
  auto b = ps.add("b", random_tensor({5, 6}, rng));
  auto w = ps.add("w", random_tensor({6, 4}, rng, 0.5));
  auto bias = ps.add("bias", random_tensor({4}, rng));
  auto g6 = ps.add("gamma", random_tensor({6}, rng));
  auto b6 = ps.add("beta", random_tensor({6}, rng));
  auto r6 = ps.add("row", random_tensor({6}, rng));
  auto k = ps.add("k", random_tensor({7, 6}, rng));
  auto v = ps.add("v", random_tensor({7, 6}, rng));
  const std::int64_t targets[] = {1, 3, 0, 2, 3};
  const bool mask[] = {true, false, true, true, true};
  const std::size_t rows[] = {4, 0, 0, 2, 1, 6};

  const auto check = [&](const std::string& name, const std::function<Var()>& f) {
    // Weighted sum so every output coordinate carries a distinct gradient.
    CounterRng pr = rng.split(out.size());
    const auto fixed = f();
    const Tensor weights = random_tensor(fixed.shape(), pr);
    const auto loss = [&] {
      auto o = f();
      return o.value().numel() == 1 ? o : ops::sum(ops::mul(o, Var(weights)));
    };
    out.push_back({name, grad_check(loss, ps.items(), opt)});
  };
  check("matmul", [&] { return ops::matmul(a, w); });
  check("add", [&] { return ops::add(a, b); });
  check("sub", [&] { return ops::sub(a, b); });
  check("mul", [&] { return ops::mul(a, b); });
  check("scale", [&] { return ops::scale(a, -1.7); });
  check("add_row", [&] { return ops::add_row(a, r6); });
  check("linear", [&] { return ops::linear(a, w, bias); });
  check("gelu", [&] { return ops::gelu(a); });
  check("tanh", [&] { return ops::tanh(a); });
  check("layer_norm", [&] { return ops::layer_norm(a, g6, b6); });
  check("softmax", [&] { return ops::softmax(a, 1); });
  check("sum", [&] { return ops::sum(ops::mul(a, b)); });
  check("mean", [&] { return ops::mean(ops::mul(a, a)); });
  check("reshape", [&] { return ops::reshape(ops::mul(a, b), {3, 10}); });
  check("slice_rows", [&] { return ops::slice_rows(ops::mul(a, b), 1, 4); });
  check("concat_rows", [&] { return ops::concat_rows(std::vector<Var>{ops::mul(a, b), k}); });
  check("gather_rows", [&] { return ops::gather_rows(ops::concat_rows(std::vector<Var>{a, v}), rows); });
  check("scaled_attention", [&] { return ops::scaled_attention(a, k, v); });
  check("multi_head_attention", [&] { return ops::multi_head_attention(a, k, v, 2, true, 2); });
  check("masked_cross_entropy", [&] { return ops::masked_cross_entropy(ops::linear(a, w, bias), targets, mask); });

  ModelConfig cfg;
  cfg.d_model = 16;
  cfg.n_layers = 2;
  cfg.n_heads = 2;
  cfg.max_seq = 400;
  cfg.n_latent = 3;
  cfg.image_size = 16;
  cfg.coarse_patch = 8;
  cfg.fine_patch = 4;
  cfg.m_slots = 3;
  cfg.d_f = 8;
  cfg.perception_pool = 2;
  cfg.latent_map = LatentMap::Linear;
  cfg.control_keys = ControlKeys::AllThree;
  cfg.seed = seed;
  LatentTransformer model(cfg);
  auto img = std::make_shared<PixelImage>(PixelImage{16, 16, std::vector<std::uint8_t>(16 * 16 * 3)});
  for (auto& p : img->pixels) p = static_cast<std::uint8_t>(rng.below(256));
  const auto sample = enhance_sample(img, "", "tap the mail icon", {}, make_click({0.125, 0.75}), cfg);
  // The frozen encoder is a constant of the graph; it has no gradient to check.
  std::vector<Parameter> trainable;
  for (const auto& p : model.params().items()) {
    if (!PerceptionModule::is_frozen(p.name)) trainable.push_back(p);
  }
  out.push_back({"model.loss", grad_check([&] { return model.loss(sample.sequence); }, trainable, opt)});
  return out;
}

double max_rel_error(const std::vector<GradSuiteEntry>& entries) {
  double m = 0.0;
  for (const auto& e : entries) m = std::max(m, e.report.max_rel_error);
  return m;
}

}  // namespace sfa
