// SPDX-License-Identifier: Apache-2.0
#include "sfa/model/config.hpp"

#include "json.hpp"
#include "sfa/errors.hpp"
#include "sfa/tensor/checkpoint.hpp"

namespace sfa {

void ModelConfig::validate() const {
  auto fail = [](const std::string& m) { throw ValidationError("model config: " + m); };
  if (version != 1) fail("unsupported version " + std::to_string(version));
  if (d_model == 0 || n_heads == 0 || d_model % n_heads != 0) fail("d_model must be a positive multiple of n_heads");
  if (n_layers == 0) fail("n_layers must be positive");
  if (max_seq < 2) fail("max_seq too small");
  if (image_size == 0 || coarse_patch == 0 || fine_patch == 0) fail("image and patch sizes must be positive");
  if (image_size % coarse_patch != 0) fail("image_size not divisible by coarse_patch");
  if (image_size % fine_patch != 0) fail("image_size not divisible by fine_patch");
  if (m_slots == 0) fail("m_slots must be positive");
  if (d_f == 0) fail("d_f must be positive");
  if (perception_pool == 0 || fine_grid() % perception_pool != 0) fail("perception_pool must divide the fine grid");
}

std::string ModelConfig::to_json() const {
  nlohmann::ordered_json j;
  j["version"] = version;
  j["d_model"] = d_model;
  j["n_layers"] = n_layers;
  j["n_heads"] = n_heads;
  j["max_seq"] = max_seq;
  j["n_latent"] = n_latent;
  j["image_size"] = image_size;
  j["coarse_patch"] = coarse_patch;
  j["fine_patch"] = fine_patch;
  j["m_slots"] = m_slots;
  j["d_f"] = d_f;
  j["perception_pool"] = perception_pool;
  j["latent_map"] = latent_map == LatentMap::Identity ? "identity" : "linear";
  j["control_keys"] = control_keys == ControlKeys::CtrlOnly ? "ctrl" : "all3";
  j["seed"] = seed;
  return j.dump(2) + "\n";
}

ModelConfig ModelConfig::from_json(const std::string& text) {
  ModelConfig c;
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [key, _] : j.items()) {
      static const char* known[] = {"version",    "d_model", "n_layers",      "n_heads",    "max_seq",
                                    "n_latent",   "image_size", "coarse_patch", "fine_patch", "m_slots",
                                    "d_f",        "perception_pool", "latent_map", "control_keys", "seed"};
      bool ok = false;
      for (auto* k : known) ok = ok || key == k;
      if (!ok) throw ValidationError("model config: unknown key '" + key + "'");
    }
    c.version = j.value("version", c.version);
    c.d_model = j.value("d_model", c.d_model);
    c.n_layers = j.value("n_layers", c.n_layers);
    c.n_heads = j.value("n_heads", c.n_heads);
    c.max_seq = j.value("max_seq", c.max_seq);
    c.n_latent = j.value("n_latent", c.n_latent);
    c.image_size = j.value("image_size", c.image_size);
    c.coarse_patch = j.value("coarse_patch", c.coarse_patch);
    c.fine_patch = j.value("fine_patch", c.fine_patch);
    c.m_slots = j.value("m_slots", c.m_slots);
    c.d_f = j.value("d_f", c.d_f);
    c.perception_pool = j.value("perception_pool", c.perception_pool);
    const auto g = j.value("latent_map", std::string("identity"));
    if (g != "identity" && g != "linear") throw ValidationError("model config: latent_map must be identity or linear");
    c.latent_map = g == "identity" ? LatentMap::Identity : LatentMap::Linear;
    const auto ck = j.value("control_keys", std::string("ctrl"));
    if (ck != "ctrl" && ck != "all3") throw ValidationError("model config: control_keys must be ctrl or all3");
    c.control_keys = ck == "ctrl" ? ControlKeys::CtrlOnly : ControlKeys::AllThree;
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("model config: ") + e.what());
  }
  c.validate();
  return c;
}

std::uint64_t ModelConfig::digest() const {
  const auto s = to_json();
  return fnv1a64(s.data(), s.size());
}

}  // namespace sfa
