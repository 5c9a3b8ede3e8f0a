// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <memory>
#include <string>

#include "sfa/action/action.hpp"
#include "sfa/model/transformer.hpp"
#include "sfa/rng.hpp"
#include "sfa/sim/corpus.hpp"

namespace sfa::testing {

inline Point random_point(CounterRng& rng) {
  return {static_cast<double>(rng.below(10001)) / 10000.0, static_cast<double>(rng.below(10001)) / 10000.0};
}

/// Random valid action. With ascii_only the typed text stays printable ASCII.
inline ActionDecision random_action(CounterRng& rng, bool ascii_only = false) {
  const auto t = kAllActionTypes[rng.below(kActionTypeCount)];
  if (t == ActionType::Click) return make_click(random_point(rng));
  if (t == ActionType::Select) return make_select(random_point(rng));
  if (is_scroll(t)) return make_scroll(t);
  if (t == ActionType::Type) {
    static const char* words[] = {"hello", "a, b", "x:y", "[1, 2]", "new york", "caf\xc3\xa9"};
    const std::size_t n = ascii_only ? 5 : 6;
    std::string s = words[rng.below(n)];
    if (rng.below(2)) s += " " + std::string(words[rng.below(n)]);
    return make_type(s);
  }
  return make_simple(t);
}

inline std::shared_ptr<PixelImage> random_image(CounterRng& rng, int w = 64, int h = 64) {
  auto img = std::make_shared<PixelImage>();
  img->width = w;
  img->height = h;
  img->pixels.resize(static_cast<std::size_t>(w * h * 3));
  for (auto& p : img->pixels) p = static_cast<std::uint8_t>(rng.below(256));
  return img;
}

inline ModelConfig tiny_config() {
  ModelConfig c;
  c.d_model = 16;
  c.n_layers = 2;
  c.n_heads = 2;
  c.max_seq = 400;
  c.n_latent = 3;
  c.image_size = 16;
  c.coarse_patch = 8;
  c.fine_patch = 4;
  c.m_slots = 3;
  c.d_f = 8;
  return c;
}

/// Small model over full 64x64 simulator screens.
inline ModelConfig screen_config() {
  ModelConfig c = tiny_config();
  c.max_seq = 1024;
  c.image_size = 64;
  c.coarse_patch = 16;
  c.fine_patch = 8;
  return c;
}

}  // namespace sfa::testing
