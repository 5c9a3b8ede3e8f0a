// SPDX-License-Identifier: Apache-2.0
#include "sfa/sim/screen.hpp"

#include <cmath>

#include "sfa/errors.hpp"
#include "sfa/rng.hpp"

namespace sfa {

namespace {

using Rgb = std::array<std::uint8_t, 3>;

struct IconStyle {
  Rgb a;
  Rgb b;
};

constexpr std::array<IconStyle, 4> kIconPairs = {{
    {{220, 40, 40}, {40, 40, 200}},
    {{30, 160, 60}, {240, 200, 30}},
    {{150, 50, 180}, {250, 140, 0}},
    {{0, 150, 160}, {200, 60, 120}},
}};

constexpr Rgb kBorder = {60, 60, 60};
constexpr Rgb kFieldFill = {252, 252, 252};
constexpr Rgb kInk = {30, 30, 30};
constexpr Rgb kButtonFill = {90, 110, 140};
constexpr Rgb kButtonEdge = {50, 60, 80};
constexpr Rgb kLabelFill = {110, 110, 110};

constexpr int kGrid = 4;

struct PxBox {
  int x0, y0, x1, y1;
};

PxBox to_px(const BBox& b, int w, int h) {
  return {static_cast<int>(std::lround(b.x0 * w)), static_cast<int>(std::lround(b.y0 * h)),
          static_cast<int>(std::lround(b.x1 * w)), static_cast<int>(std::lround(b.y1 * h))};
}

}  // namespace

std::string_view element_kind_name(ElementKind k) noexcept {
  switch (k) {
    case ElementKind::Icon: return "icon";
    case ElementKind::Button: return "button";
    case ElementKind::TextField: return "text_field";
    case ElementKind::Label: return "label";
  }
  return "?";
}

std::optional<ElementKind> element_kind_from_name(std::string_view name) noexcept {
  for (auto k : {ElementKind::Icon, ElementKind::Button, ElementKind::TextField, ElementKind::Label}) {
    if (element_kind_name(k) == name) return k;
  }
  return std::nullopt;
}

std::optional<int> icon_index(std::string_view caption) noexcept {
  for (std::size_t i = 0; i < kIconCaptions.size(); ++i) {
    if (kIconCaptions[i] == caption) return static_cast<int>(i);
  }
  return std::nullopt;
}

const UiElement* Screen::find(ElementKind kind, std::string_view caption) const noexcept {
  for (const auto& e : elements) {
    if (e.kind == kind && e.caption == caption) return &e;
  }
  return nullptr;
}

Rgb glyph_color(int glyph, int lx, int ly, int w, int h) noexcept {
  const bool edge = lx == 0 || ly == 0 || lx == w - 1 || ly == h - 1;
  if (glyph >= 0 && glyph < 8) {
    const auto& pair = kIconPairs[static_cast<std::size_t>(glyph / 2)];
    const int phase = glyph % 2 == 0 ? ly : lx;
    return phase % 2 == 0 ? pair.a : pair.b;
  }
  switch (glyph) {
    case kGlyphButton: return edge ? kButtonEdge : kButtonFill;
    case kGlyphFieldEmpty: return edge ? kBorder : kFieldFill;
    case kGlyphFieldFilled:
      if (edge) return kBorder;
      return (ly == h / 2 && lx >= 2 && lx < w - 2) ? kInk : kFieldFill;
    default: return kLabelFill;
  }
}

void render_pixels(Screen& s) {
  const auto n = static_cast<std::size_t>(s.width) * static_cast<std::size_t>(s.height);
  s.pixels.assign(n * 3, 0);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < 3; ++c) s.pixels[i * 3 + c] = kBackground[c];
  }
  for (const auto& e : s.elements) {
    const auto b = to_px(e.bbox, s.width, s.height);
    const int w = b.x1 - b.x0;
    const int h = b.y1 - b.y0;
    for (int y = b.y0; y < b.y1; ++y) {
      for (int x = b.x0; x < b.x1; ++x) {
        const auto rgb = glyph_color(e.glyph, x - b.x0, y - b.y0, w, h);
        const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(s.width) + static_cast<std::size_t>(x)) * 3;
        for (std::size_t c = 0; c < 3; ++c) s.pixels[i + c] = rgb[c];
      }
    }
  }
}

UiElement& place_element(Screen& s, CounterRng& rng, ElementKind kind, int glyph, std::string caption, int w_px,
                         int h_px) {
  if (w_px > s.width || h_px > s.height) throw GenerationError("element larger than the screen");
  for (int attempt = 0; attempt < 256; ++attempt) {
    const int x0 = kGrid * static_cast<int>(rng.below(static_cast<std::uint64_t>((s.width - w_px) / kGrid + 1)));
    const int y0 = kGrid * static_cast<int>(rng.below(static_cast<std::uint64_t>((s.height - h_px) / kGrid + 1)));
    const PxBox cand{x0 - kGrid, y0 - kGrid, x0 + w_px + kGrid, y0 + h_px + kGrid};
    bool clear = true;
    for (const auto& e : s.elements) {
      const auto b = to_px(e.bbox, s.width, s.height);
      if (cand.x0 < b.x1 && b.x0 < cand.x1 && cand.y0 < b.y1 && b.y0 < cand.y1) {
        clear = false;
        break;
      }
    }
    if (!clear) continue;
    UiElement e;
    e.id = static_cast<int>(s.elements.size());
    e.kind = kind;
    e.glyph = glyph;
    e.caption = std::move(caption);
    e.bbox = {static_cast<double>(x0) / s.width, static_cast<double>(y0) / s.height,
              static_cast<double>(x0 + w_px) / s.width, static_cast<double>(y0 + h_px) / s.height};
    s.elements.push_back(std::move(e));
    return s.elements.back();
  }
  throw GenerationError("could not place element after 256 attempts (screen too dense)");
}

Screen generate_screen(std::uint64_t seed, const ScreenConfig& cfg) {
  if (cfg.min_elements < 1 || cfg.max_elements > 12 || cfg.min_elements > cfg.max_elements) {
    throw ValidationError("element count range must lie within [1, 12]");
  }
  if (cfg.width % 8 != 0 || cfg.height % 8 != 0 || cfg.width <= 0 || cfg.height <= 0) {
    throw ValidationError("screen dimensions must be positive multiples of 8");
  }
  CounterRng rng(seed);
  Screen s;
  s.width = cfg.width;
  s.height = cfg.height;
  const auto count = rng.between(cfg.min_elements, cfg.max_elements);
  std::array<int, 8> icons = {0, 1, 2, 3, 4, 5, 6, 7};
  rng.shuffle(std::span<int>(icons));
  std::size_t next_icon = 0;
  static constexpr std::array<std::string_view, 4> kButtons = {"ok", "next", "menu", "back"};
  for (std::int64_t i = 0; i < count; ++i) {
    const auto roll = rng.below(20);
    if (roll < 10 && next_icon < icons.size()) {
      const int icon = icons[next_icon++];
      const int size = rng.below(2) ? 12 : 8;
      place_element(s, rng, ElementKind::Icon, icon, std::string(kIconCaptions[static_cast<std::size_t>(icon)]), size,
                    size);
    } else if (roll < 15) {
      place_element(s, rng, ElementKind::Button, kGlyphButton, std::string(kButtons[rng.below(kButtons.size())]), 12,
                    8);
    } else if (roll < 18) {
      place_element(s, rng, ElementKind::Label, kGlyphLabel, "label", 16, 4);
    } else {
      place_element(s, rng, ElementKind::TextField, kGlyphFieldEmpty, "", 24, 8);
    }
  }
  render_pixels(s);
  return s;
}

bool elements_disjoint(const Screen& s) noexcept {
  for (std::size_t i = 0; i < s.elements.size(); ++i) {
    for (std::size_t j = i + 1; j < s.elements.size(); ++j) {
      if (s.elements[i].bbox.intersects(s.elements[j].bbox)) return false;
    }
  }
  return true;
}

}  // namespace sfa
