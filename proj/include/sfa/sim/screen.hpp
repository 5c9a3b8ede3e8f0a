// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "sfa/action/action.hpp"

namespace sfa {

enum class ElementKind : std::uint8_t { Icon, Button, TextField, Label };

std::string_view element_kind_name(ElementKind k) noexcept;
std::optional<ElementKind> element_kind_from_name(std::string_view name) noexcept;

struct BBox {
  double x0 = 0, y0 = 0, x1 = 0, y1 = 0;

  Point center() const noexcept { return {(x0 + x1) / 2, (y0 + y1) / 2}; }
  bool contains_strictly(Point p) const noexcept { return p.x > x0 && p.x < x1 && p.y > y0 && p.y < y1; }
  bool intersects(const BBox& o) const noexcept { return x0 < o.x1 && o.x0 < x1 && y0 < o.y1 && o.y0 < y1; }
  friend bool operator==(const BBox&, const BBox&) = default;
};

struct UiElement {
  int id = 0;
  ElementKind kind = ElementKind::Icon;
  BBox bbox;
  int glyph = 0;
  std::string caption;
  friend bool operator==(const UiElement&, const UiElement&) = default;
};

/// Pixels are row-major H×W×3 bytes.
struct Screen {
  int width = 64;
  int height = 64;
  std::vector<UiElement> elements;
  std::vector<std::uint8_t> pixels;

  std::array<std::uint8_t, 3> pixel(int x, int y) const {
    const auto i = (static_cast<std::size_t>(y) * static_cast<std::size_t>(width) + static_cast<std::size_t>(x)) * 3;
    return {pixels[i], pixels[i + 1], pixels[i + 2]};
  }
  const UiElement* find(ElementKind kind, std::string_view caption) const noexcept;
};

/// App captions. Captions 2k and 2k+1 are twins: the same two colors striped
/// horizontally vs vertically, so they only differ below 8-pixel pooling.
inline constexpr std::array<std::string_view, 8> kIconCaptions = {"mail",  "bank",    "camera", "clock",
                                                                  "phone", "weather", "notes",  "settings"};
std::optional<int> icon_index(std::string_view caption) noexcept;
inline int twin_of(int icon) noexcept { return icon ^ 1; }

/// Glyph ids: 0..7 icons (by caption), then the fixed kinds below.
inline constexpr int kGlyphButton = 8;
inline constexpr int kGlyphFieldEmpty = 9;
inline constexpr int kGlyphFieldFilled = 10;
inline constexpr int kGlyphLabel = 11;
inline constexpr int kGlyphCount = 12;
inline constexpr std::array<std::uint8_t, 3> kBackground = {236, 236, 236};

/// Color of glyph g at element-local pixel (lx, ly).
std::array<std::uint8_t, 3> glyph_color(int glyph, int lx, int ly, int w, int h) noexcept;

/// Fills `pixels` from the element list.
void render_pixels(Screen& screen);

struct ScreenConfig {
  int min_elements = 3;
  int max_elements = 6;
  int width = 64;
  int height = 64;
};

class CounterRng;

/// Random screen of non-overlapping elements on the 4-pixel grid.
Screen generate_screen(std::uint64_t seed, const ScreenConfig& config = {});

/// Places an element of the given pixel size at a random free 4-aligned
/// position, keeping a one-cell gap to existing elements. Throws
/// GenerationError after bounded retries.
UiElement& place_element(Screen& screen, CounterRng& rng, ElementKind kind, int glyph, std::string caption,
                         int w_px, int h_px);

bool elements_disjoint(const Screen& screen) noexcept;

}  // namespace sfa
