// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "sfa/model/vocab.hpp"
#include "sfa/sim/corpus.hpp"
#include "sfa/tensor/tensor.hpp"

namespace sfa {

enum class SlotTag : std::uint8_t { Token, ImagePatch, LatentThought, PerceptionFeature };

std::string_view slot_tag_name(SlotTag t) noexcept;

/// One sequence position: a discrete token, or a continuous slot. A
/// continuous slot either carries its embedding or is a placeholder whose
/// embedding the model computes in-graph (image slots from the pixels, latent
/// slots from the previous hidden state, perception slots from h_ctrl).
struct Slot {
  SlotTag tag = SlotTag::Token;
  int token = -1;         // vocabulary id when tag == Token
  std::size_t index = 0;  // patch index for image / perception slots
  std::optional<Tensor> embedding;
  bool loss = false;  // this slot is a prediction target of the previous position

  static Slot tokenized(int id, bool loss = false) { return {SlotTag::Token, id, 0, std::nullopt, loss}; }
  static Slot image(std::size_t i) { return {SlotTag::ImagePatch, tok::kImage, i, std::nullopt, false}; }
  static Slot latent() { return {SlotTag::LatentThought, tok::kLatent, 0, std::nullopt, false}; }
  static Slot perception(std::size_t i) {
    return {SlotTag::PerceptionFeature, tok::kDetectionImage, i, std::nullopt, false};
  }
  bool is_token() const noexcept { return tag == SlotTag::Token; }
  bool is(int id) const noexcept { return tag == SlotTag::Token && token == id; }
};

struct TokenSequence {
  std::vector<Slot> slots;
  std::shared_ptr<const PixelImage> image;  // screen behind image and perception slots

  std::size_t size() const noexcept { return slots.size(); }
  void push_token(int id, bool loss = false) { slots.push_back(Slot::tokenized(id, loss)); }
  void push_text(std::string_view text, bool loss = false);

  /// First position holding the token, if any.
  std::optional<std::size_t> find(int id, std::size_t from = 0) const noexcept;
  std::size_t count(int id) const noexcept;
  std::size_t count_tag(SlotTag t) const noexcept;
  std::size_t loss_count() const noexcept;

  /// Canonical text: bytes verbatim, specials by name, latent slots as
  /// <latent>. Image and perception slots are elided; the <image> and
  /// <detection_image> marker tokens in front of them stay.
  std::string text() const;
};

}  // namespace sfa
