// SPDX-License-Identifier: Apache-2.0
#include "sfa/model/sequence.hpp"

#include <algorithm>

namespace sfa {

std::string_view slot_tag_name(SlotTag t) noexcept {
  switch (t) {
    case SlotTag::Token: return "token";
    case SlotTag::ImagePatch: return "image_patch";
    case SlotTag::LatentThought: return "latent_thought";
    case SlotTag::PerceptionFeature: return "perception_feature";
  }
  return "?";
}

void TokenSequence::push_text(std::string_view text, bool loss) {
  for (char c : text) push_token(static_cast<unsigned char>(c), loss);
}

std::optional<std::size_t> TokenSequence::find(int id, std::size_t from) const noexcept {
  for (std::size_t i = from; i < slots.size(); ++i) {
    if (slots[i].is(id)) return i;
  }
  return std::nullopt;
}

std::size_t TokenSequence::count(int id) const noexcept {
  return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [&](const Slot& s) { return s.is(id); }));
}

std::size_t TokenSequence::count_tag(SlotTag t) const noexcept {
  return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [&](const Slot& s) { return s.tag == t; }));
}

std::size_t TokenSequence::loss_count() const noexcept {
  return static_cast<std::size_t>(std::count_if(slots.begin(), slots.end(), [](const Slot& s) { return s.loss; }));
}

std::string TokenSequence::text() const {
  std::string out;
  for (const auto& s : slots) {
    switch (s.tag) {
      case SlotTag::Token: out += token_text(s.token); break;
      case SlotTag::LatentThought: out += "<latent>"; break;
      default: break;
    }
  }
  return out;
}

}  // namespace sfa
