// SPDX-License-Identifier: Apache-2.0
#include "sfa/model/vocab.hpp"

#include "sfa/errors.hpp"

namespace sfa {

std::string_view special_name(int id) {
  if (!is_special(id)) throw ValidationError("token " + std::to_string(id) + " is not a special token");
  return kSpecialNames[static_cast<std::size_t>(id - 256)];
}

std::optional<int> special_from_name(std::string_view name) noexcept {
  for (std::size_t i = 0; i < kSpecialNames.size(); ++i) {
    if (kSpecialNames[i] == name) return static_cast<int>(256 + i);
  }
  return std::nullopt;
}

std::vector<int> encode_bytes(std::string_view text) {
  std::vector<int> out;
  out.reserve(text.size());
  for (char c : text) out.push_back(static_cast<unsigned char>(c));
  return out;
}

std::string token_text(int id) {
  if (id >= 0 && id < 256) return std::string(1, static_cast<char>(id));
  return std::string(special_name(id));
}

}  // namespace sfa
