// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace sfa {

/// Byte-level vocabulary: ids 0..255 are raw bytes, specials follow.
namespace tok {
inline constexpr int kBot = 256;
inline constexpr int kEot = 257;
inline constexpr int kLatent = 258;
inline constexpr int kBop = 259;
inline constexpr int kCtrl = 260;
inline constexpr int kEop = 261;
inline constexpr int kImage = 262;
inline constexpr int kDetectionImage = 263;
inline constexpr int kUser = 264;
inline constexpr int kAssistant = 265;
inline constexpr int kPad = 266;
inline constexpr int kEos = 267;
}  // namespace tok

inline constexpr int kVocabSize = 268;

inline constexpr std::array<std::string_view, 12> kSpecialNames = {
    "<bot>", "<eot>", "<latent>", "<bop>", "<ctrl>", "<eop>", "<image>", "<detection_image>", "<user>", "<assistant>",
    "<pad>", "<eos>"};

inline bool is_special(int id) noexcept { return id >= 256 && id < kVocabSize; }
std::string_view special_name(int id);
std::optional<int> special_from_name(std::string_view name) noexcept;

/// Bytes of `text` as token ids.
std::vector<int> encode_bytes(std::string_view text);
/// Canonical text of one token: the byte itself or the special's name.
std::string token_text(int id);

}  // namespace sfa
