// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <string>

namespace sfa {

enum class LatentMap { Identity, Linear };
enum class ControlKeys { CtrlOnly, AllThree };

struct ModelConfig {
  int version = 1;
  std::size_t d_model = 64;
  std::size_t n_layers = 3;
  std::size_t n_heads = 4;
  std::size_t max_seq = 1024;
  std::size_t n_latent = 8;
  std::size_t image_size = 64;
  std::size_t coarse_patch = 8;
  std::size_t fine_patch = 4;
  std::size_t m_slots = 4;
  std::size_t d_f = 32;
  /// Side of the square window z_p is mean-pooled over before injection;
  /// 1 injects one slot per fine patch.
  std::size_t perception_pool = 1;
  LatentMap latent_map = LatentMap::Identity;
  ControlKeys control_keys = ControlKeys::CtrlOnly;
  std::uint64_t seed = 1;

  std::size_t d_k() const noexcept { return d_model / n_heads; }
  std::size_t coarse_grid() const noexcept { return image_size / coarse_patch; }
  std::size_t fine_grid() const noexcept { return image_size / fine_patch; }
  std::size_t global_slots() const noexcept { return coarse_grid() * coarse_grid(); }
  std::size_t fine_patches() const noexcept { return fine_grid() * fine_grid(); }
  std::size_t pooled_grid() const noexcept { return fine_grid() / perception_pool; }
  std::size_t perception_slots() const noexcept { return pooled_grid() * pooled_grid(); }

  /// Throws ValidationError when the configuration is inconsistent.
  void validate() const;

  std::string to_json() const;
  static ModelConfig from_json(const std::string& text);
  /// FNV-1a 64 of to_json(); stored in checkpoints.
  std::uint64_t digest() const;
};

}  // namespace sfa
