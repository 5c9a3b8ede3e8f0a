// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sfa/tensor/autograd.hpp"

namespace sfa {

/// Binary layout (all integers and doubles little-endian):
///   "SFACKPT\0" | u32 format_version | u64 config_digest | u32 count
///   count x { u32 name_len | name bytes | u32 rank | rank x u64 dim | numel x f64 }
inline constexpr std::uint32_t kCheckpointVersion = 1;

struct CheckpointEntry {
  std::string name;
  Tensor value;
};

struct Checkpoint {
  std::uint32_t format_version = kCheckpointVersion;
  std::uint64_t config_digest = 0;
  std::vector<CheckpointEntry> entries;
};

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt);
Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes);

Checkpoint checkpoint_from(const ParameterSet& params, std::uint64_t config_digest);
/// Copies values into an existing parameter set; names and shapes must match
/// exactly, and the digest must equal `expected_digest`.
void restore_checkpoint(const Checkpoint& ckpt, ParameterSet& params, std::uint64_t expected_digest);

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt);
Checkpoint load_checkpoint(const std::filesystem::path& path);

/// 64-bit FNV-1a, used for config digests and content addressing.
std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed = 0xcbf29ce484222325ULL);
std::string hex64(std::uint64_t v);

}  // namespace sfa
