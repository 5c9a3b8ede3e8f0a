// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace sfa {

// All of these throw ValidationError when the file cannot be opened.
std::vector<std::uint8_t> read_file_bytes(const std::filesystem::path& path);
std::string read_file_text(const std::filesystem::path& path);
/// Creates parent directories as needed.
void write_file_bytes(const std::filesystem::path& path, const void* data, std::size_t size);
void write_file_text(const std::filesystem::path& path, const std::string& text);

}  // namespace sfa
