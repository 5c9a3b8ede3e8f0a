// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "sfa/sim/episode.hpp"

namespace sfa {

/// Relative template weights, indexed like kAllTemplates.
struct TemplateMix {
  std::array<double, 4> weights = {0.45, 0.25, 0.25, 0.05};

  /// "tap_target=0.5,scroll_then_tap=0.5"; unnamed templates get weight 0.
  static TemplateMix parse(std::string_view spec);
  std::string str() const;
};

struct CorpusManifest {
  int format_version = 1;
  std::uint64_t seed = 0;
  std::size_t episodes = 0;
  TemplateMix mix;
  std::array<std::size_t, 4> template_counts{};
  std::size_t steps = 0;
  std::size_t slow_steps = 0;
  std::size_t fast_steps = 0;
  std::string corpus_hash;  // over the JSONL bytes
  std::string pixels_hash;  // over the pixel blob bytes
};

struct Corpus {
  std::vector<Episode> episodes;
  CorpusManifest manifest;
};

/// Exact per-template counts for n episodes by largest remainder.
std::array<std::size_t, 4> allocate_counts(std::size_t n, const TemplateMix& mix);

/// Episode i depends only on (seed, i) and its template slot, so shards can
/// be generated independently and concatenated.
Corpus generate_corpus(std::uint64_t seed, std::size_t n, const TemplateMix& mix = {});

/// Content hash (hex FNV-1a 64) of a screen's dimensions and pixels.
std::string pixels_ref(const Screen& screen);

struct PixelImage {
  int width = 0;
  int height = 0;
  std::vector<std::uint8_t> pixels;
};

/// Content-addressed pixel store, serialized as the sidecar blob
/// ("SFAPIX01", u32 count, then per image u64 hash, u32 w, u32 h, bytes).
class PixelStore {
 public:
  /// Returns the reference; identical images are stored once.
  std::string add(const Screen& screen);
  const PixelImage& at(const std::string& ref) const;
  bool contains(const std::string& ref) const { return images_.count(ref) != 0; }
  std::size_t size() const noexcept { return order_.size(); }

  std::vector<std::uint8_t> encode() const;
  static PixelStore decode(const std::vector<std::uint8_t>& blob);

 private:
  std::map<std::string, PixelImage> images_;
  std::vector<std::string> order_;
};

struct SerializedCorpus {
  std::string jsonl;
  std::vector<std::uint8_t> pixels;
  std::string manifest_json;
};

/// Binary PPM (P6, maxval 255).
void write_ppm(const std::filesystem::path& path, const PixelImage& image);
PixelImage read_ppm(const std::filesystem::path& path);

/// The episodes covering the first n steps; the last one may be cut short.
std::vector<Episode> first_steps(std::span<const Episode> episodes, std::size_t n);

SerializedCorpus serialize_corpus(const Corpus& corpus);
Corpus parse_corpus(const std::string& jsonl, const std::vector<std::uint8_t>& pixel_blob);

/// Writes corpus.jsonl, pixels.bin and manifest.json into dir.
void write_corpus(const std::filesystem::path& dir, const Corpus& corpus);
Corpus read_corpus(const std::filesystem::path& dir);

std::string manifest_to_json(const CorpusManifest& m);

}  // namespace sfa
