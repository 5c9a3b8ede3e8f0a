// SPDX-License-Identifier: Apache-2.0
#include "sfa/sim/corpus.hpp"

#include <algorithm>
#include <cstring>
#include <sstream>

#include "json.hpp"
#include "sfa/action/codec.hpp"
#include "sfa/errors.hpp"
#include "sfa/io.hpp"
#include "sfa/rng.hpp"
#include "sfa/tensor/checkpoint.hpp"

namespace sfa {

using ojson = nlohmann::ordered_json;

TemplateMix TemplateMix::parse(std::string_view spec) {
  TemplateMix m;
  m.weights = {0, 0, 0, 0};
  std::string item;
  std::stringstream ss{std::string(spec)};
  while (std::getline(ss, item, ',')) {
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ValidationError("mix entry '" + item + "' is not name=weight");
    const auto t = template_from_name(item.substr(0, eq));
    if (!t) throw ValidationError("unknown template '" + item.substr(0, eq) + "' in mix");
    double w = 0;
    try {
      w = std::stod(item.substr(eq + 1));
    } catch (const std::exception&) {
      throw ValidationError("bad weight in mix entry '" + item + "'");
    }
    if (!(w >= 0)) throw ValidationError("mix weights must be non-negative");
    m.weights[static_cast<std::size_t>(*t)] = w;
  }
  double total = 0;
  for (double w : m.weights) total += w;
  if (!(total > 0)) throw ValidationError("mix weights sum to zero");
  return m;
}

std::string TemplateMix::str() const {
  std::string out;
  for (auto t : kAllTemplates) {
    if (!out.empty()) out += ',';
    std::ostringstream w;
    w << weights[static_cast<std::size_t>(t)];
    out += std::string(template_name(t)) + "=" + w.str();
  }
  return out;
}

std::array<std::size_t, 4> allocate_counts(std::size_t n, const TemplateMix& mix) {
  double total = 0;
  for (double w : mix.weights) total += w;
  if (!(total > 0)) throw ValidationError("mix weights sum to zero");
  std::array<std::size_t, 4> counts{};
  std::array<double, 4> rem{};
  std::size_t used = 0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double exact = static_cast<double>(n) * mix.weights[i] / total;
    counts[i] = static_cast<std::size_t>(exact);
    rem[i] = exact - static_cast<double>(counts[i]);
    used += counts[i];
  }
  while (used < n) {
    std::size_t best = 0;
    for (std::size_t i = 1; i < 4; ++i) {
      if (rem[i] > rem[best]) best = i;
    }
    ++counts[best];
    rem[best] = -1;
    ++used;
  }
  return counts;
}

Corpus generate_corpus(std::uint64_t seed, std::size_t n, const TemplateMix& mix) {
  if (n == 0) throw ValidationError("corpus size must be at least 1");
  const auto counts = allocate_counts(n, mix);
  std::vector<TaskTemplate> slots;
  for (std::size_t t = 0; t < 4; ++t) slots.insert(slots.end(), counts[t], kAllTemplates[t]);
  const CounterRng root(seed);
  CounterRng order = root.split(0x6f72646572ULL);
  order.shuffle(std::span<TaskTemplate>(slots));

  Corpus c;
  c.episodes.reserve(n);
  const CounterRng episodes = root.split(0x6570697364ULL);
  for (std::size_t i = 0; i < n; ++i) {
    CounterRng r = episodes.split(i);
    c.episodes.push_back(generate_episode(r.next(), slots[i]));
  }
  auto& m = c.manifest;
  m.seed = seed;
  m.episodes = n;
  m.mix = mix;
  m.template_counts = counts;
  for (const auto& e : c.episodes) {
    for (const auto& s : e.steps) {
      ++m.steps;
      ++(classify_perception(s.action) == PathLabel::Slow ? m.slow_steps : m.fast_steps);
    }
  }
  const auto ser = serialize_corpus(c);
  m.corpus_hash = hex64(fnv1a64(ser.jsonl.data(), ser.jsonl.size()));
  m.pixels_hash = hex64(fnv1a64(ser.pixels.data(), ser.pixels.size()));
  return c;
}

std::string pixels_ref(const Screen& s) {
  std::uint32_t dims[2] = {static_cast<std::uint32_t>(s.width), static_cast<std::uint32_t>(s.height)};
  const auto h = fnv1a64(dims, sizeof dims);
  return hex64(fnv1a64(s.pixels.data(), s.pixels.size(), h));
}

std::string PixelStore::add(const Screen& s) {
  auto ref = pixels_ref(s);
  if (!images_.count(ref)) {
    images_.emplace(ref, PixelImage{s.width, s.height, s.pixels});
    order_.push_back(ref);
  }
  return ref;
}

const PixelImage& PixelStore::at(const std::string& ref) const {
  auto it = images_.find(ref);
  if (it == images_.end()) throw DataError("pixel blob has no image " + ref);
  return it->second;
}

namespace {

constexpr char kPixMagic[8] = {'S', 'F', 'A', 'P', 'I', 'X', '0', '1'};

template <typename T>
void put(std::vector<std::uint8_t>& out, T v) {
  for (std::size_t i = 0; i < sizeof(T); ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xff));
}

template <typename T>
T get(const std::vector<std::uint8_t>& in, std::size_t& pos) {
  if (pos + sizeof(T) > in.size()) throw DataError("pixel blob truncated at byte " + std::to_string(pos));
  T v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) v |= static_cast<T>(static_cast<T>(in[pos + i]) << (8 * i));
  pos += sizeof(T);
  return v;
}

}  // namespace

std::vector<std::uint8_t> PixelStore::encode() const {
  std::vector<std::uint8_t> out(kPixMagic, kPixMagic + 8);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(order_.size()));
  for (const auto& ref : order_) {
    const auto& img = images_.at(ref);
    put<std::uint64_t>(out, std::stoull(ref, nullptr, 16));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(img.width));
    put<std::uint32_t>(out, static_cast<std::uint32_t>(img.height));
    out.insert(out.end(), img.pixels.begin(), img.pixels.end());
  }
  return out;
}

PixelStore PixelStore::decode(const std::vector<std::uint8_t>& blob) {
  if (blob.size() < 12 || std::memcmp(blob.data(), kPixMagic, 8) != 0) throw DataError("not a pixel blob");
  std::size_t pos = 8;
  const auto count = get<std::uint32_t>(blob, pos);
  PixelStore store;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto ref = hex64(get<std::uint64_t>(blob, pos));
    Screen s;
    s.width = static_cast<int>(get<std::uint32_t>(blob, pos));
    s.height = static_cast<int>(get<std::uint32_t>(blob, pos));
    const auto n = static_cast<std::size_t>(s.width) * static_cast<std::size_t>(s.height) * 3;
    if (pos + n > blob.size()) throw DataError("pixel blob truncated in image " + ref);
    s.pixels.assign(blob.begin() + static_cast<std::ptrdiff_t>(pos), blob.begin() + static_cast<std::ptrdiff_t>(pos + n));
    pos += n;
    if (pixels_ref(s) != ref) throw DataError("pixel blob image " + ref + " fails its content hash");
    store.add(s);
  }
  if (pos != blob.size()) throw DataError("trailing bytes in pixel blob");
  return store;
}

SerializedCorpus serialize_corpus(const Corpus& c) {
  SerializedCorpus out;
  PixelStore store;
  for (const auto& e : c.episodes) {
    ojson rec;
    rec["seed"] = e.seed;
    rec["template"] = template_name(e.task);
    rec["goal"] = e.goal;
    ojson steps = ojson::array();
    for (const auto& st : e.steps) {
      ojson els = ojson::array();
      for (const auto& el : st.screen.elements) {
        els.push_back({{"id", el.id},
                       {"kind", element_kind_name(el.kind)},
                       {"bbox", {el.bbox.x0, el.bbox.y0, el.bbox.x1, el.bbox.y1}},
                       {"glyph", el.glyph},
                       {"caption", el.caption}});
      }
      ojson screen = {{"width", st.screen.width},
                      {"height", st.screen.height},
                      {"elements", std::move(els)},
                      {"pixels_ref", store.add(st.screen)}};
      steps.push_back({{"screen", std::move(screen)}, {"action_text", serialize_action(st.action)}});
    }
    rec["steps"] = std::move(steps);
    out.jsonl += rec.dump();
    out.jsonl += '\n';
  }
  out.pixels = store.encode();
  out.manifest_json = manifest_to_json(c.manifest);
  return out;
}

Corpus parse_corpus(const std::string& jsonl, const std::vector<std::uint8_t>& blob) {
  const auto store = PixelStore::decode(blob);
  Corpus c;
  std::istringstream in(jsonl);
  std::string line;
  std::size_t index = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    try {
      const auto rec = ojson::parse(line);
      Episode e;
      e.seed = rec.at("seed").get<std::uint64_t>();
      const auto t = template_from_name(rec.at("template").get<std::string>());
      if (!t) throw DataError("unknown template");
      e.task = *t;
      e.goal = rec.at("goal").get<std::string>();
      for (const auto& st : rec.at("steps")) {
        EpisodeStep step;
        const auto& sc = st.at("screen");
        step.screen.width = sc.at("width").get<int>();
        step.screen.height = sc.at("height").get<int>();
        for (const auto& el : sc.at("elements")) {
          UiElement u;
          u.id = el.at("id").get<int>();
          const auto kind = element_kind_from_name(el.at("kind").get<std::string>());
          if (!kind) throw DataError("unknown element kind");
          u.kind = *kind;
          const auto& b = el.at("bbox");
          u.bbox = {b.at(0).get<double>(), b.at(1).get<double>(), b.at(2).get<double>(), b.at(3).get<double>()};
          u.glyph = el.at("glyph").get<int>();
          u.caption = el.at("caption").get<std::string>();
          step.screen.elements.push_back(std::move(u));
        }
        const auto& img = store.at(sc.at("pixels_ref").get<std::string>());
        if (img.width != step.screen.width || img.height != step.screen.height) {
          throw DataError("pixel dimensions disagree with the screen record");
        }
        step.screen.pixels = img.pixels;
        step.action = parse_action(st.at("action_text").get<std::string>());
        e.steps.push_back(std::move(step));
      }
      c.episodes.push_back(std::move(e));
    } catch (const nlohmann::json::exception& ex) {
      throw DataError("corpus record " + std::to_string(index) + ": " + ex.what());
    } catch (const ValidationError& ex) {
      throw DataError("corpus record " + std::to_string(index) + ": " + ex.what());
    }
    ++index;
  }
  return c;
}

std::string manifest_to_json(const CorpusManifest& m) {
  ojson j;
  j["format_version"] = m.format_version;
  j["seed"] = m.seed;
  j["episodes"] = m.episodes;
  ojson mix, counts;
  for (auto t : kAllTemplates) {
    mix[std::string(template_name(t))] = m.mix.weights[static_cast<std::size_t>(t)];
    counts[std::string(template_name(t))] = m.template_counts[static_cast<std::size_t>(t)];
  }
  j["mix"] = mix;
  j["template_counts"] = counts;
  j["steps"] = m.steps;
  j["labels"] = {{"Slow", m.slow_steps}, {"Fast", m.fast_steps}};
  j["corpus_hash"] = m.corpus_hash;
  j["pixels_hash"] = m.pixels_hash;
  return j.dump(2) + "\n";
}

void write_corpus(const std::filesystem::path& dir, const Corpus& c) {
  const auto ser = serialize_corpus(c);
  write_file_text(dir / "corpus.jsonl", ser.jsonl);
  write_file_bytes(dir / "pixels.bin", ser.pixels.data(), ser.pixels.size());
  write_file_text(dir / "manifest.json", ser.manifest_json);
}

Corpus read_corpus(const std::filesystem::path& dir) {
  auto c = parse_corpus(read_file_text(dir / "corpus.jsonl"), read_file_bytes(dir / "pixels.bin"));
  if (std::filesystem::exists(dir / "manifest.json")) {
    try {
      const auto j = ojson::parse(read_file_text(dir / "manifest.json"));
      auto& m = c.manifest;
      m.format_version = j.at("format_version").get<int>();
      m.seed = j.at("seed").get<std::uint64_t>();
      m.episodes = j.at("episodes").get<std::size_t>();
      for (auto t : kAllTemplates) {
        const auto name = std::string(template_name(t));
        m.mix.weights[static_cast<std::size_t>(t)] = j.at("mix").at(name).get<double>();
        m.template_counts[static_cast<std::size_t>(t)] = j.at("template_counts").at(name).get<std::size_t>();
      }
      m.steps = j.at("steps").get<std::size_t>();
      m.slow_steps = j.at("labels").at("Slow").get<std::size_t>();
      m.fast_steps = j.at("labels").at("Fast").get<std::size_t>();
      m.corpus_hash = j.at("corpus_hash").get<std::string>();
      m.pixels_hash = j.at("pixels_hash").get<std::string>();
    } catch (const nlohmann::json::exception& ex) {
      throw DataError(std::string("manifest: ") + ex.what());
    }
  }
  return c;
}

void write_ppm(const std::filesystem::path& path, const PixelImage& image) {
  const std::string header = "P6\n" + std::to_string(image.width) + " " + std::to_string(image.height) + "\n255\n";
  std::vector<std::uint8_t> bytes(header.begin(), header.end());
  bytes.insert(bytes.end(), image.pixels.begin(), image.pixels.end());
  write_file_bytes(path, bytes.data(), bytes.size());
}

PixelImage read_ppm(const std::filesystem::path& path) {
  const auto bytes = read_file_bytes(path);
  std::size_t pos = 0;
  // Header tokens are separated by whitespace; '#' starts a comment line.
  auto token = [&]() {
    std::string t;
    while (pos < bytes.size()) {
      const char c = static_cast<char>(bytes[pos]);
      if (c == '#') {
        while (pos < bytes.size() && bytes[pos] != '\n') ++pos;
      } else if (std::isspace(static_cast<unsigned char>(c))) {
        if (!t.empty()) break;
        ++pos;
      } else {
        t += c;
        ++pos;
      }
    }
    return t;
  };
  const auto bad = [&](const std::string& why) { return ValidationError(path.string() + ": " + why); };
  if (token() != "P6") throw bad("not a binary PPM (P6)");
  PixelImage img;
  try {
    img.width = std::stoi(token());
    img.height = std::stoi(token());
    if (std::stoi(token()) != 255) throw bad("maxval must be 255");
  } catch (const std::logic_error&) {
    throw bad("malformed header");
  }
  if (img.width <= 0 || img.height <= 0) throw bad("bad dimensions");
  ++pos;  // single whitespace byte before the raster
  const auto n = static_cast<std::size_t>(img.width) * static_cast<std::size_t>(img.height) * 3;
  if (bytes.size() < pos + n) throw bad("truncated raster");
  img.pixels.assign(bytes.begin() + static_cast<std::ptrdiff_t>(pos), bytes.begin() + static_cast<std::ptrdiff_t>(pos + n));
  return img;
}

std::vector<Episode> first_steps(std::span<const Episode> episodes, std::size_t n) {
  std::vector<Episode> out;
  std::size_t have = 0;
  for (const auto& e : episodes) {
    if (have >= n) break;
    out.push_back(e);
    if (have + e.steps.size() > n) out.back().steps.resize(n - have);
    have += out.back().steps.size();
  }
  return out;
}

}  // namespace sfa
