// SPDX-License-Identifier: Apache-2.0
#include "sfa/tensor/checkpoint.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <iterator>

#include "sfa/errors.hpp"

namespace sfa {

namespace {

constexpr char kMagic[8] = {'S', 'F', 'A', 'C', 'K', 'P', 'T', '\0'};

template <typename U>
void put(std::vector<std::uint8_t>& out, U v) {
  for (std::size_t i = 0; i < sizeof(U); ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
}

class Reader {
 public:
  explicit Reader(const std::vector<std::uint8_t>& b) : b_(b) {}

  template <typename U>
  U get() {
    need(sizeof(U));
    U v = 0;
    for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b_[pos_ + i]) << (8 * i);
    pos_ += sizeof(U);
    return v;
  }

  std::string bytes(std::size_t n) {
    need(n);
    std::string s(reinterpret_cast<const char*>(b_.data() + pos_), n);
    pos_ += n;
    return s;
  }

  bool done() const { return pos_ == b_.size(); }

 private:
  void need(std::size_t n) const {
    if (pos_ + n > b_.size()) throw ValidationError("checkpoint truncated at byte " + std::to_string(pos_));
  }
  const std::vector<std::uint8_t>& b_;
  std::size_t pos_ = 0;
};

}  // namespace

std::uint64_t fnv1a64(const void* data, std::size_t size, std::uint64_t seed) {
  std::uint64_t h = seed;
  const auto* p = static_cast<const std::uint8_t*>(data);
  for (std::size_t i = 0; i < size; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string hex64(std::uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

std::vector<std::uint8_t> encode_checkpoint(const Checkpoint& ckpt) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put<std::uint32_t>(out, ckpt.format_version);
  put<std::uint64_t>(out, ckpt.config_digest);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(ckpt.entries.size()));
  for (const auto& e : ckpt.entries) {
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.name.size()));
    out.insert(out.end(), e.name.begin(), e.name.end());
    put<std::uint32_t>(out, static_cast<std::uint32_t>(e.value.rank()));
    for (auto d : e.value.shape()) put<std::uint64_t>(out, d);
    for (double v : e.value.data()) put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(v));
  }
  return out;
}

Checkpoint decode_checkpoint(const std::vector<std::uint8_t>& bytes) {
  Reader r(bytes);
  if (r.bytes(8) != std::string(kMagic, 8)) throw ValidationError("not a checkpoint file (bad magic)");
  Checkpoint ckpt;
  ckpt.format_version = r.get<std::uint32_t>();
  if (ckpt.format_version != kCheckpointVersion) {
    throw ValidationError("unsupported checkpoint version " + std::to_string(ckpt.format_version));
  }
  ckpt.config_digest = r.get<std::uint64_t>();
  const auto count = r.get<std::uint32_t>();
  for (std::uint32_t i = 0; i < count; ++i) {
    CheckpointEntry e;
    e.name = r.bytes(r.get<std::uint32_t>());
    const auto rank = r.get<std::uint32_t>();
    Shape shape(rank);
    for (auto& d : shape) d = r.get<std::uint64_t>();
    std::vector<double> data(shape_numel(shape));
    for (auto& v : data) v = std::bit_cast<double>(r.get<std::uint64_t>());
    e.value = Tensor(std::move(shape), std::move(data));
    ckpt.entries.push_back(std::move(e));
  }
  if (!r.done()) throw ValidationError("trailing bytes after checkpoint payload");
  return ckpt;
}

Checkpoint checkpoint_from(const ParameterSet& params, std::uint64_t config_digest) {
  Checkpoint ckpt;
  ckpt.config_digest = config_digest;
  for (const auto& p : params.items()) ckpt.entries.push_back({p.name, p.var.value()});
  return ckpt;
}

void restore_checkpoint(const Checkpoint& ckpt, ParameterSet& params, std::uint64_t expected_digest) {
  if (ckpt.config_digest != expected_digest) {
    throw ValidationError("checkpoint config digest " + hex64(ckpt.config_digest) +
                          " does not match model config " + hex64(expected_digest));
  }
  if (ckpt.entries.size() != params.size()) throw ValidationError("checkpoint parameter count mismatch");
  for (const auto& e : ckpt.entries) {
    auto& p = params.at(e.name);
    if (p.var.shape() != e.value.shape()) {
      throw ValidationError("checkpoint shape mismatch for '" + e.name + "'");
    }
    p.var.mutable_value() = e.value;
  }
}

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  const auto bytes = encode_checkpoint(ckpt);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw ValidationError("cannot write checkpoint " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ValidationError("cannot read checkpoint " + path.string());
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace sfa
