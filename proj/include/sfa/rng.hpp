// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <utility>

namespace sfa {

/// Counter-based splittable generator.
///
/// Output i of a stream with key k is splitmix64_finalize(k + (i + 1) * 0x9E3779B97F4A7C15).
/// A child stream's key is splitmix64_finalize(k ^ splitmix64_finalize(tag + 0xD1B54A32D192ED03)).
/// Everything is integer arithmetic with explicit widths, so sequences are
/// identical across platforms and compilers. uniform() uses the top 53 bits;
/// below(n) uses rejection to stay unbiased; normal() is Box-Muller with the
/// sine branch discarded so each call consumes exactly two outputs.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) noexcept : key_(mix(key)) {}

  static std::uint64_t mix(std::uint64_t z) noexcept {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Independent child stream; split(t) is a pure function of (key, t).
  CounterRng split(std::uint64_t tag) const noexcept {
    CounterRng child(0);
    child.key_ = mix(key_ ^ mix(tag + 0xD1B54A32D192ED03ULL));
    return child;
  }

  std::uint64_t next() noexcept { return mix(key_ + (++counter_) * 0x9E3779B97F4A7C15ULL); }

  double uniform() noexcept { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, n); n must be positive.
  std::uint64_t below(std::uint64_t n) noexcept {
    const std::uint64_t limit = UINT64_MAX - (UINT64_MAX % n);
    std::uint64_t v = next();
    while (v >= limit) v = next();
    return v % n;
  }

  /// Uniform integer in [lo, hi].
  std::int64_t between(std::int64_t lo, std::int64_t hi) noexcept {
    return lo + static_cast<std::int64_t>(below(static_cast<std::uint64_t>(hi - lo) + 1));
  }

  double normal() noexcept;

  template <typename T>
  void shuffle(std::span<T> items) noexcept {
    for (std::size_t i = items.size(); i > 1; --i) {
      const auto j = static_cast<std::size_t>(below(i));
      std::swap(items[i - 1], items[j]);
    }
  }

  std::uint64_t key() const noexcept { return key_; }
  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_ = 0;
};

}  // namespace sfa
