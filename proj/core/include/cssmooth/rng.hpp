#pragma once

#include <cstdint>
#include <initializer_list>
#include <limits>
#include <string_view>

namespace cssmooth {

/// 64-bit finalizer from SplitMix64.
constexpr std::uint64_t mix64(std::uint64_t z) noexcept {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

/// FNV-1a over a tag, used to turn subsystem names into key material.
constexpr std::uint64_t hash_tag(std::string_view tag) noexcept {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (char c : tag) {
    h ^= static_cast<unsigned char>(c);
    h *= 0x100000001b3ULL;
  }
  return h;
}

/// Keys form a tree: every child key is mix64(parent ^ mix64(component)),
/// applied left to right. A master seed fans out to subsystems via
/// `derive(master, hash_tag("certify"))`, then to example ids, phases, etc.
class RngKey {
 public:
  constexpr RngKey() = default;
  constexpr explicit RngKey(std::uint64_t value) : value_(value) {}

  constexpr RngKey child(std::uint64_t component) const noexcept {
    return RngKey(mix64(value_ ^ mix64(component + 0x632be59bd9b4e019ULL)));
  }
  constexpr RngKey child(std::string_view tag) const noexcept { return child(hash_tag(tag)); }
  constexpr RngKey child(std::initializer_list<std::uint64_t> components) const noexcept {
    RngKey k = *this;
    for (auto c : components) k = k.child(c);
    return k;
  }

  constexpr std::uint64_t value() const noexcept { return value_; }
  constexpr bool operator==(const RngKey&) const = default;

 private:
  std::uint64_t value_ = 0;
};

/// Counter-based generator: the i-th output is a pure function of (key, i),
/// so streams can be split, replayed, and evaluated in any order.
/// Satisfies UniformRandomBitGenerator for use with <random> distributions.
class CounterRng {
 public:
  using result_type = std::uint64_t;

  explicit CounterRng(RngKey key, std::uint64_t start = 0) : key_(key.value()), counter_(start) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

  result_type operator()() noexcept { return mix64(key_ ^ mix64(counter_++ ^ 0x2545f4914f6cdd1dULL)); }

  std::uint64_t counter() const noexcept { return counter_; }

 private:
  std::uint64_t key_;
  std::uint64_t counter_;
};

}  // namespace cssmooth
