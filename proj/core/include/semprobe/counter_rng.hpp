#pragma once

#include <cstdint>
#include <string_view>

namespace semprobe {

/// Counter-based generator: draw i of a stream is a pure function of
/// (key, i), so draws do not depend on evaluation order or thread count.
class CounterRng {
 public:
  explicit CounterRng(std::uint64_t key) : key_(key) {}

  std::uint64_t key() const noexcept { return key_; }

  std::uint64_t bits(std::uint64_t counter) const noexcept;

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform(std::uint64_t counter) const noexcept;

 private:
  std::uint64_t key_;
};

std::uint64_t splitmix64(std::uint64_t x) noexcept;

/// Order-sensitive key builder (FNV-1a over tagged fields, finalized with
/// splitmix64).
class KeyHasher {
 public:
  KeyHasher& add(std::uint64_t value) noexcept;
  KeyHasher& add(double value) noexcept;
  KeyHasher& add(std::string_view value) noexcept;

  std::uint64_t finish() const noexcept { return splitmix64(state_); }

 private:
  void mix_byte(unsigned char byte) noexcept;

  std::uint64_t state_ = 0xcbf29ce484222325ULL;
};

}  // namespace semprobe
