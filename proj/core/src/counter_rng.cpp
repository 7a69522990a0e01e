#include "semprobe/counter_rng.hpp"

#include <bit>
#include <cstring>

namespace semprobe {

std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t CounterRng::bits(std::uint64_t counter) const noexcept {
  // Two rounds so that neighbouring keys and counters decorrelate.
  return splitmix64(splitmix64(key_ ^ splitmix64(counter)) + counter);
}

double CounterRng::uniform(std::uint64_t counter) const noexcept {
  return static_cast<double>(bits(counter) >> 11) * 0x1.0p-53;
}

void KeyHasher::mix_byte(unsigned char byte) noexcept {
  state_ ^= byte;
  state_ *= 0x100000001b3ULL;
}

KeyHasher& KeyHasher::add(std::uint64_t value) noexcept {
  mix_byte('u');
  for (int i = 0; i < 8; ++i) mix_byte(static_cast<unsigned char>(value >> (8 * i)));
  return *this;
}

KeyHasher& KeyHasher::add(double value) noexcept {
  if (value == 0.0) value = 0.0;  // fold -0
  mix_byte('d');
  auto raw = std::bit_cast<std::uint64_t>(value);
  for (int i = 0; i < 8; ++i) mix_byte(static_cast<unsigned char>(raw >> (8 * i)));
  return *this;
}

KeyHasher& KeyHasher::add(std::string_view value) noexcept {
  mix_byte('s');
  add(static_cast<std::uint64_t>(value.size()));
  for (char c : value) mix_byte(static_cast<unsigned char>(c));
  return *this;
}

}  // namespace semprobe
