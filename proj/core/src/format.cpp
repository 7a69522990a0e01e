#include "semprobe/format.hpp"

#include <array>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <system_error>

namespace semprobe {

std::string format_shortest(double value) {
  std::array<char, 64> buffer{};
  auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value);
  if (ec != std::errc{}) return "nan";
  return std::string(buffer.data(), end);
}

std::string format_significant(double value, int digits) {
  std::array<char, 64> buffer{};
  std::snprintf(buffer.data(), buffer.size(), "%.*g", digits, value);
  std::string text(buffer.data());
  if (text == "-0") text = "0";
  return text;
}

namespace {

// Rounds the shortest fixed-notation decimal expansion, so 0.125 -> 0.13 and
// 0.015 -> 0.02 regardless of the binary representation error.
std::string round_decimal_text(double value, int decimals) {
  std::array<char, 400> buffer{};
  auto [end, ec] = std::to_chars(buffer.data(), buffer.data() + buffer.size(), value,
                                 std::chars_format::fixed);
  if (ec != std::errc{}) return "nan";
  std::string text(buffer.data(), end);

  bool negative = !text.empty() && text.front() == '-';
  if (negative) text.erase(0, 1);
  auto dot = text.find('.');
  std::string int_part = dot == std::string::npos ? text : text.substr(0, dot);
  std::string frac_part = dot == std::string::npos ? "" : text.substr(dot + 1);
  frac_part.resize(std::max<std::size_t>(frac_part.size(), decimals + 1), '0');

  std::string digits = int_part + frac_part.substr(0, decimals);
  bool round_up = frac_part[decimals] >= '5';
  if (round_up) {
    int i = static_cast<int>(digits.size()) - 1;
    while (i >= 0) {
      if (digits[i] == '9') {
        digits[i] = '0';
        --i;
      } else {
        ++digits[i];
        break;
      }
    }
    if (i < 0) digits.insert(digits.begin(), '1');
  }
  std::string out_int = digits.substr(0, digits.size() - decimals);
  std::string out_frac = digits.substr(digits.size() - decimals);
  std::string result = out_int;
  if (decimals > 0) result += "." + out_frac;

  bool all_zero = result.find_first_not_of("0.") == std::string::npos;
  if (negative && !all_zero) result.insert(result.begin(), '-');
  return result;
}

}  // namespace

std::string format_fixed(double value, int decimals) {
  if (!std::isfinite(value)) return format_shortest(value);
  return round_decimal_text(value, decimals);
}

std::optional<double> parse_double(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  if (text.front() == '+') text.remove_prefix(1);
  double value = 0.0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::optional<std::uint64_t> parse_uint(std::string_view text) {
  text = trim(text);
  if (text.empty()) return std::nullopt;
  std::uint64_t value = 0;
  auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) return std::nullopt;
  return value;
}

std::vector<std::string_view> split(std::string_view text, char delimiter) {
  std::vector<std::string_view> parts;
  std::size_t start = 0;
  while (true) {
    auto pos = text.find(delimiter, start);
    if (pos == std::string_view::npos) {
      parts.push_back(text.substr(start));
      break;
    }
    parts.push_back(text.substr(start, pos - start));
    start = pos + 1;
  }
  return parts;
}

std::string_view trim(std::string_view text) {
  constexpr std::string_view kSpace = " \t\r\n";
  auto first = text.find_first_not_of(kSpace);
  if (first == std::string_view::npos) return {};
  auto last = text.find_last_not_of(kSpace);
  return text.substr(first, last - first + 1);
}

}  // namespace semprobe
