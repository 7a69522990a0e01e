#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace semprobe {

/// Shortest decimal text that parses back to the same double.
std::string format_shortest(double value);

/// printf "%.<digits>g".
std::string format_significant(double value, int digits = 6);

/// Fixed-point text after rounding half away from zero; never prints "-0.00".
std::string format_fixed(double value, int decimals = 2);

/// Whole-string parse; nullopt on trailing garbage or empty input.
std::optional<double> parse_double(std::string_view text);
std::optional<std::uint64_t> parse_uint(std::string_view text);

std::vector<std::string_view> split(std::string_view text, char delimiter);
std::string_view trim(std::string_view text);

}  // namespace semprobe
