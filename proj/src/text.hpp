#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace perfloss {

std::string_view trim(std::string_view s);
std::vector<std::string_view> split(std::string_view s, char sep);
/// Whitespace-separated words; double-quoted words may contain spaces.
/// Returns nullopt on an unterminated quote.
std::optional<std::vector<std::string>> tokenize(std::string_view line);
/// Whole-string finite number.
std::optional<double> parse_number(std::string_view s);
/// Round-trip precision.
std::string format_number(double v);
/// Six significant digits.
std::string format_short(double v);

}  // namespace perfloss
