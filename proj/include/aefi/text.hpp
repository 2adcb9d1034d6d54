#pragma once

#include <optional>
#include <string>
#include <string_view>

namespace aefi {

std::string_view trim(std::string_view s);

/// Whole-string parse of a finite decimal number; surrounding blanks allowed.
std::optional<double> parse_number(std::string_view s);

/// Shortest decimal text that parses back to exactly `value`.
std::string format_number(double value);

/// Fixed-point rendering with `digits` decimals.
std::string format_fixed(double value, int digits);

}  // namespace aefi
