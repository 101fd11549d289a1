#pragma once

#include <cstddef>
#include <optional>
#include <string>
#include <string_view>

namespace overprec {

std::string_view trim(std::string_view text);

struct NumberMatch {
  double value = 0.0;
  std::size_t length = 0;  // characters consumed from the match position
  bool finite = true;      // false when the literal overflows a double
};

/// Matches a numeric literal starting exactly at `pos`.
///
/// Accepted grammar: optional sign, digits (optionally grouped in threes by
/// commas, e.g. "3,000,000"), optional fraction, optional exponent. Decimal
/// point is always '.', regardless of the process locale. A comma only acts
/// as a thousands separator when followed by exactly three digits.
std::optional<NumberMatch> match_number(std::string_view text, std::size_t pos);

/// Parses a string that must be a bare number in its entirety (surrounding
/// whitespace allowed). Returns nullopt for anything else, including
/// non-finite results.
std::optional<double> parse_number(std::string_view text);

/// Shortest decimal representation that parses back to the same double.
std::string format_number(double value);

}  // namespace overprec
