#include "overprec/numeric.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <system_error>

namespace overprec {
namespace {

bool is_digit(char c) { return c >= '0' && c <= '9'; }

std::size_t count_digits(std::string_view text, std::size_t pos) {
  std::size_t n = 0;
  while (pos + n < text.size() && is_digit(text[pos + n])) ++n;
  return n;
}

}  // namespace

std::string_view trim(std::string_view text) {
  std::size_t begin = 0;
  std::size_t end = text.size();
  while (begin < end && std::isspace(static_cast<unsigned char>(text[begin]))) ++begin;
  while (end > begin && std::isspace(static_cast<unsigned char>(text[end - 1]))) --end;
  return text.substr(begin, end - begin);
}

std::optional<NumberMatch> match_number(std::string_view text, std::size_t pos) {
  if (pos >= text.size()) return std::nullopt;
  std::size_t i = pos;
  bool negative = false;
  if (text[i] == '+' || text[i] == '-') {
    negative = text[i] == '-';
    ++i;
  }

  std::string cleaned;
  if (negative) cleaned.push_back('-');

  const std::size_t lead = count_digits(text, i);
  std::size_t mantissa_digits = lead;
  cleaned.append(text.substr(i, lead));
  i += lead;

  // Thousands groups: only when the leading group is 1-3 digits long.
  if (lead >= 1 && lead <= 3) {
    while (i < text.size() && text[i] == ',' && count_digits(text, i + 1) == 3) {
      cleaned.append(text.substr(i + 1, 3));
      mantissa_digits += 3;
      i += 4;
    }
  }

  if (i < text.size() && text[i] == '.') {
    const std::size_t frac = count_digits(text, i + 1);
    if (frac > 0 || mantissa_digits > 0) {
      if (frac > 0) {
        cleaned.push_back('.');
        cleaned.append(text.substr(i + 1, frac));
      }
      mantissa_digits += frac;
      i += 1 + frac;
    }
  }
  if (mantissa_digits == 0) return std::nullopt;

  if (i < text.size() && (text[i] == 'e' || text[i] == 'E')) {
    std::size_t j = i + 1;
    std::string exponent = "e";
    if (j < text.size() && (text[j] == '+' || text[j] == '-')) {
      exponent.push_back(text[j]);
      ++j;
    }
    const std::size_t exp_digits = count_digits(text, j);
    if (exp_digits > 0) {
      exponent.append(text.substr(j, exp_digits));
      cleaned += exponent;
      i = j + exp_digits;
    }
  }

  NumberMatch match;
  match.length = i - pos;
  const char* first = cleaned.data();
  const char* last = cleaned.data() + cleaned.size();
  auto [ptr, ec] = std::from_chars(first, last, match.value, std::chars_format::general);
  if (ec == std::errc::result_out_of_range) {
    match.finite = false;
    match.value = negative ? -HUGE_VAL : HUGE_VAL;
  } else if (ec != std::errc() || ptr != last) {
    return std::nullopt;
  }
  if (!std::isfinite(match.value)) match.finite = false;
  return match;
}

std::optional<double> parse_number(std::string_view text) {
  const std::string_view body = trim(text);
  if (body.empty()) return std::nullopt;
  auto match = match_number(body, 0);
  if (!match || match->length != body.size() || !match->finite) return std::nullopt;
  return match->value;
}

std::string format_number(double value) {
  char buffer[64];
  auto [ptr, ec] = std::to_chars(buffer, buffer + sizeof(buffer), value);
  if (ec != std::errc()) return "nan";
  return std::string(buffer, ptr);
}

}  // namespace overprec
