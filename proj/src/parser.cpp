#include "overprec/parser.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <optional>
#include <utility>

#include <fmt/format.h>
#include <json.hpp>

#include "overprec/error.hpp"
#include "overprec/numeric.hpp"

namespace overprec {
namespace {

constexpr std::string_view kRefinementKeys[] = {"chosen_answer", "chosen_reason",
                                                "proposed_answer", "proposed_reason"};

bool is_space(char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; }

std::size_t skip_spaces(std::string_view text, std::size_t pos) {
  while (pos < text.size() && is_space(text[pos])) ++pos;
  return pos;
}

std::string ascii_lower(std::string_view text) {
  std::string out(text);
  for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

struct KeyedValue {
  std::size_t position = 0;
  NumberMatch number;
};

// Finds "<word>_bound", "<word> bound" or "<word>-bound" followed by a value.
std::optional<KeyedValue> last_keyed_value(std::string_view text, std::string_view lowered,
                                           std::string_view word) {
  std::optional<KeyedValue> last;
  std::size_t from = 0;
  while (true) {
    const std::size_t hit = lowered.find(word, from);
    if (hit == std::string_view::npos) break;
    from = hit + 1;
    std::size_t i = hit + word.size();
    if (i >= lowered.size() || (lowered[i] != '_' && lowered[i] != ' ' && lowered[i] != '-')) {
      continue;
    }
    ++i;
    if (lowered.compare(i, 5, "bound") != 0) continue;
    i += 5;
    // Separators between key and value: quotes, markdown emphasis, ':' '='
    // and an optional "is".
    while (i < lowered.size()) {
      const char c = lowered[i];
      if (is_space(c) || c == '"' || c == '\'' || c == '`' || c == '*' || c == ':' || c == '=') {
        ++i;
      } else if (lowered.compare(i, 3, "is ") == 0) {
        i += 3;
      } else {
        break;
      }
    }
    if (auto number = match_number(text, i)) last = KeyedValue{hit, *number};
  }
  return last;
}

std::optional<std::pair<NumberMatch, NumberMatch>> last_bracketed_pair(std::string_view text) {
  std::optional<std::pair<NumberMatch, NumberMatch>> last;
  for (std::size_t open = text.find('['); open != std::string_view::npos;
       open = text.find('[', open + 1)) {
    std::size_t i = skip_spaces(text, open + 1);
    auto first = match_number(text, i);
    if (!first) continue;
    i = skip_spaces(text, i + first->length);
    if (i >= text.size()) continue;
    if (text[i] == ',' || text[i] == ';') {
      ++i;
    } else if (text.compare(i, 2, "to") == 0) {
      i += 2;
    } else if (text[i] == '-' && i + 1 < text.size() && is_space(text[i + 1])) {
      ++i;
    } else {
      continue;
    }
    i = skip_spaces(text, i);
    auto second = match_number(text, i);
    if (!second) continue;
    i = skip_spaces(text, i + second->length);
    if (i < text.size() && text[i] == ']') last = std::make_pair(*first, *second);
  }
  return last;
}

IntervalAnswer make_answer(double lower, double upper, std::string_view raw) {
  if (!std::isfinite(lower) || !std::isfinite(upper)) {
    throw ParseError("interval bound is not a finite number");
  }
  IntervalAnswer answer;
  answer.raw_text = std::string(raw);
  if (lower > upper) {
    std::swap(lower, upper);
    answer.normalized = true;
  }
  answer.lower = lower;
  answer.upper = upper;
  return answer;
}

// Index one past the '}' matching the '{' at `open`, honoring JSON strings.
std::optional<std::size_t> matching_brace(std::string_view text, std::size_t open) {
  int depth = 0;
  bool in_string = false;
  for (std::size_t i = open; i < text.size(); ++i) {
    const char c = text[i];
    if (in_string) {
      if (c == '\\') {
        ++i;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::nullopt;
}

std::optional<nlohmann::json> last_refinement_object(std::string_view text) {
  std::optional<nlohmann::json> found;
  for (std::size_t open = text.find('{'); open != std::string_view::npos;
       open = text.find('{', open + 1)) {
    const std::size_t next = skip_spaces(text, open + 1);
    if (next >= text.size() || text[next] != '"') continue;
    auto end = matching_brace(text, open);
    if (!end) continue;
    auto parsed = nlohmann::json::parse(text.substr(open, *end - open), nullptr, false);
    if (parsed.is_discarded() || !parsed.is_object()) continue;
    const bool relevant = std::any_of(std::begin(kRefinementKeys), std::end(kRefinementKeys),
                                      [&](std::string_view key) { return parsed.contains(key); });
    if (relevant) found = std::move(parsed);
  }
  return found;
}

double json_bound(const nlohmann::json& value, std::string_view key) {
  if (value.is_number()) return value.get<double>();
  if (value.is_string()) {
    if (auto number = parse_number(value.get<std::string>())) return *number;
  }
  throw ParseError(fmt::format("'{}' bound {} is not a number", key, value.dump()));
}

IntervalAnswer json_interval(const nlohmann::json& object, std::string_view key) {
  const auto& value = object.at(std::string(key));
  if (!value.is_array() || value.size() != 2) {
    throw ParseError(fmt::format("'{}' must be a [lower_bound, upper_bound] pair", key));
  }
  return make_answer(json_bound(value[0], key), json_bound(value[1], key), value.dump());
}

std::string json_reason(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  if (value.is_null()) return {};
  return value.dump();
}

}  // namespace

bool approx_equal_rel(double a, double b, double tolerance) {
  if (a == b) return true;
  return std::abs(a - b) <= tolerance * std::max(std::abs(a), std::abs(b));
}

IntervalAnswer parse_interval(std::string_view raw) {
  const std::string lowered = ascii_lower(raw);
  auto lower = last_keyed_value(raw, lowered, "lower");
  auto upper = last_keyed_value(raw, lowered, "upper");
  if (lower && upper) return make_answer(lower->number.value, upper->number.value, raw);

  if (auto pair = last_bracketed_pair(raw)) {
    return make_answer(pair->first.value, pair->second.value, raw);
  }
  throw ParseError("no interval found in response");
}

std::string format_interval_answer(double lower, double upper) {
  return fmt::format("lower_bound: {}, upper_bound: {}", format_number(lower),
                     format_number(upper));
}

RefinementOutcome parse_refinement(std::string_view raw, std::span<const Interval> candidates) {
  auto object = last_refinement_object(raw);
  if (!object) throw ParseError("no JSON object with refinement keys found in response");
  for (auto key : kRefinementKeys) {
    if (!object->contains(key)) throw ParseError(fmt::format("missing key '{}'", key));
  }

  RefinementOutcome outcome;
  outcome.chosen = json_interval(*object, "chosen_answer");
  outcome.proposed = json_interval(*object, "proposed_answer");
  outcome.chosen.raw_text = std::string(raw);
  outcome.proposed.raw_text = std::string(raw);
  outcome.chosen_reason = json_reason((*object)["chosen_reason"]);
  outcome.proposed_reason = json_reason((*object)["proposed_reason"]);

  bool lower_found = false;
  bool upper_found = false;
  for (const auto& candidate : candidates) {
    const bool lower_match = approx_equal_rel(outcome.chosen.lower, candidate.lower);
    const bool upper_match = approx_equal_rel(outcome.chosen.upper, candidate.upper);
    lower_found = lower_found || lower_match;
    upper_found = upper_found || upper_match;
    if (lower_match && upper_match) outcome.chosen_in_candidates = true;
  }
  outcome.chosen_bounds_in_candidates = lower_found && upper_found;
  return outcome;
}

}  // namespace overprec
