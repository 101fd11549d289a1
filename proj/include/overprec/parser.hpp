#pragma once

#include <span>
#include <string>
#include <string_view>

#include "overprec/interval.hpp"

namespace overprec {

/// A (lower, upper) pair read out of model text.
struct IntervalAnswer {
  double lower = 0.0;
  double upper = 0.0;
  std::string raw_text;
  bool normalized = false;  // bounds arrived reversed and were swapped

  Interval interval() const { return {lower, upper}; }
};

struct RefinementOutcome {
  IntervalAnswer chosen;
  std::string chosen_reason;
  IntervalAnswer proposed;
  std::string proposed_reason;
  bool chosen_in_candidates = false;         // both bounds from one candidate
  bool chosen_bounds_in_candidates = false;  // each bound from some candidate
};

/// Relative comparison used for candidate membership: |a-b| <= tol*max(|a|,|b|).
bool approx_equal_rel(double a, double b, double tolerance = 1e-9);

/// Reads an interval from model output.
///
/// The FORM layout ("lower_bound: 10, upper_bound: 20", also JSON-style
/// keys) is tried first, using the last occurrence of each key. Failing
/// that, the last bracketed numeric pair such as "[1.1e2, 3,000]" is used.
/// Throws ParseError when neither is present or a bound is not finite.
IntervalAnswer parse_interval(std::string_view raw);

/// Renders bounds exactly as the FORM template asks for them, using the
/// shortest round-trippable decimal form.
std::string format_interval_answer(double lower, double upper);

/// Decodes the JSON object of a self-refinement reply. Surrounding prose and
/// code fences are ignored. Throws ParseError naming the first missing key.
RefinementOutcome parse_refinement(std::string_view raw, std::span<const Interval> candidates);

}  // namespace overprec
