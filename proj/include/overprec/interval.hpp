#pragma once

namespace overprec {

/// Closed interval [lower, upper].
struct Interval {
  double lower = 0.0;
  double upper = 0.0;

  double length() const { return upper - lower; }
  bool contains(double value) const { return lower <= value && value <= upper; }
  bool operator==(const Interval&) const = default;
};

/// An interval answer together with the confidence level (percent) that was
/// imposed when it was produced.
struct Candidate {
  double lower = 0.0;
  double upper = 0.0;
  double confidence = 0.0;

  Interval interval() const { return {lower, upper}; }
  bool operator==(const Candidate&) const = default;
};

}  // namespace overprec
