#pragma once

#include <cstddef>
#include <span>
#include <string_view>
#include <vector>

#include "overprec/interval.hpp"

namespace overprec {

enum class SchemeKind { MIA, LWA, ILWA, CWA, Union };

struct AggregationScheme {
  SchemeKind kind = SchemeKind::MIA;
  double epsilon = 1e-12;  // iLWA weight is 1 / (d + epsilon)
};

std::string_view to_string(SchemeKind kind);  // "MIA", "LWA", "iLWA", "CWA", "Union"
SchemeKind scheme_kind_from_string(std::string_view text);
const std::vector<SchemeKind>& all_schemes();

struct AggregatedInterval {
  double lower = 0.0;
  double upper = 0.0;
  AggregationScheme scheme;
  std::size_t inputs_count = 0;

  Interval interval() const { return {lower, upper}; }
};

/// Combines intervals into one.
///
/// Weighted schemes return X = sum(w*x)/sum(w), Y = sum(w*y)/sum(w) with
/// w = 1 (MIA), d (LWA), 1/(d + epsilon) (iLWA) or c (CWA), d = y - x.
/// Union returns [min x, max y]. Weights are divided by their maximum before
/// use, so equal weights reduce to the plain mean bit for bit.
///
/// Throws DataError on an empty input, a reversed or non-finite interval, a
/// non-positive CWA confidence, or LWA inputs that all have zero width.
AggregatedInterval aggregate(std::span<const Candidate> intervals, AggregationScheme scheme);

}  // namespace overprec
