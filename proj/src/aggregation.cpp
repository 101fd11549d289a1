#include "overprec/aggregation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include <fmt/format.h>

#include "overprec/error.hpp"

namespace overprec {

std::string_view to_string(SchemeKind kind) {
  switch (kind) {
    case SchemeKind::MIA: return "MIA";
    case SchemeKind::LWA: return "LWA";
    case SchemeKind::ILWA: return "iLWA";
    case SchemeKind::CWA: return "CWA";
    case SchemeKind::Union: return "Union";
  }
  return "MIA";
}

SchemeKind scheme_kind_from_string(std::string_view text) {
  for (SchemeKind kind : all_schemes()) {
    if (text == to_string(kind)) return kind;
  }
  if (text == "ILWA" || text == "ilwa") return SchemeKind::ILWA;
  if (text == "union") return SchemeKind::Union;
  throw ConfigError(fmt::format("unknown aggregation scheme '{}'", text));
}

const std::vector<SchemeKind>& all_schemes() {
  static const std::vector<SchemeKind> kinds = {SchemeKind::CWA, SchemeKind::LWA, SchemeKind::MIA,
                                                SchemeKind::Union, SchemeKind::ILWA};
  return kinds;
}

AggregatedInterval aggregate(std::span<const Candidate> intervals, AggregationScheme scheme) {
  if (intervals.empty()) throw DataError("cannot aggregate an empty list of intervals");
  if (!(scheme.epsilon > 0.0)) throw ConfigError("iLWA epsilon must be positive");

  double min_x = intervals[0].lower;
  double max_x = intervals[0].lower;
  double min_y = intervals[0].upper;
  double max_y = intervals[0].upper;
  for (const auto& item : intervals) {
    if (!std::isfinite(item.lower) || !std::isfinite(item.upper) || item.lower > item.upper) {
      throw DataError(fmt::format("invalid interval [{}, {}]", item.lower, item.upper));
    }
    min_x = std::min(min_x, item.lower);
    max_x = std::max(max_x, item.lower);
    min_y = std::min(min_y, item.upper);
    max_y = std::max(max_y, item.upper);
  }

  AggregatedInterval out;
  out.scheme = scheme;
  out.inputs_count = intervals.size();
  if (scheme.kind == SchemeKind::Union) {
    out.lower = min_x;
    out.upper = max_y;
    return out;
  }

  std::vector<double> weights;
  weights.reserve(intervals.size());
  for (const auto& item : intervals) {
    const double d = item.upper - item.lower;
    switch (scheme.kind) {
      case SchemeKind::MIA: weights.push_back(1.0); break;
      case SchemeKind::LWA: weights.push_back(d); break;
      case SchemeKind::ILWA: weights.push_back(1.0 / (d + scheme.epsilon)); break;
      case SchemeKind::CWA:
        if (!(item.confidence > 0.0) || !std::isfinite(item.confidence)) {
          throw DataError("CWA needs a positive confidence on every interval");
        }
        weights.push_back(item.confidence);
        break;
      case SchemeKind::Union: break;
    }
  }
  const double max_weight = *std::max_element(weights.begin(), weights.end());
  if (!(max_weight > 0.0) || !std::isfinite(max_weight)) {
    throw DataError(fmt::format("{} weights sum to zero", to_string(scheme.kind)));
  }

  double weight_sum = 0.0;
  double x_sum = 0.0;
  double y_sum = 0.0;
  for (std::size_t i = 0; i < intervals.size(); ++i) {
    const double w = weights[i] / max_weight;
    weight_sum += w;
    x_sum += w * intervals[i].lower;
    y_sum += w * intervals[i].upper;
  }
  // Rounding can push a mean of identical values one ulp outside their range.
  out.lower = std::clamp(x_sum / weight_sum, min_x, max_x);
  out.upper = std::clamp(y_sum / weight_sum, min_y, max_y);
  if (out.lower > out.upper) throw std::logic_error("weighted mean reversed interval bounds");
  return out;
}

}  // namespace overprec
