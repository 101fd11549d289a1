#pragma once

#include <cstddef>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "overprec/interval.hpp"

namespace overprec {

struct EvaluatedItem {
  std::string question_id;
  double ground_truth = 0.0;
  Interval interval;
};

/// Answers obtained at one confidence level (kAllLevels for pooled sets).
struct EvaluatedSet {
  double confidence = 0.0;
  std::vector<EvaluatedItem> items;
};

/// Fraction of items whose interval contains the ground truth, boundaries
/// included. Throws DataError on an empty set.
double hit_rate(const EvaluatedSet& set);

/// Unweighted mean over levels. Throws DataError on an empty map.
double hit_average(const std::map<double, double>& per_level);

/// Pearson r over (x, y) pairs; nullopt when either variance is zero.
/// Throws DataError on fewer than two pairs.
std::optional<double> pearson(std::span<const std::pair<double, double>> pairs);

/// Pooled (c, y - x) correlation over every item of every set.
std::optional<double> confidence_length_correlation(std::span<const EvaluatedSet> sets);

/// Mean of (max(m, 0) / (|m| + 1))^2 with m = max(x - a, a - y).
double deviation_score(const EvaluatedSet& set);

struct LengthScore {
  std::optional<double> score;  // absent when every item was excluded
  std::size_t excluded = 0;     // items with max(|x|, |y|) = 0
};

/// Mean of (y - x) / max(|x|, |y|). Throws DataError on an empty set.
LengthScore interval_length_score(const EvaluatedSet& set);

struct ScaleBin {
  double low = 0.0;   // -inf for the first bin
  double high = 0.0;  // +inf for the last bin
  std::size_t count = 0;
  std::size_t hits = 0;
  std::optional<double> hit_rate;  // absent for empty bins
};

/// Signed decades: -1e8, ..., -10, -1, 0, 1, 10, ..., 1e8.
std::vector<double> default_scale_edges();

/// Buckets items by ground truth into [edge_i, edge_i+1), with open bins
/// below the first and above the last edge. Edges must be strictly
/// increasing (ConfigError otherwise).
std::vector<ScaleBin> scale_bins(const EvaluatedSet& set, std::span<const double> edges);

struct MeanStd {
  std::optional<double> mean;
  std::optional<double> std;  // unbiased (n - 1); 0 when n = 1
  std::size_t n = 0;          // defined values used
};

/// Mean and std of the defined values; both absent when none are defined.
MeanStd mean_std(std::span<const std::optional<double>> values);
MeanStd mean_std(std::span<const double> values);

/// Metrics of one simulation (or one pass over all answers).
struct SimulationMetrics {
  std::map<double, double> hit;
  double hit_avg = 0.0;
  std::optional<double> correlation;
  std::map<double, double> ds;
  std::map<double, std::optional<double>> ils;
  std::map<double, std::size_t> counts;
  std::size_t ils_excluded = 0;
};

/// Evaluates the non-empty sets; throws DataError when all are empty.
/// Correlation needs at least two items overall and is absent otherwise.
SimulationMetrics evaluate_sets(std::span<const EvaluatedSet> sets);

/// Metrics of one configuration summarised over simulations.
struct MetricReport {
  std::string phase;     // "generation", "aggregation", "self_refine"
  std::string dataset;
  std::string model;     // endpoint id
  std::string strategy;  // prompting strategy of the answers
  std::string method;    // scheme name, "chosen", "proposed" or "answers"
  std::string setting;   // "single", "mixed" or "" for generation
  std::size_t examples = 0;  // candidates per question (k or e)

  std::vector<double> levels;  // ascending; {kAllLevels} for pooled sets
  std::map<double, MeanStd> hit;
  MeanStd hit_avg;
  MeanStd correlation;
  std::map<double, MeanStd> ds;
  std::map<double, MeanStd> ils;
  std::map<double, std::size_t> counts;  // items per level, first simulation
  std::size_t simulations = 0;
  std::size_t skipped = 0;  // (question, level) draws without enough answers
  std::size_t ils_excluded = 0;
  std::optional<double> parse_failure_rate;

  nlohmann::json to_json() const;
};

/// Summarises per-simulation metrics into mean/std pairs.
void summarize_simulations(MetricReport& report, std::span<const SimulationMetrics> runs);

}  // namespace overprec
