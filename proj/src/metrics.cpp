#include "overprec/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include <fmt/format.h>

#include "overprec/error.hpp"
#include "overprec/numeric.hpp"

namespace overprec {

double hit_rate(const EvaluatedSet& set) {
  if (set.items.empty()) throw DataError("hit rate of an empty set");
  std::size_t hits = 0;
  for (const auto& item : set.items) {
    if (item.interval.contains(item.ground_truth)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(set.items.size());
}

double hit_average(const std::map<double, double>& per_level) {
  if (per_level.empty()) throw DataError("hit average over no levels");
  double sum = 0.0;
  for (const auto& [_, hit] : per_level) sum += hit;
  return sum / static_cast<double>(per_level.size());
}

std::optional<double> pearson(std::span<const std::pair<double, double>> pairs) {
  if (pairs.size() < 2) throw DataError("correlation needs at least two pairs");
  // Single pass with running means (Welford); stable without a second sweep.
  double n = 0.0;
  double mean_x = 0.0;
  double mean_y = 0.0;
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
  for (const auto& [x, y] : pairs) {
    n += 1.0;
    const double dx = x - mean_x;
    const double dy = y - mean_y;
    mean_x += dx / n;
    mean_y += dy / n;
    sxx += dx * (x - mean_x);
    syy += dy * (y - mean_y);
    sxy += dx * (y - mean_y);
  }
  if (sxx <= 0.0 || syy <= 0.0) return std::nullopt;
  return std::clamp(sxy / std::sqrt(sxx * syy), -1.0, 1.0);
}

std::optional<double> confidence_length_correlation(std::span<const EvaluatedSet> sets) {
  std::vector<std::pair<double, double>> pairs;
  for (const auto& set : sets) {
    for (const auto& item : set.items) pairs.emplace_back(set.confidence, item.interval.length());
  }
  if (pairs.size() < 2) return std::nullopt;
  return pearson(pairs);
}

double deviation_score(const EvaluatedSet& set) {
  if (set.items.empty()) throw DataError("deviation score of an empty set");
  double sum = 0.0;
  for (const auto& item : set.items) {
    const double m =
        std::max(item.interval.lower - item.ground_truth, item.ground_truth - item.interval.upper);
    const double term = std::max(m, 0.0) / (std::abs(m) + 1.0);
    sum += term * term;
  }
  return sum / static_cast<double>(set.items.size());
}

LengthScore interval_length_score(const EvaluatedSet& set) {
  if (set.items.empty()) throw DataError("interval length score of an empty set");
  LengthScore out;
  double sum = 0.0;
  std::size_t used = 0;
  for (const auto& item : set.items) {
    const double scale = std::max(std::abs(item.interval.lower), std::abs(item.interval.upper));
    if (scale == 0.0) {
      ++out.excluded;
      continue;
    }
    sum += item.interval.length() / scale;
    ++used;
  }
  if (used > 0) out.score = sum / static_cast<double>(used);
  return out;
}

std::vector<double> default_scale_edges() {
  std::vector<double> edges;
  for (int k = 8; k >= 0; --k) edges.push_back(-std::pow(10.0, k));
  edges.push_back(0.0);
  for (int k = 0; k <= 8; ++k) edges.push_back(std::pow(10.0, k));
  return edges;
}

std::vector<ScaleBin> scale_bins(const EvaluatedSet& set, std::span<const double> edges) {
  for (std::size_t i = 1; i < edges.size(); ++i) {
    if (!(edges[i - 1] < edges[i])) throw ConfigError("scale bin edges must be strictly increasing");
  }
  constexpr double inf = std::numeric_limits<double>::infinity();
  std::vector<ScaleBin> bins(edges.size() + 1);
  for (std::size_t i = 0; i < bins.size(); ++i) {
    bins[i].low = i == 0 ? -inf : edges[i - 1];
    bins[i].high = i == edges.size() ? inf : edges[i];
  }
  for (const auto& item : set.items) {
    const auto index = static_cast<std::size_t>(
        std::upper_bound(edges.begin(), edges.end(), item.ground_truth) - edges.begin());
    ++bins[index].count;
    if (item.interval.contains(item.ground_truth)) ++bins[index].hits;
  }
  for (auto& bin : bins) {
    if (bin.count > 0) bin.hit_rate = static_cast<double>(bin.hits) / static_cast<double>(bin.count);
  }
  return bins;
}

MeanStd mean_std(std::span<const std::optional<double>> values) {
  std::vector<double> defined;
  for (const auto& value : values) {
    if (value) defined.push_back(*value);
  }
  return mean_std(std::span<const double>(defined));
}

MeanStd mean_std(std::span<const double> values) {
  MeanStd out;
  out.n = values.size();
  if (values.empty()) return out;
  double sum = 0.0;
  for (double v : values) sum += v;
  const double mean = sum / static_cast<double>(values.size());
  double squares = 0.0;
  for (double v : values) squares += (v - mean) * (v - mean);
  out.mean = mean;
  out.std = values.size() > 1 ? std::sqrt(squares / static_cast<double>(values.size() - 1)) : 0.0;
  return out;
}

SimulationMetrics evaluate_sets(std::span<const EvaluatedSet> sets) {
  SimulationMetrics out;
  for (const auto& set : sets) {
    if (set.items.empty()) continue;
    out.hit[set.confidence] = hit_rate(set);
    out.ds[set.confidence] = deviation_score(set);
    const auto ils = interval_length_score(set);
    out.ils[set.confidence] = ils.score;
    out.ils_excluded += ils.excluded;
    out.counts[set.confidence] = set.items.size();
  }
  if (out.hit.empty()) throw DataError("no answers to evaluate");
  out.hit_avg = hit_average(out.hit);
  out.correlation = confidence_length_correlation(sets);
  return out;
}

void summarize_simulations(MetricReport& report, std::span<const SimulationMetrics> runs) {
  report.simulations = runs.size();
  std::set<double> levels;
  for (const auto& run : runs) {
    for (const auto& [c, _] : run.hit) levels.insert(c);
  }
  report.levels.assign(levels.begin(), levels.end());

  auto collect = [&](auto pick) {
    std::vector<std::optional<double>> values;
    for (const auto& run : runs) values.push_back(pick(run));
    return mean_std(std::span<const std::optional<double>>(values));
  };
  for (double c : report.levels) {
    report.hit[c] = collect([c](const SimulationMetrics& run) -> std::optional<double> {
      auto it = run.hit.find(c);
      return it == run.hit.end() ? std::nullopt : std::optional<double>(it->second);
    });
    report.ds[c] = collect([c](const SimulationMetrics& run) -> std::optional<double> {
      auto it = run.ds.find(c);
      return it == run.ds.end() ? std::nullopt : std::optional<double>(it->second);
    });
    report.ils[c] = collect([c](const SimulationMetrics& run) -> std::optional<double> {
      auto it = run.ils.find(c);
      return it == run.ils.end() ? std::nullopt : it->second;
    });
  }
  report.hit_avg = collect([](const SimulationMetrics& run) { return std::optional<double>(run.hit_avg); });
  report.correlation = collect([](const SimulationMetrics& run) { return run.correlation; });
  if (!runs.empty()) report.counts = runs.front().counts;
  report.ils_excluded = 0;
  for (const auto& run : runs) report.ils_excluded += run.ils_excluded;
}

namespace {

nlohmann::json stat_json(const MeanStd& stat) {
  return {{"mean", stat.mean ? nlohmann::json(*stat.mean) : nlohmann::json()},
          {"std", stat.std ? nlohmann::json(*stat.std) : nlohmann::json()},
          {"n", stat.n}};
}

std::string level_key(double c) { return c == 0.0 ? "all" : format_number(c); }

}  // namespace

nlohmann::json MetricReport::to_json() const {
  nlohmann::json out = {
      {"phase", phase},
      {"dataset", dataset},
      {"model", model},
      {"strategy", strategy},
      {"method", method},
      {"setting", setting},
      {"examples", examples},
      {"simulations", simulations},
      {"skipped", skipped},
      {"ils_excluded", ils_excluded},
      {"hit_avg", stat_json(hit_avg)},
      {"correlation", stat_json(correlation)},
      {"parse_failure_rate",
       parse_failure_rate ? nlohmann::json(*parse_failure_rate) : nlohmann::json()},
  };
  nlohmann::json hits = nlohmann::json::object();
  nlohmann::json ds_json = nlohmann::json::object();
  nlohmann::json ils_json = nlohmann::json::object();
  nlohmann::json count_json = nlohmann::json::object();
  for (double c : levels) {
    const std::string key = level_key(c);
    if (auto it = hit.find(c); it != hit.end()) hits[key] = stat_json(it->second);
    if (auto it = ds.find(c); it != ds.end()) ds_json[key] = stat_json(it->second);
    if (auto it = ils.find(c); it != ils.end()) ils_json[key] = stat_json(it->second);
    if (auto it = counts.find(c); it != counts.end()) count_json[key] = it->second;
  }
  out["hit"] = std::move(hits);
  out["ds"] = std::move(ds_json);
  out["ils"] = std::move(ils_json);
  out["counts"] = std::move(count_json);
  return out;
}

}  // namespace overprec
