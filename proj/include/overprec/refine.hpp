#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "overprec/aggregation.hpp"
#include "overprec/dataset.hpp"
#include "overprec/gateway.hpp"
#include "overprec/metrics.hpp"
#include "overprec/orchestrator.hpp"
#include "overprec/parser.hpp"
#include "overprec/prompt.hpp"

namespace overprec {

/// One refined (or resampled) interval for a question.
struct RefinedRecord {
  std::string phase;  // "generation", "aggregation" or "self_refine"
  std::string dataset;
  std::string model;
  std::string strategy;
  std::string method;   // scheme name, "chosen", "proposed" or "answers"
  std::string setting;  // "single" or "mixed"
  double confidence = kAllLevels;
  std::size_t examples = 0;
  int simulation = 0;
  std::string question_id;
  double ground_truth = 0.0;
  std::string status;  // "ok", "skipped", "parse_error", "gateway_error"
  std::optional<Interval> interval;
  std::size_t inputs = 0;
  std::optional<bool> chosen_in_candidates;
  std::optional<bool> chosen_bounds_in_candidates;
  std::string error;

  nlohmann::json to_json() const;
  static RefinedRecord from_json(const nlohmann::json& json);
};

/// Throws DataError("archive not found: ...") when the file is missing.
std::vector<RefinedRecord> load_refined(const std::filesystem::path& path);
void write_refined(const std::filesystem::path& path, std::span<const RefinedRecord> records);

struct SimulationOptions {
  RefineSetting::Kind setting = RefineSetting::Kind::Single;
  std::size_t k = 3;
  std::size_t n_sims = 10;
  std::uint64_t seed = 0;
};

/// Samples k answers per question (per level in the single setting) in each
/// of n_sims simulations and aggregates them with `scheme`. The draws depend
/// on the seed but not on the scheme, so schemes are compared on identical
/// samples. `archive` must hold one (endpoint, strategy) configuration.
std::vector<RefinedRecord> run_aggregation_simulations(const TrialArchive& archive,
                                                       AggregationScheme scheme,
                                                       const SimulationOptions& options);

/// Generation-phase view: one answer drawn per question and level in each
/// simulation, reported per (dataset, model, strategy) with parse-failure rate.
std::vector<MetricReport> evaluate_generation(const TrialArchive& archive, std::size_t n_sims,
                                              std::uint64_t seed);

/// One refinement call on the first e candidates.
RefinementOutcome self_refine(Gateway& gateway, const QuestionRecord& question,
                              std::span<const Candidate> candidates, std::size_t e,
                              const std::string& trial_tag,
                              const TemplateSet& templates = default_templates());

struct SelfRefineOptions {
  RefineSetting::Kind setting = RefineSetting::Kind::Single;
  std::size_t e = 3;
  std::uint64_t seed = 0;
  int concurrency = 4;
};

/// One refinement call per question (per level in the single setting); each
/// call yields a "chosen" and a "proposed" record.
std::vector<RefinedRecord> run_self_refinement(Gateway& gateway, const TrialArchive& archive,
                                               const Corpus& corpus,
                                               const SelfRefineOptions& options,
                                               const TemplateSet& templates = default_templates());

/// run_self_refinement for each e. Throws ConfigError before any gateway
/// call when the largest e exceeds the answers available for every question.
std::vector<RefinedRecord> sweep_refinement_examples(Gateway& gateway, const TrialArchive& archive,
                                                     const Corpus& corpus,
                                                     std::span<const std::size_t> e_values,
                                                     SelfRefineOptions options,
                                                     const TemplateSet& templates = default_templates());

/// Groups records by (phase, dataset, model, strategy, setting, method,
/// examples) and summarises each group over its simulations.
std::vector<MetricReport> report_from_refined(std::span<const RefinedRecord> records);

}  // namespace overprec
