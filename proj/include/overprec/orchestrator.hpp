#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "overprec/dataset.hpp"
#include "overprec/gateway.hpp"
#include "overprec/interval.hpp"
#include "overprec/prompt.hpp"

namespace overprec {

/// A prompting strategy: "vanilla", "cot", "vanilla+hint3", "cot+hint8", ...
struct Strategy {
  PromptStyle style = PromptStyle::Vanilla;
  std::optional<HintVariant> hint;

  std::string label() const;
  static Strategy parse(std::string_view label);
  bool operator==(const Strategy&) const = default;
};

enum class SamplingKind { SelfRandom, Misleading };

struct SamplingConfig {
  SamplingKind kind = SamplingKind::SelfRandom;
  MisleadMode mode = MisleadMode::Near;  // misleading only
};

struct RunConfig {
  std::vector<Strategy> strategies{Strategy{}};
  std::vector<double> confidence_levels{60, 70, 80, 90, 95};
  int trials_per_cell = 5;
  SamplingConfig sampling;
  int concurrency_limit = 4;
  std::uint64_t seed = 0;

  void validate() const;
};

/// A named gateway; the name is the endpoint id recorded in archives.
struct EndpointBinding {
  std::string id;
  std::shared_ptr<Gateway> gateway;
};

struct TrialRecord {
  std::string question_id;
  std::string source;
  double ground_truth = 0.0;
  std::string endpoint_id;
  std::string strategy;
  double confidence = 0.0;
  int trial_index = 0;
  std::optional<Interval> interval;  // absent when parsing failed
  bool normalized = false;
  std::string raw_text;
  std::string parse_status;  // "ok" or "parse_error"
  std::string parse_error;
  std::optional<Interval> hint_interval;
  std::string timestamp;

  bool parsed() const { return interval.has_value(); }
  nlohmann::json to_json() const;
  static TrialRecord from_json(const nlohmann::json& json);
};

/// (question_id, endpoint_id, strategy, confidence, trial_index)
using CellKey = std::tuple<std::string, std::string, std::string, double, int>;
CellKey cell_key(const TrialRecord& record);

/// Records of one or more runs, read from a record-per-line file.
class TrialArchive {
 public:
  TrialArchive() = default;
  explicit TrialArchive(std::vector<TrialRecord> records);

  /// Throws DataError("archive not found: ...") when the file is missing.
  static TrialArchive load(const std::filesystem::path& path);

  const std::vector<TrialRecord>& records() const { return records_; }
  bool empty() const { return records_.empty(); }

  /// Distinct (endpoint_id, strategy) pairs in first-seen order.
  std::vector<std::pair<std::string, std::string>> configurations() const;
  std::vector<std::string> datasets() const;  // sorted
  std::vector<double> levels() const;         // ascending

  TrialArchive filter(std::string_view endpoint_id, std::string_view strategy) const;
  TrialArchive filter_dataset(std::string_view dataset) const;

 private:
  std::vector<TrialRecord> records_;
};

/// Parsed answers of one (endpoint, strategy) configuration grouped by question.
class CandidatePool {
 public:
  struct Entry {
    Candidate candidate;
    int trial_index = 0;
  };
  struct Question {
    std::string id;
    std::string source;
    double ground_truth = 0.0;
    std::vector<Entry> entries;  // sorted by (confidence, trial_index)
  };

  explicit CandidatePool(const TrialArchive& archive);

  const std::vector<Question>& questions() const { return questions_; }  // sorted by id
  const Question* find(std::string_view question_id) const;
  std::vector<double> levels() const { return levels_; }

 private:
  std::vector<Question> questions_;
  std::vector<double> levels_;
};

/// Where refinement candidates are drawn from.
struct RefineSetting {
  enum class Kind { Single, Mixed };
  Kind kind = Kind::Single;
  double confidence = 0.0;  // single only

  std::string label() const;  // "single" / "mixed"
};

/// Key used for results pooled over every level (the mixed setting).
inline constexpr double kAllLevels = 0.0;

/// k of the question's parsed answers, uniformly without replacement, in
/// sampled order. The draw is a prefix of one seeded shuffle, so a smaller k
/// with the same seed yields a prefix of a larger one. nullopt when fewer
/// than k are available.
std::optional<std::vector<Candidate>> sample_for_refinement(const CandidatePool::Question& question,
                                                            const RefineSetting& setting,
                                                            std::size_t k, std::uint64_t seed);

std::optional<std::vector<Candidate>> sample_for_refinement(const CandidatePool& pool,
                                                            std::string_view question_id,
                                                            const RefineSetting& setting,
                                                            std::size_t k, std::uint64_t seed);

struct RunPaths {
  std::filesystem::path archive;
  std::filesystem::path failures;
};

struct RunOutcome {
  std::size_t cells = 0;
  std::size_t written = 0;
  std::size_t resumed = 0;  // already in the archive, skipped
  std::size_t hard_failures = 0;
  std::size_t parse_failures = 0;
};

std::string trial_tag(std::uint64_t seed, const Strategy& strategy, double confidence, int trial);

/// The hint interval shown for `question` in a misleading run.
Interval question_hint(const QuestionRecord& question, MisleadMode mode, std::uint64_t seed);

/// Runs every question x endpoint x strategy x level x trial cell not yet in
/// the archive. Records are appended in a fixed order (questions shuffled by
/// seed, then endpoint, strategy, level, trial) whatever the worker count.
/// Cells whose gateway call fails go to the failures file instead.
RunOutcome execute_run(const RunConfig& config, const Corpus& corpus,
                       const std::vector<EndpointBinding>& endpoints, const RunPaths& paths,
                       const TemplateSet& templates = default_templates());

/// Runs task(i) for i in [0, n) on up to `workers` threads. The first
/// exception thrown by a task is rethrown after all workers stop.
void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task);

}  // namespace overprec
