#pragma once

#include <cstddef>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

namespace overprec {

/// A question with a real-valued ground truth answer.
struct QuestionRecord {
  std::string id;
  std::string source;  // dataset label, e.g. "FinQA"
  std::string question_text;
  double ground_truth = 0.0;
  std::optional<std::string> context;
  std::map<std::string, std::string> meta;
};

using Corpus = std::vector<QuestionRecord>;

struct RejectedLine {
  std::size_t line_number = 0;  // 1-based
  std::string reason;
};

struct LoadResult {
  Corpus records;
  std::vector<RejectedLine> rejected;
};

struct DatasetSummary {
  std::string label;
  std::size_t example_count = 0;
  double answer_mean = 0.0;
  double answer_min = 0.0;
  double answer_max = 0.0;
};

/// Returns the value of a bare numeric answer. Anything carrying a unit,
/// currency symbol, percent sign or word is rejected.
std::optional<double> filter_numeric(std::string_view raw_answer);

/// Reads a record-per-line JSON corpus. Lines that are malformed or fail the
/// numeric filter are skipped and reported; the load fails only when the
/// file is unreadable or yields no valid record at all.
LoadResult load_corpus(const std::filesystem::path& path);

/// Validates one decoded record; throws DataError describing the first
/// violated invariant.
QuestionRecord record_from_json(const nlohmann::json& line);
nlohmann::json record_to_json(const QuestionRecord& record);

void write_corpus(const std::filesystem::path& path, const Corpus& corpus);

/// Concatenates corpora under one source label. Ids are prefixed with their
/// original source ("MedQA/17") and must stay unique.
Corpus merge_sources(const std::vector<Corpus>& corpora, const std::string& new_label);

DatasetSummary summarize(const Corpus& corpus, std::string label = {});

/// Header plus one row: dataset, #examples, avg-a, min-a, max-a.
std::string summary_csv(const DatasetSummary& summary);

/// A multiple-choice item prior to conversion to direct-answer form.
struct McqItem {
  std::string id;
  std::string source;
  std::string stem;
  std::vector<std::string> options;
  std::size_t answer_index = 0;
};

/// Drops the options and keeps the stem plus the correct option text.
/// Returns nullopt when the stem refers to the options ("which of the
/// above") or when the correct option is not a bare number.
std::optional<QuestionRecord> convert_mcq(const McqItem& item);

}  // namespace overprec
