#include "overprec/dataset.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "overprec/error.hpp"
#include "overprec/numeric.hpp"

namespace overprec {
namespace {

std::string lowercase(std::string_view text) {
  std::string out(text);
  std::transform(out.begin(), out.end(), out.begin(),
                 [](unsigned char c) { return static_cast<char>(std::tolower(c)); });
  return out;
}

std::string scalar_to_string(const nlohmann::json& value) {
  if (value.is_string()) return value.get<std::string>();
  return value.dump();
}

}  // namespace

std::optional<double> filter_numeric(std::string_view raw_answer) {
  return parse_number(raw_answer);
}

QuestionRecord record_from_json(const nlohmann::json& line) {
  if (!line.is_object()) throw DataError("record is not a JSON object");

  QuestionRecord record;
  if (!line.contains("id") || line["id"].is_null()) throw DataError("missing field 'id'");
  record.id = scalar_to_string(line["id"]);
  if (trim(record.id).empty()) throw DataError("empty id");

  record.source = line.contains("source") && line["source"].is_string()
                      ? line["source"].get<std::string>()
                      : std::string("custom");

  if (!line.contains("question") || !line["question"].is_string()) {
    throw DataError("missing string field 'question'");
  }
  record.question_text = line["question"].get<std::string>();
  if (trim(record.question_text).empty()) throw DataError("question text is blank");

  if (!line.contains("answer")) throw DataError("missing field 'answer'");
  const auto& answer = line["answer"];
  std::optional<double> value;
  if (answer.is_number()) {
    value = answer.get<double>();
    if (!std::isfinite(*value)) value.reset();
  } else if (answer.is_string()) {
    value = filter_numeric(answer.get<std::string>());
  }
  if (!value) throw DataError(fmt::format("answer {} is not a bare number", answer.dump()));
  record.ground_truth = *value;

  if (line.contains("context") && !line["context"].is_null()) {
    record.context = scalar_to_string(line["context"]);
  }
  if (line.contains("meta") && line["meta"].is_object()) {
    for (const auto& [key, item] : line["meta"].items()) {
      record.meta[key] = scalar_to_string(item);
    }
  }
  return record;
}

nlohmann::json record_to_json(const QuestionRecord& record) {
  nlohmann::json out = {
      {"id", record.id},
      {"source", record.source},
      {"question", record.question_text},
      {"answer", record.ground_truth},
  };
  if (record.context) out["context"] = *record.context;
  if (!record.meta.empty()) out["meta"] = record.meta;
  return out;
}

LoadResult load_corpus(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read corpus file '{}'", path.string()));

  LoadResult result;
  std::set<std::string> seen;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    try {
      auto record = record_from_json(nlohmann::json::parse(line));
      if (!seen.insert(record.id).second) {
        throw DataError(fmt::format("duplicate id '{}'", record.id));
      }
      result.records.push_back(std::move(record));
    } catch (const nlohmann::json::exception& e) {
      result.rejected.push_back({line_number, fmt::format("malformed JSON: {}", e.what())});
    } catch (const DataError& e) {
      result.rejected.push_back({line_number, e.what()});
    }
  }

  for (const auto& rejected : result.rejected) {
    spdlog::debug("{}:{}: rejected: {}", path.string(), rejected.line_number, rejected.reason);
  }
  if (!result.rejected.empty()) {
    spdlog::info("{}: kept {} records, rejected {}", path.string(), result.records.size(),
                 result.rejected.size());
  }
  if (result.records.empty()) {
    throw DataError(fmt::format("no valid records in '{}'", path.string()));
  }
  return result;
}

void write_corpus(const std::filesystem::path& path, const Corpus& corpus) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write corpus file '{}'", path.string()));
  for (const auto& record : corpus) out << record_to_json(record).dump() << '\n';
}

Corpus merge_sources(const std::vector<Corpus>& corpora, const std::string& new_label) {
  Corpus merged;
  std::set<std::string> ids;
  for (const auto& corpus : corpora) {
    for (const auto& record : corpus) {
      QuestionRecord copy = record;
      copy.id = record.source + "/" + record.id;
      if (!ids.insert(copy.id).second) {
        throw DataError(fmt::format("id collision while merging: '{}'", copy.id));
      }
      copy.meta["original_source"] = record.source;
      copy.source = new_label;
      merged.push_back(std::move(copy));
    }
  }
  return merged;
}

DatasetSummary summarize(const Corpus& corpus, std::string label) {
  if (corpus.empty()) throw DataError("cannot summarize an empty corpus");
  DatasetSummary summary;
  summary.label = label.empty() ? corpus.front().source : std::move(label);
  summary.answer_min = corpus.front().ground_truth;
  summary.answer_max = corpus.front().ground_truth;
  double mean = 0.0;
  std::size_t n = 0;
  for (const auto& record : corpus) {
    ++n;
    mean += (record.ground_truth - mean) / static_cast<double>(n);
    summary.answer_min = std::min(summary.answer_min, record.ground_truth);
    summary.answer_max = std::max(summary.answer_max, record.ground_truth);
  }
  summary.example_count = n;
  // Rounding in the running mean can push it a hair outside [min, max].
  summary.answer_mean = std::clamp(mean, summary.answer_min, summary.answer_max);
  return summary;
}

std::string summary_csv(const DatasetSummary& summary) {
  return fmt::format("dataset,#examples,avg-a,min-a,max-a\n{},{},{:.3e},{:.3e},{:.3e}\n",
                     summary.label, summary.example_count, summary.answer_mean,
                     summary.answer_min, summary.answer_max);
}

std::optional<QuestionRecord> convert_mcq(const McqItem& item) {
  if (item.answer_index >= item.options.size()) return std::nullopt;

  static constexpr std::string_view kOptionReferences[] = {
      "of the above", "of the following", "the options", "the choices", "above options",
      "following options", "all of these", "none of these",
  };
  const std::string stem = lowercase(item.stem);
  for (auto phrase : kOptionReferences) {
    if (stem.find(phrase) != std::string::npos) return std::nullopt;
  }

  auto value = filter_numeric(item.options[item.answer_index]);
  if (!value) return std::nullopt;

  QuestionRecord record;
  record.id = item.id;
  record.source = item.source;
  record.question_text = std::string(trim(item.stem));
  if (record.question_text.empty()) return std::nullopt;
  record.ground_truth = *value;
  record.meta["converted_from"] = "mcq";
  return record;
}

}  // namespace overprec
