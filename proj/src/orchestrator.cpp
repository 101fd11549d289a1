#include "overprec/orchestrator.hpp"

#include <algorithm>
#include <atomic>
#include <exception>
#include <fstream>
#include <mutex>
#include <thread>
#include <variant>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "overprec/error.hpp"
#include "overprec/numeric.hpp"
#include "overprec/parser.hpp"
#include "overprec/rng.hpp"

namespace overprec {

std::string Strategy::label() const {
  std::string out(to_string(style));
  if (hint) out += fmt::format("+{}", to_string(*hint));
  return out;
}

Strategy Strategy::parse(std::string_view label) {
  Strategy strategy;
  const std::size_t plus = label.find('+');
  strategy.style = prompt_style_from_string(label.substr(0, plus));
  if (plus != std::string_view::npos) strategy.hint = hint_variant_from_string(label.substr(plus + 1));
  return strategy;
}

void RunConfig::validate() const {
  if (strategies.empty()) throw ConfigError("run needs at least one strategy");
  for (std::size_t i = 0; i < strategies.size(); ++i) {
    for (std::size_t j = i + 1; j < strategies.size(); ++j) {
      if (strategies[i] == strategies[j]) {
        throw ConfigError(fmt::format("strategy '{}' listed twice", strategies[i].label()));
      }
    }
    const bool hinted = strategies[i].hint.has_value();
    if (hinted && sampling.kind != SamplingKind::Misleading) {
      throw ConfigError(fmt::format("strategy '{}' needs misleading sampling",
                                    strategies[i].label()));
    }
    if (!hinted && sampling.kind == SamplingKind::Misleading) {
      throw ConfigError(fmt::format("misleading sampling needs a hint variant on strategy '{}'",
                                    strategies[i].label()));
    }
  }
  if (confidence_levels.empty()) throw ConfigError("run needs at least one confidence level");
  for (std::size_t i = 0; i < confidence_levels.size(); ++i) {
    const double c = confidence_levels[i];
    if (!(c > 0.0 && c < 100.0)) {
      throw ConfigError(fmt::format("confidence level {} outside (0, 100)", c));
    }
    if (i > 0 && !(confidence_levels[i - 1] < c)) {
      throw ConfigError("confidence levels must be strictly increasing");
    }
  }
  if (trials_per_cell < 1) throw ConfigError("trials_per_cell must be >= 1");
  if (concurrency_limit < 1) throw ConfigError("concurrency_limit must be >= 1");
}

nlohmann::json TrialRecord::to_json() const {
  nlohmann::json out = {
      {"question_id", question_id},
      {"source", source},
      {"ground_truth", ground_truth},
      {"endpoint_id", endpoint_id},
      {"strategy", strategy},
      {"confidence", confidence},
      {"trial_index", trial_index},
      {"interval", nullptr},
      {"normalized", normalized},
      {"raw_text", raw_text},
      {"parse_status", parse_status},
      {"hint_interval", nullptr},
      {"timestamp", timestamp},
  };
  if (interval) out["interval"] = {interval->lower, interval->upper};
  if (hint_interval) out["hint_interval"] = {hint_interval->lower, hint_interval->upper};
  if (!parse_error.empty()) out["parse_error"] = parse_error;
  return out;
}

namespace {

std::optional<Interval> interval_from_json(const nlohmann::json& value) {
  if (value.is_null()) return std::nullopt;
  if (!value.is_array() || value.size() != 2) throw DataError("interval must be [lower, upper]");
  return Interval{value[0].get<double>(), value[1].get<double>()};
}

}  // namespace

TrialRecord TrialRecord::from_json(const nlohmann::json& json) {
  TrialRecord record;
  try {
    record.question_id = json.at("question_id").get<std::string>();
    record.source = json.value("source", std::string());
    record.ground_truth = json.at("ground_truth").get<double>();
    record.endpoint_id = json.at("endpoint_id").get<std::string>();
    record.strategy = json.at("strategy").get<std::string>();
    record.confidence = json.at("confidence").get<double>();
    record.trial_index = json.at("trial_index").get<int>();
    record.interval = interval_from_json(json.value("interval", nlohmann::json()));
    record.normalized = json.value("normalized", false);
    record.raw_text = json.value("raw_text", std::string());
    record.parse_status = json.value("parse_status", std::string(record.interval ? "ok" : "parse_error"));
    record.parse_error = json.value("parse_error", std::string());
    record.hint_interval = interval_from_json(json.value("hint_interval", nlohmann::json()));
    record.timestamp = json.value("timestamp", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("invalid trial record: {}", e.what()));
  }
  return record;
}

CellKey cell_key(const TrialRecord& record) {
  return {record.question_id, record.endpoint_id, record.strategy, record.confidence,
          record.trial_index};
}

TrialArchive::TrialArchive(std::vector<TrialRecord> records) : records_(std::move(records)) {}

TrialArchive TrialArchive::load(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError(fmt::format("archive not found: {}", path.string()));
  }
  std::ifstream in(path);
  if (!in) throw DataError(fmt::format("cannot read archive {}", path.string()));
  std::vector<TrialRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    auto json = nlohmann::json::parse(line, nullptr, false);
    if (json.is_discarded()) {
      // An interrupted append leaves at most one torn trailing line.
      spdlog::warn("{}:{}: skipping unreadable archive line", path.string(), line_number);
      continue;
    }
    try {
      records.push_back(TrialRecord::from_json(json));
    } catch (const DataError& e) {
      throw DataError(fmt::format("{}:{}: {}", path.string(), line_number, e.what()));
    }
  }
  return TrialArchive(std::move(records));
}

std::vector<std::pair<std::string, std::string>> TrialArchive::configurations() const {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& record : records_) {
    std::pair<std::string, std::string> key{record.endpoint_id, record.strategy};
    if (std::find(out.begin(), out.end(), key) == out.end()) out.push_back(std::move(key));
  }
  return out;
}

std::vector<std::string> TrialArchive::datasets() const {
  std::set<std::string> names;
  for (const auto& record : records_) names.insert(record.source);
  return {names.begin(), names.end()};
}

std::vector<double> TrialArchive::levels() const {
  std::set<double> levels;
  for (const auto& record : records_) levels.insert(record.confidence);
  return {levels.begin(), levels.end()};
}

TrialArchive TrialArchive::filter(std::string_view endpoint_id, std::string_view strategy) const {
  std::vector<TrialRecord> out;
  for (const auto& record : records_) {
    if (record.endpoint_id == endpoint_id && record.strategy == strategy) out.push_back(record);
  }
  return TrialArchive(std::move(out));
}

TrialArchive TrialArchive::filter_dataset(std::string_view dataset) const {
  std::vector<TrialRecord> out;
  for (const auto& record : records_) {
    if (record.source == dataset) out.push_back(record);
  }
  return TrialArchive(std::move(out));
}

CandidatePool::CandidatePool(const TrialArchive& archive) {
  std::map<std::string, Question> grouped;
  std::set<double> levels;
  for (const auto& record : archive.records()) {
    levels.insert(record.confidence);
    auto& question = grouped[record.question_id];
    question.id = record.question_id;
    question.source = record.source;
    question.ground_truth = record.ground_truth;
    if (!record.interval) continue;
    question.entries.push_back(
        {{record.interval->lower, record.interval->upper, record.confidence}, record.trial_index});
  }
  for (auto& [_, question] : grouped) {
    std::sort(question.entries.begin(), question.entries.end(), [](const Entry& a, const Entry& b) {
      return std::tie(a.candidate.confidence, a.trial_index) <
             std::tie(b.candidate.confidence, b.trial_index);
    });
    questions_.push_back(std::move(question));
  }
  levels_.assign(levels.begin(), levels.end());
}

const CandidatePool::Question* CandidatePool::find(std::string_view question_id) const {
  auto it = std::lower_bound(questions_.begin(), questions_.end(), question_id,
                             [](const Question& q, std::string_view id) { return q.id < id; });
  if (it == questions_.end() || it->id != question_id) return nullptr;
  return &*it;
}

std::string RefineSetting::label() const { return kind == Kind::Single ? "single" : "mixed"; }

std::optional<std::vector<Candidate>> sample_for_refinement(const CandidatePool::Question& question,
                                                            const RefineSetting& setting,
                                                            std::size_t k, std::uint64_t seed) {
  if (k == 0) throw ConfigError("refinement sample size must be positive");
  std::vector<Candidate> eligible;
  for (const auto& entry : question.entries) {
    if (setting.kind == RefineSetting::Kind::Single &&
        entry.candidate.confidence != setting.confidence) {
      continue;
    }
    eligible.push_back(entry.candidate);
  }
  if (eligible.size() < k) return std::nullopt;
  Rng rng(seed);
  rng.shuffle(eligible);
  eligible.resize(k);
  return eligible;
}

std::optional<std::vector<Candidate>> sample_for_refinement(const CandidatePool& pool,
                                                            std::string_view question_id,
                                                            const RefineSetting& setting,
                                                            std::size_t k, std::uint64_t seed) {
  const auto* question = pool.find(question_id);
  if (question == nullptr) return std::nullopt;
  return sample_for_refinement(*question, setting, k, seed);
}

std::string trial_tag(std::uint64_t seed, const Strategy& strategy, double confidence, int trial) {
  return fmt::format("s{}/{}/c{}/t{}", seed, strategy.label(), format_number(confidence), trial);
}

Interval question_hint(const QuestionRecord& question, MisleadMode mode, std::uint64_t seed) {
  return make_misleading_interval(question.ground_truth, mode,
                                  derive_seed(seed, "hint", to_string(mode), question.id));
}

void parallel_for(std::size_t n, int workers, const std::function<void(std::size_t)>& task) {
  const std::size_t threads = std::min<std::size_t>(std::max(workers, 1), n);
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) task(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr error;
  std::mutex error_mutex;
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&] {
      while (!failed.load()) {
        const std::size_t i = next.fetch_add(1);
        if (i >= n) return;
        try {
          task(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (!error) error = std::current_exception();
          failed = true;
        }
      }
    });
  }
  for (auto& thread : pool) thread.join();
  if (error) std::rethrow_exception(error);
}

namespace {

struct Cell {
  const QuestionRecord* question;
  const EndpointBinding* endpoint;
  const Strategy* strategy;
  double confidence;
  int trial;
};

struct HardFailure {
  nlohmann::json line;
};

using CellResult = std::variant<std::monostate, TrialRecord, HardFailure>;

std::ofstream open_append(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::app);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  return out;
}

}  // namespace

RunOutcome execute_run(const RunConfig& config, const Corpus& corpus,
                       const std::vector<EndpointBinding>& endpoints, const RunPaths& paths,
                       const TemplateSet& templates) {
  config.validate();
  if (corpus.empty()) throw DataError("run needs a non-empty corpus");
  if (endpoints.empty()) throw ConfigError("run needs at least one endpoint");
  for (std::size_t i = 0; i < endpoints.size(); ++i) {
    if (!endpoints[i].gateway) throw ConfigError("endpoint without a gateway");
    for (std::size_t j = i + 1; j < endpoints.size(); ++j) {
      if (endpoints[i].id == endpoints[j].id) {
        throw ConfigError(fmt::format("endpoint id '{}' listed twice", endpoints[i].id));
      }
    }
    // A missing credential would fail every cell; stop before the first one.
    endpoints[i].gateway->backend().check_ready();
  }

  std::set<CellKey> done;
  if (std::filesystem::exists(paths.archive)) {
    const TrialArchive existing = TrialArchive::load(paths.archive);
    for (const auto& record : existing.records()) {
      done.insert(cell_key(record));
    }
  }

  std::vector<std::size_t> order(corpus.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng(derive_seed(config.seed, "question-order")).shuffle(order);

  std::map<std::string, Interval> hints;
  if (config.sampling.kind == SamplingKind::Misleading) {
    for (const auto& question : corpus) {
      hints[question.id] = question_hint(question, config.sampling.mode, config.seed);
    }
  }

  RunOutcome outcome;
  std::vector<Cell> cells;
  for (std::size_t index : order) {
    const QuestionRecord& question = corpus[index];
    for (const auto& endpoint : endpoints) {
      for (const auto& strategy : config.strategies) {
        const std::string label = strategy.label();
        for (double c : config.confidence_levels) {
          for (int t = 0; t < config.trials_per_cell; ++t) {
            ++outcome.cells;
            if (done.count({question.id, endpoint.id, label, c, t}) != 0) {
              ++outcome.resumed;
              continue;
            }
            cells.push_back({&question, &endpoint, &strategy, c, t});
          }
        }
      }
    }
  }

  std::ofstream archive = open_append(paths.archive);
  std::ofstream failures = open_append(paths.failures);

  std::vector<CellResult> results(cells.size());
  std::mutex commit_mutex;
  std::size_t next_commit = 0;

  auto run_cell = [&](std::size_t i) {
    const Cell& cell = cells[i];
    PromptSpec spec;
    spec.style = cell.strategy->style;
    spec.confidence = cell.confidence;
    spec.question = cell.question;
    std::optional<Interval> hint;
    if (cell.strategy->hint) {
      hint = hints.at(cell.question->id);
      spec.hint = Hint{*cell.strategy->hint, *hint};
    }

    CompletionRequest request;
    request.prompt = render_prompt(spec, templates);
    request.trial_tag = trial_tag(config.seed, *cell.strategy, cell.confidence, cell.trial);
    request.kind = RequestKind::Generation;
    request.question = cell.question;
    request.confidence = cell.confidence;

    TrialRecord record;
    record.question_id = cell.question->id;
    record.source = cell.question->source;
    record.ground_truth = cell.question->ground_truth;
    record.endpoint_id = cell.endpoint->id;
    record.strategy = cell.strategy->label();
    record.confidence = cell.confidence;
    record.trial_index = cell.trial;
    record.hint_interval = hint;

    CellResult result;
    try {
      const CompletionRecord completion = cell.endpoint->gateway->complete(request);
      record.raw_text = completion.raw_text;
      record.timestamp = completion.timestamp;
      try {
        const IntervalAnswer answer = parse_interval(completion.raw_text);
        record.interval = answer.interval();
        record.normalized = answer.normalized;
        record.parse_status = "ok";
      } catch (const ParseError& e) {
        record.parse_status = "parse_error";
        record.parse_error = e.what();
      }
      result = std::move(record);
    } catch (const GatewayError& e) {
      nlohmann::json line = record.to_json();
      line.erase("interval");
      line.erase("normalized");
      line.erase("raw_text");
      line.erase("parse_status");
      line["error"] = e.what();
      result = HardFailure{std::move(line)};
    }

    std::lock_guard lock(commit_mutex);
    results[i] = std::move(result);
    while (next_commit < results.size() &&
           !std::holds_alternative<std::monostate>(results[next_commit])) {
      auto& ready = results[next_commit];
      if (auto* trial = std::get_if<TrialRecord>(&ready)) {
        archive << trial->to_json().dump() << '\n';
        ++outcome.written;
        if (!trial->parsed()) ++outcome.parse_failures;
      } else {
        failures << std::get<HardFailure>(ready).line.dump() << '\n';
        ++outcome.hard_failures;
      }
      ready = std::monostate{};
      ++next_commit;
    }
    archive.flush();
    failures.flush();
  };

  parallel_for(cells.size(), config.concurrency_limit, run_cell);

  if (outcome.hard_failures > 0) {
    spdlog::warn("{} cell(s) failed at the gateway; see {}", outcome.hard_failures,
                 paths.failures.string());
  }
  return outcome;
}

}  // namespace overprec
