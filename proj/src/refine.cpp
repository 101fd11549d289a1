#include "overprec/refine.hpp"

#include <algorithm>
#include <fstream>
#include <map>
#include <tuple>
#include <unordered_map>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "overprec/error.hpp"
#include "overprec/numeric.hpp"
#include "overprec/rng.hpp"

namespace overprec {
namespace {

std::optional<Interval> interval_field(const nlohmann::json& json, const char* key) {
  if (!json.contains(key) || json[key].is_null()) return std::nullopt;
  const auto& value = json[key];
  if (!value.is_array() || value.size() != 2) {
    throw DataError(fmt::format("'{}' must be [lower, upper]", key));
  }
  return Interval{value[0].get<double>(), value[1].get<double>()};
}

std::optional<bool> bool_field(const nlohmann::json& json, const char* key) {
  if (!json.contains(key) || json[key].is_null()) return std::nullopt;
  return json[key].get<bool>();
}

std::pair<std::string, std::string> single_configuration(const TrialArchive& archive) {
  const auto configs = archive.configurations();
  if (configs.size() != 1) {
    throw ConfigError(fmt::format(
        "expected answers of exactly one (endpoint, strategy) configuration, found {}",
        configs.size()));
  }
  return configs.front();
}

std::uint64_t sample_seed(std::uint64_t seed, const std::string& model, const std::string& strategy,
                          const RefineSetting& setting, std::size_t simulation,
                          const std::string& question_id) {
  return derive_seed(seed, "sample", model, strategy, setting.label(),
                     format_number(setting.confidence), std::uint64_t{simulation}, question_id);
}

std::vector<RefineSetting> settings_for(RefineSetting::Kind kind, const std::vector<double>& levels) {
  std::vector<RefineSetting> out;
  if (kind == RefineSetting::Kind::Mixed) {
    out.push_back({RefineSetting::Kind::Mixed, kAllLevels});
  } else {
    for (double c : levels) out.push_back({RefineSetting::Kind::Single, c});
  }
  return out;
}

int method_rank(const std::string& method) {
  static const std::vector<std::string> order = {"answers", "CWA",    "LWA",     "MIA",
                                                 "Union",   "iLWA",   "chosen", "proposed"};
  auto it = std::find(order.begin(), order.end(), method);
  return static_cast<int>(it - order.begin());
}

}  // namespace

nlohmann::json RefinedRecord::to_json() const {
  nlohmann::json out = {
      {"phase", phase},
      {"dataset", dataset},
      {"model", model},
      {"strategy", strategy},
      {"method", method},
      {"setting", setting},
      {"confidence", confidence},
      {"examples", examples},
      {"simulation", simulation},
      {"question_id", question_id},
      {"ground_truth", ground_truth},
      {"status", status},
      {"interval", nullptr},
      {"inputs", inputs},
  };
  if (interval) out["interval"] = {interval->lower, interval->upper};
  if (chosen_in_candidates) out["chosen_in_candidates"] = *chosen_in_candidates;
  if (chosen_bounds_in_candidates) out["chosen_bounds_in_candidates"] = *chosen_bounds_in_candidates;
  if (!error.empty()) out["error"] = error;
  return out;
}

RefinedRecord RefinedRecord::from_json(const nlohmann::json& json) {
  RefinedRecord record;
  try {
    record.phase = json.at("phase").get<std::string>();
    record.dataset = json.at("dataset").get<std::string>();
    record.model = json.at("model").get<std::string>();
    record.strategy = json.at("strategy").get<std::string>();
    record.method = json.at("method").get<std::string>();
    record.setting = json.at("setting").get<std::string>();
    record.confidence = json.at("confidence").get<double>();
    record.examples = json.at("examples").get<std::size_t>();
    record.simulation = json.at("simulation").get<int>();
    record.question_id = json.at("question_id").get<std::string>();
    record.ground_truth = json.at("ground_truth").get<double>();
    record.status = json.at("status").get<std::string>();
    record.interval = interval_field(json, "interval");
    record.inputs = json.value("inputs", std::size_t{0});
    record.chosen_in_candidates = bool_field(json, "chosen_in_candidates");
    record.chosen_bounds_in_candidates = bool_field(json, "chosen_bounds_in_candidates");
    record.error = json.value("error", std::string());
  } catch (const nlohmann::json::exception& e) {
    throw DataError(fmt::format("invalid refined record: {}", e.what()));
  }
  return record;
}

std::vector<RefinedRecord> load_refined(const std::filesystem::path& path) {
  if (!std::filesystem::exists(path)) {
    throw DataError(fmt::format("archive not found: {}", path.string()));
  }
  std::ifstream in(path);
  std::vector<RefinedRecord> records;
  std::string line;
  std::size_t line_number = 0;
  while (std::getline(in, line)) {
    ++line_number;
    if (trim(line).empty()) continue;
    auto json = nlohmann::json::parse(line, nullptr, false);
    if (json.is_discarded()) {
      throw DataError(fmt::format("{}:{}: unreadable record", path.string(), line_number));
    }
    records.push_back(RefinedRecord::from_json(json));
  }
  return records;
}

void write_refined(const std::filesystem::path& path, std::span<const RefinedRecord> records) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  for (const auto& record : records) out << record.to_json().dump() << '\n';
}

std::vector<RefinedRecord> run_aggregation_simulations(const TrialArchive& archive,
                                                       AggregationScheme scheme,
                                                       const SimulationOptions& options) {
  if (options.k == 0) throw ConfigError("aggregation sample size must be positive");
  if (options.n_sims == 0) throw ConfigError("at least one simulation is required");
  if (archive.empty()) return {};
  const auto [model, strategy] = single_configuration(archive);
  const CandidatePool pool(archive);
  const auto settings = settings_for(options.setting, pool.levels());

  std::vector<RefinedRecord> out;
  for (std::size_t sim = 0; sim < options.n_sims; ++sim) {
    for (const auto& setting : settings) {
      for (const auto& question : pool.questions()) {
        RefinedRecord record;
        record.phase = "aggregation";
        record.dataset = question.source;
        record.model = model;
        record.strategy = strategy;
        record.method = std::string(to_string(scheme.kind));
        record.setting = setting.label();
        record.confidence = setting.confidence;
        record.examples = options.k;
        record.simulation = static_cast<int>(sim);
        record.question_id = question.id;
        record.ground_truth = question.ground_truth;

        const auto sample = sample_for_refinement(
            question, setting, options.k,
            sample_seed(options.seed, model, strategy, setting, sim, question.id));
        if (!sample) {
          record.status = "skipped";
        } else {
          const auto aggregated = aggregate(*sample, scheme);
          record.status = "ok";
          record.interval = aggregated.interval();
          record.inputs = aggregated.inputs_count;
        }
        out.push_back(std::move(record));
      }
    }
  }
  return out;
}

std::vector<MetricReport> evaluate_generation(const TrialArchive& archive, std::size_t n_sims,
                                              std::uint64_t seed) {
  std::vector<MetricReport> reports;
  for (const auto& [model, strategy] : archive.configurations()) {
    const TrialArchive subset = archive.filter(model, strategy);
    auto records = run_aggregation_simulations(
        subset, {SchemeKind::MIA}, {RefineSetting::Kind::Single, 1, n_sims, seed});
    for (auto& record : records) {
      record.phase = "generation";
      record.method = "answers";
    }
    for (auto& report : report_from_refined(records)) {
      std::size_t total = 0;
      std::size_t failed = 0;
      for (const auto& trial : subset.records()) {
        if (trial.source != report.dataset) continue;
        ++total;
        if (!trial.parsed()) ++failed;
      }
      if (total > 0) report.parse_failure_rate = static_cast<double>(failed) / static_cast<double>(total);
      reports.push_back(std::move(report));
    }
  }
  return reports;
}

RefinementOutcome self_refine(Gateway& gateway, const QuestionRecord& question,
                              std::span<const Candidate> candidates, std::size_t e,
                              const std::string& trial_tag, const TemplateSet& templates) {
  CompletionRequest request;
  request.prompt = render_refine_prompt(question, candidates, e, templates);
  request.trial_tag = trial_tag;
  request.kind = RequestKind::Refinement;
  request.question = &question;
  request.candidates.assign(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(e));

  const CompletionRecord completion = gateway.complete(request);
  std::vector<Interval> shown;
  for (const auto& candidate : request.candidates) shown.push_back(candidate.interval());
  return parse_refinement(completion.raw_text, shown);
}

std::vector<RefinedRecord> run_self_refinement(Gateway& gateway, const TrialArchive& archive,
                                               const Corpus& corpus,
                                               const SelfRefineOptions& options,
                                               const TemplateSet& templates) {
  if (options.e == 0) throw ConfigError("self-refinement needs at least one example");
  if (archive.empty()) return {};
  const auto configuration = single_configuration(archive);
  const std::string& model = configuration.first;
  const std::string& strategy = configuration.second;
  const CandidatePool pool(archive);
  const auto settings = settings_for(options.setting, pool.levels());

  std::unordered_map<std::string, const QuestionRecord*> by_id;
  for (const auto& question : corpus) by_id.emplace(question.id, &question);

  struct Task {
    const CandidatePool::Question* question;
    RefineSetting setting;
  };
  std::vector<Task> tasks;
  for (const auto& setting : settings) {
    for (const auto& question : pool.questions()) {
      if (by_id.count(question.id) == 0) {
        throw DataError(fmt::format("question '{}' is in the archive but not the corpus", question.id));
      }
      tasks.push_back({&question, setting});
    }
  }

  std::vector<std::pair<RefinedRecord, RefinedRecord>> results(tasks.size());
  parallel_for(tasks.size(), options.concurrency, [&](std::size_t i) {
    const Task& task = tasks[i];
    RefinedRecord base;
    base.phase = "self_refine";
    base.dataset = task.question->source;
    base.model = model;
    base.strategy = strategy;
    base.setting = task.setting.label();
    base.confidence = task.setting.confidence;
    base.examples = options.e;
    base.question_id = task.question->id;
    base.ground_truth = task.question->ground_truth;
    RefinedRecord chosen = base;
    RefinedRecord proposed = base;
    chosen.method = "chosen";
    proposed.method = "proposed";

    const auto sample = sample_for_refinement(
        *task.question, task.setting, options.e,
        sample_seed(options.seed, model, strategy, task.setting, 0, task.question->id));
    if (!sample) {
      chosen.status = proposed.status = "skipped";
    } else {
      const std::string tag =
          fmt::format("s{}/refine/{}/{}/{}/c{}/e{}", options.seed, model, strategy,
                      task.setting.label(), format_number(task.setting.confidence), options.e);
      try {
        const auto outcome =
            self_refine(gateway, *by_id.at(task.question->id), *sample, options.e, tag, templates);
        chosen.status = proposed.status = "ok";
        chosen.inputs = proposed.inputs = options.e;
        chosen.interval = outcome.chosen.interval();
        proposed.interval = outcome.proposed.interval();
        chosen.chosen_in_candidates = outcome.chosen_in_candidates;
        chosen.chosen_bounds_in_candidates = outcome.chosen_bounds_in_candidates;
      } catch (const ParseError& e) {
        chosen.status = proposed.status = "parse_error";
        chosen.error = proposed.error = e.what();
      } catch (const GatewayError& e) {
        chosen.status = proposed.status = "gateway_error";
        chosen.error = proposed.error = e.what();
      }
    }
    results[i] = {std::move(chosen), std::move(proposed)};
  });

  std::vector<RefinedRecord> out;
  out.reserve(results.size() * 2);
  for (auto& [chosen, proposed] : results) out.push_back(std::move(chosen));
  for (auto& [chosen, proposed] : results) out.push_back(std::move(proposed));
  return out;
}

std::vector<RefinedRecord> sweep_refinement_examples(Gateway& gateway, const TrialArchive& archive,
                                                     const Corpus& corpus,
                                                     std::span<const std::size_t> e_values,
                                                     SelfRefineOptions options,
                                                     const TemplateSet& templates) {
  if (e_values.empty()) throw ConfigError("example sweep needs at least one value of e");
  const std::size_t largest = *std::max_element(e_values.begin(), e_values.end());
  const CandidatePool pool(archive);
  std::size_t available = 0;
  for (const auto& setting : settings_for(options.setting, pool.levels())) {
    for (const auto& question : pool.questions()) {
      std::size_t count = 0;
      for (const auto& entry : question.entries) {
        if (setting.kind == RefineSetting::Kind::Mixed ||
            entry.candidate.confidence == setting.confidence) {
          ++count;
        }
      }
      available = std::max(available, count);
    }
  }
  if (largest > available) {
    throw ConfigError(fmt::format("e = {} exceeds the {} answers available per question", largest,
                                  available));
  }

  std::vector<RefinedRecord> out;
  for (std::size_t e : e_values) {
    options.e = e;
    auto records = run_self_refinement(gateway, archive, corpus, options, templates);
    out.insert(out.end(), std::make_move_iterator(records.begin()),
               std::make_move_iterator(records.end()));
  }
  return out;
}

std::vector<MetricReport> report_from_refined(std::span<const RefinedRecord> records) {
  using Key = std::tuple<std::string, std::string, std::string, std::string, std::string, int,
                         std::size_t, std::string>;
  std::map<Key, std::vector<const RefinedRecord*>> groups;
  for (const auto& record : records) {
    Key key{record.phase,   record.dataset,       record.model,    record.strategy,
            record.setting, method_rank(record.method), record.examples, record.method};
    groups[key].push_back(&record);
  }

  std::vector<MetricReport> reports;
  for (const auto& [key, members] : groups) {
    MetricReport report;
    report.phase = std::get<0>(key);
    report.dataset = std::get<1>(key);
    report.model = std::get<2>(key);
    report.strategy = std::get<3>(key);
    report.setting = std::get<4>(key);
    report.examples = std::get<6>(key);
    report.method = std::get<7>(key);

    std::map<int, std::map<double, EvaluatedSet>> by_sim;
    std::size_t ok = 0;
    std::size_t failed = 0;
    for (const auto* record : members) {
      auto& sets = by_sim[record->simulation];
      if (record->status == "ok" && record->interval) {
        auto& set = sets[record->confidence];
        set.confidence = record->confidence;
        set.items.push_back({record->question_id, record->ground_truth, *record->interval});
        ++ok;
      } else if (record->status == "skipped") {
        if (record->simulation == 0) ++report.skipped;
      } else {
        ++failed;
      }
    }

    std::vector<SimulationMetrics> runs;
    for (const auto& [sim, sets] : by_sim) {
      std::vector<EvaluatedSet> list;
      for (const auto& [_, set] : sets) list.push_back(set);
      if (list.empty()) {
        spdlog::warn("{} {} {} {}: simulation {} has no answers", report.phase, report.dataset,
                     report.method, report.setting, sim);
        continue;
      }
      runs.push_back(evaluate_sets(list));
    }
    summarize_simulations(report, runs);
    if (report.phase == "self_refine" && ok + failed > 0) {
      report.parse_failure_rate = static_cast<double>(failed) / static_cast<double>(ok + failed);
    }
    reports.push_back(std::move(report));
  }
  return reports;
}

}  // namespace overprec
