#include "overprec/pipeline.hpp"

#include <fstream>
#include <set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "overprec/error.hpp"
#include "overprec/report.hpp"
#include "overprec/simulator.hpp"

namespace overprec {
namespace {

void write_text(const std::filesystem::path& path, const std::string& text) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::trunc | std::ios::binary);
  if (!out) throw DataError(fmt::format("cannot write {}", path.string()));
  out << text;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& json) {
  write_text(path, json.dump(2) + "\n");
}

// Answer configurations selected for refinement, in archive order.
std::vector<std::pair<std::string, std::string>> refine_targets(const AppConfig& config,
                                                                const TrialArchive& archive) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto& configuration : archive.configurations()) {
    const auto& wanted = config.refine.strategies;
    if (!wanted.empty() &&
        std::find(wanted.begin(), wanted.end(), configuration.second) == wanted.end()) {
      continue;
    }
    out.push_back(configuration);
  }
  return out;
}

std::size_t sample_size(const AppConfig& config, RefineSetting::Kind kind) {
  return kind == RefineSetting::Kind::Single ? config.refine.k_single : config.refine.k_mixed;
}

}  // namespace

OutputLayout::OutputLayout(const std::filesystem::path& root_dir)
    : root(root_dir),
      corpus(root_dir / "corpus" / "corpus.jsonl"),
      corpus_summary(root_dir / "corpus" / "summary.csv"),
      run_archive(root_dir / "run" / "archive.jsonl"),
      run_failures(root_dir / "run" / "failures.jsonl"),
      cache(root_dir / "cache" / "completions.jsonl"),
      aggregation(root_dir / "refine" / "aggregation.jsonl"),
      self_refine(root_dir / "refine" / "self_refine.jsonl"),
      sweep(root_dir / "refine" / "self_refine_sweep.jsonl"),
      evaluate_dir(root_dir / "evaluate"),
      report_dir(root_dir / "report") {}

EndpointRuntime::EndpointRuntime(const AppConfig& config, const Corpus& corpus,
                                 const OutputLayout& layout) {
  auto cache = config.gateway.cache ? std::make_shared<CompletionCache>(layout.cache)
                                    : std::make_shared<CompletionCache>();
  auto limiter = config.gateway.requests_per_minute > 0
                     ? std::make_shared<RateLimiter>(config.gateway.requests_per_minute)
                     : nullptr;

  for (const auto& endpoint : config.endpoints) {
    std::shared_ptr<Backend> backend;
    switch (endpoint.kind) {
      case EndpointKind::Http:
        backend = std::make_shared<HttpBackend>(endpoint.http);
        break;
      case EndpointKind::Simulator:
        backend = std::make_shared<SimulatedBackend>(endpoint.profile);
        break;
      case EndpointKind::Mock: {
        auto server = std::make_unique<MockServer>(simulating_handler(endpoint.profile, corpus));
        if (!endpoint.fail_next.empty()) server->fail_next(endpoint.fail_next);
        ModelEndpoint http = endpoint.http;
        http.base_url = server->base_url();
        http.auth_env.clear();
        spdlog::info("mock endpoint '{}' listening at {}", endpoint.id, http.base_url);
        backend = std::make_shared<HttpBackend>(http);
        servers_.push_back(std::move(server));
        break;
      }
    }
    bindings_.push_back(
        {endpoint.id, std::make_shared<Gateway>(backend, cache, config.gateway.retry, limiter)});
  }
}

Gateway& EndpointRuntime::gateway(const std::string& id) const {
  for (const auto& binding : bindings_) {
    if (binding.id == id) return *binding.gateway;
  }
  throw ConfigError(fmt::format("no endpoint with id '{}'", id));
}

std::size_t EndpointRuntime::backend_calls() const {
  std::size_t total = 0;
  for (const auto& binding : bindings_) total += binding.gateway->backend_calls();
  return total;
}

TemplateSet templates_for(const AppConfig& config) {
  TemplateSet templates =
      config.template_dir.empty() ? TemplateSet::defaults() : TemplateSet::load_dir(config.template_dir);
  templates.phrasing = config.phrasing;
  return templates;
}

Corpus load_run_corpus(const AppConfig& config, const OutputLayout& layout) {
  std::filesystem::path path = config.corpus_path;
  if (path.empty()) {
    path = layout.corpus;
    if (!std::filesystem::exists(path)) {
      throw DataError(fmt::format("corpus not found: {} (set corpus.path or run ingest first)",
                                  path.string()));
    }
  }
  auto loaded = load_corpus(path);
  if (!loaded.rejected.empty()) {
    spdlog::warn("{}: {} line(s) rejected", path.string(), loaded.rejected.size());
  }
  return std::move(loaded.records);
}

nlohmann::json make_manifest(const std::string& command, const AppConfig& config,
                             nlohmann::json outputs) {
  return {
      {"tool", "overprec"},
      {"version", OVERPREC_VERSION},
      {"command", command},
      {"seed", config.seed},
      {"config", config.to_json()},
      {"outputs", std::move(outputs)},
  };
}

void cmd_ingest(const AppConfig& config) {
  if (config.corpus_inputs.empty()) throw ConfigError("corpus.inputs lists no files to ingest");
  const OutputLayout layout(config.output_dir);

  std::vector<Corpus> corpora;
  nlohmann::json rejected = nlohmann::json::object();
  for (const auto& input : config.corpus_inputs) {
    auto loaded = load_corpus(input.path);
    if (!input.label.empty()) {
      for (auto& record : loaded.records) record.source = input.label;
    }
    rejected[input.path.string()] = loaded.rejected.size();
    corpora.push_back(std::move(loaded.records));
  }

  Corpus corpus;
  if (!config.merge_label.empty()) {
    corpus = merge_sources(corpora, config.merge_label);
  } else {
    std::set<std::string> ids;
    for (auto& part : corpora) {
      for (auto& record : part) {
        if (!ids.insert(record.id).second) {
          throw DataError(fmt::format("duplicate question id '{}' across inputs; set corpus.merge_label",
                                      record.id));
        }
        corpus.push_back(std::move(record));
      }
    }
  }
  write_corpus(layout.corpus, corpus);

  std::map<std::string, Corpus> by_source;
  for (const auto& record : corpus) by_source[record.source].push_back(record);
  std::string summary;
  for (const auto& [source, records] : by_source) {
    const std::string csv = summary_csv(summarize(records, source));
    summary += summary.empty() ? csv : csv.substr(csv.find('\n') + 1);
  }
  write_text(layout.corpus_summary, summary);
  write_json(layout.corpus.parent_path() / "manifest.json",
             make_manifest("ingest", config,
                           {{"corpus", layout.corpus.string()},
                            {"summary", layout.corpus_summary.string()},
                            {"records", corpus.size()},
                            {"rejected", rejected}}));
  fmt::print("ingest: {} records written to {}\n{}", corpus.size(), layout.corpus.string(), summary);
}

void cmd_run(const AppConfig& config) {
  const OutputLayout layout(config.output_dir);
  const Corpus corpus = load_run_corpus(config, layout);
  const EndpointRuntime runtime(config, corpus, layout);
  const RunOutcome outcome = execute_run(config.run, corpus, runtime.bindings(),
                                         {layout.run_archive, layout.run_failures},
                                         templates_for(config));
  write_json(layout.run_archive.parent_path() / "manifest.json",
             make_manifest("run", config,
                           {{"archive", layout.run_archive.string()},
                            {"failures", layout.run_failures.string()},
                            {"questions", corpus.size()},
                            {"cells", outcome.cells}}));
  fmt::print("run: {} cells, {} written, {} already archived, {} gateway failures, {} unparseable, "
             "{} backend calls\n",
             outcome.cells, outcome.written, outcome.resumed, outcome.hard_failures,
             outcome.parse_failures, runtime.backend_calls());
}

void cmd_refine(const AppConfig& config) {
  const OutputLayout layout(config.output_dir);
  const TrialArchive archive = TrialArchive::load(layout.run_archive);
  const auto schemes = config.refine.schemes.empty() ? all_schemes() : config.refine.schemes;

  std::vector<RefinedRecord> records;
  for (const auto& [model, strategy] : refine_targets(config, archive)) {
    const TrialArchive subset = archive.filter(model, strategy);
    for (SchemeKind kind : schemes) {
      for (auto setting : config.refine.settings) {
        auto part = run_aggregation_simulations(
            subset, {kind, config.refine.ilwa_epsilon},
            {setting, sample_size(config, setting), config.refine.n_sims, config.seed});
        records.insert(records.end(), std::make_move_iterator(part.begin()),
                       std::make_move_iterator(part.end()));
      }
    }
  }
  write_refined(layout.aggregation, records);
  write_json(layout.aggregation.parent_path() / "manifest_aggregation.json",
             make_manifest("refine", config,
                           {{"archive", layout.aggregation.string()}, {"records", records.size()}}));
  fmt::print("refine: {} aggregated intervals written to {}\n", records.size(),
             layout.aggregation.string());
}

void cmd_self_refine(const AppConfig& config) {
  const OutputLayout layout(config.output_dir);
  const TrialArchive archive = TrialArchive::load(layout.run_archive);
  const Corpus corpus = load_run_corpus(config, layout);
  const EndpointRuntime runtime(config, corpus, layout);
  const std::string model_id =
      config.refine.model.empty() ? config.endpoints.front().id : config.refine.model;
  Gateway& gateway = runtime.gateway(model_id);
  gateway.backend().check_ready();
  const TemplateSet templates = templates_for(config);

  std::vector<RefinedRecord> records;
  std::vector<RefinedRecord> sweep;
  for (const auto& [model, strategy] : refine_targets(config, archive)) {
    const TrialArchive subset = archive.filter(model, strategy);
    for (auto setting : config.refine.settings) {
      SelfRefineOptions options{setting, sample_size(config, setting), config.seed,
                                config.run.concurrency_limit};
      auto part = run_self_refinement(gateway, subset, corpus, options, templates);
      records.insert(records.end(), std::make_move_iterator(part.begin()),
                     std::make_move_iterator(part.end()));
    }
    if (!config.refine.sweep.e_values.empty()) {
      SelfRefineOptions options{config.refine.sweep.setting, 1, config.seed,
                                config.run.concurrency_limit};
      auto part = sweep_refinement_examples(gateway, subset, corpus, config.refine.sweep.e_values,
                                            options, templates);
      sweep.insert(sweep.end(), std::make_move_iterator(part.begin()),
                   std::make_move_iterator(part.end()));
    }
  }
  write_refined(layout.self_refine, records);
  nlohmann::json outputs = {{"archive", layout.self_refine.string()}, {"records", records.size()}};
  if (!config.refine.sweep.e_values.empty()) {
    write_refined(layout.sweep, sweep);
    outputs["sweep"] = layout.sweep.string();
    outputs["sweep_records"] = sweep.size();
  }
  write_json(layout.self_refine.parent_path() / "manifest_self_refine.json",
             make_manifest("self-refine", config, outputs));
  fmt::print("self-refine: {} records ({} in sweep), {} backend calls via '{}'\n", records.size(),
             sweep.size(), runtime.backend_calls(), model_id);
}

ReportBundle collect_reports(const AppConfig& config, const OutputLayout& layout) {
  ReportBundle bundle;
  const TrialArchive archive = TrialArchive::load(layout.run_archive);
  bundle.generation = evaluate_generation(archive, config.evaluate.n_sims, config.seed);
  if (std::filesystem::exists(layout.aggregation)) {
    bundle.aggregation = report_from_refined(load_refined(layout.aggregation));
  }
  if (std::filesystem::exists(layout.self_refine)) {
    bundle.self_refine = report_from_refined(load_refined(layout.self_refine));
  }
  if (std::filesystem::exists(layout.sweep)) {
    bundle.sweep = report_from_refined(load_refined(layout.sweep));
  }
  return bundle;
}

namespace {

nlohmann::json bundle_json(const ReportBundle& bundle) {
  return {{"generation", reports_json(bundle.generation)},
          {"aggregation", reports_json(bundle.aggregation)},
          {"self_refine", reports_json(bundle.self_refine)},
          {"sweep", reports_json(bundle.sweep)}};
}

}  // namespace

void cmd_evaluate(const AppConfig& config) {
  const OutputLayout layout(config.output_dir);
  const ReportBundle bundle = collect_reports(config, layout);
  write_json(layout.evaluate_dir / "metrics.json", bundle_json(bundle));
  write_json(layout.evaluate_dir / "manifest.json",
             make_manifest("evaluate", config,
                           {{"metrics", (layout.evaluate_dir / "metrics.json").string()}}));
  for (const auto& report : bundle.generation) {
    fmt::print("{} | {} | {}: hit-avg {} corr {} parse failures {}\n", report.dataset, report.model,
               report.strategy, format_percent(report.hit_avg.mean),
               format_correlation(report.correlation.mean),
               format_percent(report.parse_failure_rate));
  }
}

void cmd_report(const AppConfig& config) {
  const OutputLayout layout(config.output_dir);
  const ReportBundle bundle = collect_reports(config, layout);
  const TrialArchive archive = TrialArchive::load(layout.run_archive);
  if (bundle.aggregation.empty()) {
    spdlog::warn("no aggregation archive at {}; aggregation tables will be empty",
                 layout.aggregation.string());
  }
  if (bundle.self_refine.empty()) {
    spdlog::warn("no self-refinement archive at {}; self-refinement tables will be empty",
                 layout.self_refine.string());
  }

  const auto& dir = layout.report_dir;
  std::vector<std::string> files;
  auto emit = [&](const std::string& name, const std::string& text) {
    write_text(dir / name, text);
    files.push_back((dir / name).string());
  };
  emit("generation.csv", generation_csv(bundle.generation));
  emit("aggregation_single.csv", aggregation_single_csv(bundle.aggregation));
  emit("aggregation_mixed.csv", aggregation_mixed_csv(bundle.aggregation));
  emit("self_refine_single.csv", self_refine_single_csv(bundle.self_refine));
  emit("self_refine_mixed.csv", self_refine_mixed_csv(bundle.self_refine));
  emit("ds_ils.csv", ds_ils_csv(bundle.generation));
  const auto edges =
      config.evaluate.scale_edges.empty() ? default_scale_edges() : config.evaluate.scale_edges;
  emit("scale_bins.csv", scale_bins_csv(archive, edges));
  if (!bundle.sweep.empty()) emit("refine_sweep.csv", refine_sweep_csv(bundle.sweep));
  write_json(dir / "report.json", bundle_json(bundle));
  files.push_back((dir / "report.json").string());
  write_json(dir / "manifest.json", make_manifest("report", config, {{"files", files}}));
  for (const auto& file : files) fmt::print("{}\n", file);
}

}  // namespace overprec
