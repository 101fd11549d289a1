#pragma once

#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include <json.hpp>

#include "overprec/config.hpp"
#include "overprec/mock_server.hpp"
#include "overprec/orchestrator.hpp"
#include "overprec/refine.hpp"

namespace overprec {

/// Where each stage reads and writes under the output directory.
struct OutputLayout {
  explicit OutputLayout(const std::filesystem::path& root);

  std::filesystem::path root;
  std::filesystem::path corpus;          // corpus/corpus.jsonl
  std::filesystem::path corpus_summary;  // corpus/summary.csv
  std::filesystem::path run_archive;     // run/archive.jsonl
  std::filesystem::path run_failures;    // run/failures.jsonl
  std::filesystem::path cache;           // cache/completions.jsonl
  std::filesystem::path aggregation;     // refine/aggregation.jsonl
  std::filesystem::path self_refine;     // refine/self_refine.jsonl
  std::filesystem::path sweep;           // refine/self_refine_sweep.jsonl
  std::filesystem::path evaluate_dir;    // evaluate/
  std::filesystem::path report_dir;      // report/
};

/// Gateways for every configured endpoint, sharing one cache and one rate
/// limiter. Mock endpoints get a local server for the lifetime of this object.
class EndpointRuntime {
 public:
  EndpointRuntime(const AppConfig& config, const Corpus& corpus, const OutputLayout& layout);

  const std::vector<EndpointBinding>& bindings() const { return bindings_; }
  Gateway& gateway(const std::string& id) const;
  std::size_t backend_calls() const;

 private:
  std::vector<std::unique_ptr<MockServer>> servers_;
  std::vector<EndpointBinding> bindings_;
};

TemplateSet templates_for(const AppConfig& config);

/// The corpus a run uses: corpus.path when set, else the ingest output.
Corpus load_run_corpus(const AppConfig& config, const OutputLayout& layout);

/// The JSON written next to every stage's outputs. It carries no clock
/// values, so simulator pipelines reproduce it byte for byte.
nlohmann::json make_manifest(const std::string& command, const AppConfig& config,
                             nlohmann::json outputs);

void cmd_ingest(const AppConfig& config);
void cmd_run(const AppConfig& config);
void cmd_refine(const AppConfig& config);
void cmd_self_refine(const AppConfig& config);
void cmd_evaluate(const AppConfig& config);
void cmd_report(const AppConfig& config);

struct ReportBundle {
  std::vector<MetricReport> generation;
  std::vector<MetricReport> aggregation;
  std::vector<MetricReport> self_refine;
  std::vector<MetricReport> sweep;
};

/// Every report derivable from the archives present under output_dir. The
/// run archive is required; refinement archives are optional.
ReportBundle collect_reports(const AppConfig& config, const OutputLayout& layout);

}  // namespace overprec
