#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "overprec/aggregation.hpp"
#include "overprec/gateway.hpp"
#include "overprec/orchestrator.hpp"
#include "overprec/prompt.hpp"
#include "overprec/simulator.hpp"

namespace overprec {

enum class EndpointKind { Http, Simulator, Mock };

std::string_view to_string(EndpointKind kind);
EndpointKind endpoint_kind_from_string(std::string_view text);

/// One answer producer. `http` is used by Http endpoints, `profile` by
/// Simulator and Mock endpoints. A Mock endpoint starts a local server that
/// answers from `profile` and is reached over HTTP like a live endpoint.
struct EndpointConfig {
  std::string id;
  EndpointKind kind = EndpointKind::Simulator;
  ModelEndpoint http;
  SimulatedResponderProfile profile;
  std::vector<int> fail_next;  // mock only: statuses for the first requests
};

struct CorpusInput {
  std::filesystem::path path;
  std::string label;  // overrides each record's source when set
};

struct GatewaySettings {
  RetryPolicy retry;
  double requests_per_minute = 0.0;
  bool cache = true;
};

struct SweepSettings {
  std::vector<std::size_t> e_values;  // empty: no sweep
  RefineSetting::Kind setting = RefineSetting::Kind::Mixed;
};

struct RefineSettings {
  std::vector<SchemeKind> schemes;  // empty: all five
  std::vector<RefineSetting::Kind> settings{RefineSetting::Kind::Single,
                                            RefineSetting::Kind::Mixed};
  std::size_t k_single = 3;
  std::size_t k_mixed = 9;
  std::size_t n_sims = 10;
  double ilwa_epsilon = 1e-12;
  std::string model;                    // endpoint id used for self-refinement; empty: first
  std::vector<std::string> strategies;  // answers to refine; empty: every strategy
  SweepSettings sweep;
};

struct EvaluateSettings {
  std::size_t n_sims = 10;
  std::vector<double> scale_edges;  // empty: default signed decades
};

struct AppConfig {
  std::uint64_t seed = 0;
  std::filesystem::path output_dir = "out";
  std::filesystem::path corpus_path;  // a prepared corpus; empty: ingest output
  std::vector<CorpusInput> corpus_inputs;
  std::string merge_label;  // non-empty: ingest merges inputs under this label
  std::filesystem::path template_dir;
  ConfPhrasing phrasing = ConfPhrasing::AsPrinted;
  std::vector<EndpointConfig> endpoints;
  RunConfig run;
  GatewaySettings gateway;
  RefineSettings refine;
  EvaluateSettings evaluate;

  void validate() const;
  const EndpointConfig& endpoint(std::string_view id) const;
  nlohmann::json to_json() const;
  static AppConfig from_json(const nlohmann::json& json);
};

/// Sets a dotted path ("run.trials_per_cell=3", "endpoints.0.model=x") in a
/// JSON document. The value is read as JSON when it parses, else as a string.
void apply_override(nlohmann::json& document, std::string_view assignment);

/// Reads a config file, or the config snapshot inside a run manifest, then
/// applies overrides in order.
AppConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides = {});

}  // namespace overprec
