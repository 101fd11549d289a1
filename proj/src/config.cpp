#include "overprec/config.hpp"

#include <algorithm>
#include <fstream>
#include <set>

#include <fmt/format.h>

#include "overprec/error.hpp"

namespace overprec {
namespace {

using nlohmann::json;

const std::set<std::string> kTopLevelKeys = {"seed",     "output_dir", "corpus",   "templates",
                                             "endpoints", "run",        "gateway", "refine",
                                             "evaluate"};

std::string_view to_string(RefineSetting::Kind kind) {
  return kind == RefineSetting::Kind::Single ? "single" : "mixed";
}

RefineSetting::Kind setting_kind_from_string(std::string_view text) {
  if (text == "single") return RefineSetting::Kind::Single;
  if (text == "mixed") return RefineSetting::Kind::Mixed;
  throw ConfigError(fmt::format("unknown refinement setting '{}'", text));
}

json endpoint_to_json(const EndpointConfig& endpoint) {
  json out = {{"id", endpoint.id}, {"kind", to_string(endpoint.kind)}};
  if (endpoint.kind == EndpointKind::Http) {
    out["base_url"] = endpoint.http.base_url;
    out["model"] = endpoint.http.model_name;
    out["temperature"] = endpoint.http.temperature;
    out["max_tokens"] = endpoint.http.max_tokens;
    out["timeout_ms"] = endpoint.http.timeout.count();
    out["auth_env"] = endpoint.http.auth_env;
  } else {
    out["profile"] = profile_to_json(endpoint.profile);
    if (endpoint.kind == EndpointKind::Mock) {
      out["model"] = endpoint.http.model_name;
      out["fail_next"] = endpoint.fail_next;
    }
  }
  return out;
}

EndpointConfig endpoint_from_json(const json& j) {
  EndpointConfig endpoint;
  endpoint.id = j.at("id").get<std::string>();
  endpoint.kind = endpoint_kind_from_string(j.value("kind", std::string("simulator")));
  if (endpoint.kind == EndpointKind::Http) {
    endpoint.http.base_url = j.at("base_url").get<std::string>();
    endpoint.http.model_name = j.at("model").get<std::string>();
    endpoint.http.temperature = j.value("temperature", endpoint.http.temperature);
    endpoint.http.max_tokens = j.value("max_tokens", endpoint.http.max_tokens);
    endpoint.http.timeout =
        std::chrono::milliseconds(j.value("timeout_ms", endpoint.http.timeout.count()));
    endpoint.http.auth_env = j.value("auth_env", endpoint.http.auth_env);
  } else {
    endpoint.profile = profile_from_json(j.value("profile", json::object()));
    if (endpoint.kind == EndpointKind::Mock) {
      endpoint.http.model_name = j.value("model", std::string("mock-model"));
      endpoint.http.auth_env.clear();
      endpoint.fail_next = j.value("fail_next", std::vector<int>{});
    }
  }
  return endpoint;
}

}  // namespace

std::string_view to_string(EndpointKind kind) {
  switch (kind) {
    case EndpointKind::Http: return "http";
    case EndpointKind::Simulator: return "simulator";
    case EndpointKind::Mock: return "mock";
  }
  return "simulator";
}

EndpointKind endpoint_kind_from_string(std::string_view text) {
  if (text == "http") return EndpointKind::Http;
  if (text == "simulator") return EndpointKind::Simulator;
  if (text == "mock") return EndpointKind::Mock;
  throw ConfigError(fmt::format("unknown endpoint kind '{}'", text));
}

void AppConfig::validate() const {
  if (output_dir.empty()) throw ConfigError("output_dir is empty");
  if (endpoints.empty()) throw ConfigError("config lists no endpoints");
  std::set<std::string> ids;
  for (const auto& endpoint : endpoints) {
    if (endpoint.id.empty()) throw ConfigError("endpoint id is empty");
    if (endpoint.id.find_first_of("/,\n") != std::string::npos) {
      throw ConfigError(fmt::format("endpoint id '{}' may not contain '/', ',' or newlines", endpoint.id));
    }
    if (!ids.insert(endpoint.id).second) {
      throw ConfigError(fmt::format("endpoint id '{}' listed twice", endpoint.id));
    }
    if (endpoint.kind == EndpointKind::Http) endpoint.http.validate();
    endpoint.profile.validate();
  }
  run.validate();
  if (refine.k_single == 0 || refine.k_mixed == 0) throw ConfigError("refine k must be positive");
  if (refine.n_sims == 0 || evaluate.n_sims == 0) throw ConfigError("n_sims must be positive");
  if (!(refine.ilwa_epsilon > 0.0)) throw ConfigError("refine.ilwa_epsilon must be positive");
  if (!refine.model.empty()) endpoint(refine.model);
  for (const auto& label : refine.strategies) Strategy::parse(label);
  for (std::size_t e : refine.sweep.e_values) {
    if (e == 0) throw ConfigError("refine.sweep.e_values must be positive");
  }
  if (gateway.retry.max_attempts < 1) throw ConfigError("gateway.max_attempts must be >= 1");
  if (gateway.requests_per_minute < 0) throw ConfigError("gateway.requests_per_minute must be >= 0");
  for (std::size_t i = 1; i < evaluate.scale_edges.size(); ++i) {
    if (!(evaluate.scale_edges[i - 1] < evaluate.scale_edges[i])) {
      throw ConfigError("evaluate.scale_edges must be strictly increasing");
    }
  }
}

const EndpointConfig& AppConfig::endpoint(std::string_view id) const {
  for (const auto& endpoint : endpoints) {
    if (endpoint.id == id) return endpoint;
  }
  throw ConfigError(fmt::format("no endpoint with id '{}'", id));
}

json AppConfig::to_json() const {
  json corpus = {{"path", corpus_path.string()}, {"merge_label", merge_label}};
  json inputs = json::array();
  for (const auto& input : corpus_inputs) {
    inputs.push_back({{"path", input.path.string()}, {"label", input.label}});
  }
  corpus["inputs"] = std::move(inputs);

  json endpoint_list = json::array();
  for (const auto& endpoint : endpoints) endpoint_list.push_back(endpoint_to_json(endpoint));

  json strategies = json::array();
  for (const auto& strategy : run.strategies) strategies.push_back(strategy.label());

  json schemes = json::array();
  for (SchemeKind kind : refine.schemes) schemes.push_back(to_string(kind));
  json settings = json::array();
  for (auto kind : refine.settings) settings.push_back(to_string(kind));

  return {
      {"seed", seed},
      {"output_dir", output_dir.string()},
      {"corpus", corpus},
      {"templates", {{"dir", template_dir.string()}, {"conf_phrasing", to_string(phrasing)}}},
      {"endpoints", endpoint_list},
      {"run",
       {{"strategies", strategies},
        {"confidence_levels", run.confidence_levels},
        {"trials_per_cell", run.trials_per_cell},
        {"sampling",
         {{"kind", run.sampling.kind == SamplingKind::Misleading ? "misleading" : "self_random"},
          {"mode", to_string(run.sampling.mode)}}},
        {"concurrency_limit", run.concurrency_limit}}},
      {"gateway",
       {{"max_attempts", gateway.retry.max_attempts},
        {"base_delay_ms", gateway.retry.base_delay.count()},
        {"max_delay_ms", gateway.retry.max_delay.count()},
        {"requests_per_minute", gateway.requests_per_minute},
        {"cache", gateway.cache}}},
      {"refine",
       {{"schemes", schemes},
        {"settings", settings},
        {"k_single", refine.k_single},
        {"k_mixed", refine.k_mixed},
        {"n_sims", refine.n_sims},
        {"ilwa_epsilon", refine.ilwa_epsilon},
        {"model", refine.model},
        {"strategies", refine.strategies},
        {"sweep", {{"e_values", refine.sweep.e_values}, {"setting", to_string(refine.sweep.setting)}}}}},
      {"evaluate", {{"n_sims", evaluate.n_sims}, {"scale_edges", evaluate.scale_edges}}},
  };
}

AppConfig AppConfig::from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("config must be a JSON object");
  for (const auto& [key, _] : j.items()) {
    if (kTopLevelKeys.count(key) == 0) throw ConfigError(fmt::format("unknown config key '{}'", key));
  }

  AppConfig config;
  try {
    config.seed = j.value("seed", config.seed);
    config.output_dir = j.value("output_dir", config.output_dir.string());

    if (j.contains("corpus")) {
      const auto& corpus = j["corpus"];
      config.corpus_path = corpus.value("path", std::string());
      config.merge_label = corpus.value("merge_label", std::string());
      for (const auto& input : corpus.value("inputs", json::array())) {
        config.corpus_inputs.push_back(
            {input.at("path").get<std::string>(), input.value("label", std::string())});
      }
    }
    if (j.contains("templates")) {
      const auto& templates = j["templates"];
      config.template_dir = templates.value("dir", std::string());
      config.phrasing = conf_phrasing_from_string(
          templates.value("conf_phrasing", std::string(to_string(config.phrasing))));
    }
    for (const auto& endpoint : j.value("endpoints", json::array())) {
      config.endpoints.push_back(endpoint_from_json(endpoint));
    }

    if (j.contains("run")) {
      const auto& run = j["run"];
      if (run.contains("strategies")) {
        config.run.strategies.clear();
        for (const auto& label : run["strategies"]) {
          config.run.strategies.push_back(Strategy::parse(label.get<std::string>()));
        }
      }
      config.run.confidence_levels = run.value("confidence_levels", config.run.confidence_levels);
      config.run.trials_per_cell = run.value("trials_per_cell", config.run.trials_per_cell);
      config.run.concurrency_limit = run.value("concurrency_limit", config.run.concurrency_limit);
      if (run.contains("sampling")) {
        const auto& sampling = run["sampling"];
        const std::string kind = sampling.value("kind", std::string("self_random"));
        if (kind == "self_random") {
          config.run.sampling.kind = SamplingKind::SelfRandom;
        } else if (kind == "misleading") {
          config.run.sampling.kind = SamplingKind::Misleading;
        } else {
          throw ConfigError(fmt::format("unknown sampling kind '{}'", kind));
        }
        config.run.sampling.mode = mislead_mode_from_string(sampling.value("mode", std::string("near")));
      }
    }

    if (j.contains("gateway")) {
      const auto& gateway = j["gateway"];
      config.gateway.retry.max_attempts = gateway.value("max_attempts", config.gateway.retry.max_attempts);
      config.gateway.retry.base_delay = std::chrono::milliseconds(
          gateway.value("base_delay_ms", config.gateway.retry.base_delay.count()));
      config.gateway.retry.max_delay = std::chrono::milliseconds(
          gateway.value("max_delay_ms", config.gateway.retry.max_delay.count()));
      config.gateway.requests_per_minute =
          gateway.value("requests_per_minute", config.gateway.requests_per_minute);
      config.gateway.cache = gateway.value("cache", config.gateway.cache);
    }

    if (j.contains("refine")) {
      const auto& refine = j["refine"];
      for (const auto& name : refine.value("schemes", json::array())) {
        config.refine.schemes.push_back(scheme_kind_from_string(name.get<std::string>()));
      }
      if (refine.contains("settings")) {
        config.refine.settings.clear();
        for (const auto& name : refine["settings"]) {
          config.refine.settings.push_back(setting_kind_from_string(name.get<std::string>()));
        }
      }
      config.refine.k_single = refine.value("k_single", config.refine.k_single);
      config.refine.k_mixed = refine.value("k_mixed", config.refine.k_mixed);
      config.refine.n_sims = refine.value("n_sims", config.refine.n_sims);
      config.refine.ilwa_epsilon = refine.value("ilwa_epsilon", config.refine.ilwa_epsilon);
      config.refine.model = refine.value("model", std::string());
      config.refine.strategies = refine.value("strategies", std::vector<std::string>{});
      if (refine.contains("sweep")) {
        const auto& sweep = refine["sweep"];
        config.refine.sweep.e_values = sweep.value("e_values", std::vector<std::size_t>{});
        config.refine.sweep.setting = setting_kind_from_string(sweep.value("setting", std::string("mixed")));
      }
    }

    if (j.contains("evaluate")) {
      const auto& evaluate = j["evaluate"];
      config.evaluate.n_sims = evaluate.value("n_sims", config.evaluate.n_sims);
      config.evaluate.scale_edges = evaluate.value("scale_edges", std::vector<double>{});
    }
  } catch (const json::exception& e) {
    throw ConfigError(fmt::format("invalid config: {}", e.what()));
  }
  config.run.seed = config.seed;
  config.validate();
  return config;
}

void apply_override(json& document, std::string_view assignment) {
  const std::size_t eq = assignment.find('=');
  if (eq == std::string_view::npos || eq == 0) {
    throw ConfigError(fmt::format("override '{}' is not key=value", assignment));
  }
  const std::string_view path = assignment.substr(0, eq);
  const std::string text(assignment.substr(eq + 1));
  json value = json::parse(text, nullptr, false);
  if (value.is_discarded()) value = text;

  json* node = &document;
  std::size_t start = 0;
  while (true) {
    const std::size_t dot = path.find('.', start);
    const std::string part(path.substr(start, dot == std::string_view::npos ? std::string_view::npos
                                                                            : dot - start));
    if (part.empty()) throw ConfigError(fmt::format("override '{}' has an empty key", assignment));
    json* child = nullptr;
    if (node->is_array()) {
      if (!std::all_of(part.begin(), part.end(), [](char c) { return c >= '0' && c <= '9'; })) {
        throw ConfigError(fmt::format("override '{}': '{}' is not an index", assignment, part));
      }
      const std::size_t index = std::stoul(part);
      if (index >= node->size()) {
        throw ConfigError(fmt::format("override '{}': index {} out of range", assignment, index));
      }
      child = &(*node)[index];
    } else {
      if (node->is_null()) *node = json::object();
      if (!node->is_object()) {
        throw ConfigError(fmt::format("override '{}': '{}' is not an object", assignment, part));
      }
      child = &(*node)[part];
    }
    if (dot == std::string_view::npos) {
      *child = std::move(value);
      return;
    }
    node = child;
    start = dot + 1;
  }
}

AppConfig load_config(const std::filesystem::path& path, std::span<const std::string> overrides) {
  std::ifstream in(path);
  if (!in) throw ConfigError(fmt::format("cannot read config file {}", path.string()));
  json document = json::parse(in, nullptr, false, true);
  if (document.is_discarded()) {
    throw ConfigError(fmt::format("config file {} is not valid JSON", path.string()));
  }
  // A manifest carries the config it was produced with.
  if (document.is_object() && document.contains("tool") && document.contains("config")) {
    json inner = document["config"];
    document = std::move(inner);
  }
  for (const auto& assignment : overrides) apply_override(document, assignment);
  return AppConfig::from_json(document);
}

}  // namespace overprec
