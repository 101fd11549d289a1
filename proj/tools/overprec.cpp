#include <csignal>
#include <cstdio>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <fmt/format.h>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include "overprec/config.hpp"
#include "overprec/error.hpp"
#include "overprec/mock_server.hpp"
#include "overprec/pipeline.hpp"

namespace {

struct Common {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string output_dir;
};

overprec::AppConfig resolve(const Common& common) {
  std::vector<std::string> overrides = common.overrides;
  if (!common.output_dir.empty()) overrides.push_back("output_dir=\"" + common.output_dir + "\"");
  return overprec::load_config(common.config_path, overrides);
}

// Serves one mock or simulator endpoint over HTTP until SIGINT or SIGTERM.
void mock_serve(const overprec::AppConfig& config, const std::string& endpoint_id, int port) {
  const auto& endpoint =
      endpoint_id.empty() ? config.endpoints.front() : config.endpoint(endpoint_id);
  if (endpoint.kind == overprec::EndpointKind::Http) {
    throw overprec::ConfigError(
        fmt::format("endpoint '{}' is a live endpoint and has no profile to serve", endpoint.id));
  }
  const overprec::OutputLayout layout(config.output_dir);
  const overprec::Corpus corpus = overprec::load_run_corpus(config, layout);

  sigset_t signals;
  sigemptyset(&signals);
  sigaddset(&signals, SIGINT);
  sigaddset(&signals, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &signals, nullptr);

  overprec::MockServer server(overprec::simulating_handler(endpoint.profile, corpus), "127.0.0.1",
                              port);
  if (!endpoint.fail_next.empty()) server.fail_next(endpoint.fail_next);
  fmt::print("{}\n", server.base_url());
  std::fflush(stdout);
  int received = 0;
  sigwait(&signals, &received);
  spdlog::info("signal {} received, {} requests served", received, server.request_count());
  server.stop();
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Interval-answer confidence experiments for language models"};
  app.require_subcommand(1);
  app.fallthrough();
  bool verbose = false;
  bool quiet = false;
  app.add_flag("-v,--verbose", verbose, "Debug logging");
  app.add_flag("-q,--quiet", quiet, "Warnings and errors only");

  Common common;
  auto add_common = [&common](CLI::App* sub) {
    sub->add_option("-c,--config", common.config_path, "Config file or stage manifest")
        ->required()
        ->check(CLI::ExistingFile);
    sub->add_option("--set", common.overrides, "Override a config value, e.g. run.trials_per_cell=3");
    sub->add_option("-o,--output-dir", common.output_dir, "Replaces output_dir from the config");
  };

  auto* ingest = app.add_subcommand("ingest", "Load, filter and merge question files");
  auto* run = app.add_subcommand("run", "Collect interval answers for every cell");
  auto* refine = app.add_subcommand("refine", "Aggregate sampled answers with each scheme");
  auto* self_refine = app.add_subcommand("self-refine", "Ask a model to refine sampled answers");
  auto* evaluate = app.add_subcommand("evaluate", "Compute metrics over the archives");
  auto* report = app.add_subcommand("report", "Write CSV tables and report.json");
  auto* serve = app.add_subcommand("mock-serve", "Serve a simulated endpoint over HTTP");
  for (auto* sub : {ingest, run, refine, self_refine, evaluate, report, serve}) add_common(sub);
  std::string serve_endpoint;
  int serve_port = 8089;
  serve->add_option("--endpoint", serve_endpoint, "Endpoint id whose profile is served");
  serve->add_option("--port", serve_port, "Listening port; 0 picks a free one");

  CLI11_PARSE(app, argc, argv);

  auto logger = spdlog::stderr_color_mt("overprec");
  spdlog::set_default_logger(logger);
  spdlog::set_pattern("[%l] %v");
  spdlog::set_level(verbose ? spdlog::level::debug
                            : quiet ? spdlog::level::warn : spdlog::level::info);

  try {
    const overprec::AppConfig config = resolve(common);
    if (ingest->parsed()) overprec::cmd_ingest(config);
    if (run->parsed()) overprec::cmd_run(config);
    if (refine->parsed()) overprec::cmd_refine(config);
    if (self_refine->parsed()) overprec::cmd_self_refine(config);
    if (evaluate->parsed()) overprec::cmd_evaluate(config);
    if (report->parsed()) overprec::cmd_report(config);
    if (serve->parsed()) mock_serve(config, serve_endpoint, serve_port);
  } catch (const overprec::Error& e) {
    fmt::print(stderr, "error: {}\n", e.what());
    return 1;
  }
  return 0;
}
