#pragma once

#include <cmath>
#include <filesystem>
#include <memory>
#include <string>
#include <vector>

#include "overprec/orchestrator.hpp"
#include "overprec/rng.hpp"
#include "overprec/simulator.hpp"

namespace fixture {

// Questions with ground truths spread over several orders of magnitude.
inline overprec::Corpus corpus(int n, std::string source = "S", std::uint64_t seed = 1) {
  overprec::Rng rng(seed);
  overprec::Corpus out;
  for (int i = 0; i < n; ++i) {
    const double magnitude = std::pow(10.0, rng.uniform(-1, 6));
    out.push_back({source + "-" + std::to_string(i), source, "Question number " + std::to_string(i),
                   rng.bernoulli(0.2) ? -magnitude : magnitude, std::nullopt, {}});
  }
  return out;
}

inline std::shared_ptr<overprec::Gateway> sim_gateway(const overprec::SimulatedResponderProfile& profile) {
  return std::make_shared<overprec::Gateway>(std::make_shared<overprec::SimulatedBackend>(profile),
                                             std::make_shared<overprec::CompletionCache>());
}

// Runs the simulator over `corpus` and returns the loaded archive.
inline overprec::TrialArchive simulated_archive(const overprec::Corpus& corpus,
                                                const overprec::SimulatedResponderProfile& profile,
                                                const overprec::RunConfig& config,
                                                const std::filesystem::path& dir,
                                                const std::string& endpoint_id = "sim") {
  std::filesystem::create_directories(dir);
  const overprec::RunPaths paths{dir / (endpoint_id + "-archive.jsonl"),
                                 dir / (endpoint_id + "-failures.jsonl")};
  std::filesystem::remove(paths.archive);
  overprec::execute_run(config, corpus, {{endpoint_id, sim_gateway(profile)}}, paths);
  return overprec::TrialArchive::load(paths.archive);
}

}  // namespace fixture
