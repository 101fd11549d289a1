#include <gtest/gtest.h>

#include <fstream>
#include <set>
#include <sstream>

#include "overprec/error.hpp"
#include "overprec/orchestrator.hpp"
#include "overprec/simulator.hpp"
#include "temp_dir.hpp"

using namespace overprec;

namespace {

Corpus make_corpus(int n) {
  Corpus corpus;
  for (int i = 0; i < n; ++i) {
    corpus.push_back({"q" + std::to_string(i), "S", "Question " + std::to_string(i), 10.0 + i,
                      std::nullopt, {}});
  }
  return corpus;
}

struct SimEndpoint {
  std::shared_ptr<Gateway> gateway;
  std::vector<EndpointBinding> bindings;
};

SimEndpoint sim_endpoint(SimulatedResponderProfile profile = {}) {
  SimEndpoint out;
  out.gateway = std::make_shared<Gateway>(std::make_shared<SimulatedBackend>(profile),
                                          std::make_shared<CompletionCache>());
  out.bindings.push_back({"sim", out.gateway});
  return out;
}

std::string slurp(const std::filesystem::path& path) {
  std::ifstream in(path);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

TrialRecord trial(std::string qid, double c, int t, std::optional<Interval> iv) {
  TrialRecord r;
  r.question_id = std::move(qid);
  r.source = "S";
  r.ground_truth = 1;
  r.endpoint_id = "sim";
  r.strategy = "vanilla";
  r.confidence = c;
  r.trial_index = t;
  r.interval = iv;
  r.parse_status = iv ? "ok" : "parse_error";
  return r;
}

}  // namespace

TEST(RunConfig, Validation) {
  RunConfig ok;
  EXPECT_NO_THROW(ok.validate());
  RunConfig bad = ok;
  bad.confidence_levels = {60, 60};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ok;
  bad.confidence_levels = {0, 50};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ok;
  bad.trials_per_cell = 0;
  EXPECT_THROW(bad.validate(), ConfigError);
  bad = ok;
  bad.strategies = {Strategy::parse("vanilla+hint3")};
  EXPECT_THROW(bad.validate(), ConfigError);
  bad.sampling.kind = SamplingKind::Misleading;
  EXPECT_NO_THROW(bad.validate());
}

TEST(Strategy, LabelRoundTrip) {
  for (const char* label : {"vanilla", "cot", "vanilla+hint1", "cot+hint8"}) {
    EXPECT_EQ(Strategy::parse(label).label(), label);
  }
  EXPECT_THROW(Strategy::parse("fancy"), ConfigError);
}

TEST(TrialTag, Format) {
  EXPECT_EQ(trial_tag(7, Strategy::parse("cot+hint3"), 90, 2), "s7/cot+hint3/c90/t2");
}

TEST(ExecuteRun, CardinalityAndResume) {
  TempDir dir;
  auto corpus = make_corpus(20);
  auto sim = sim_endpoint();
  RunConfig config;
  config.seed = 3;
  const RunPaths paths{dir / "archive.jsonl", dir / "failures.jsonl"};
  const auto first = execute_run(config, corpus, sim.bindings, paths);
  EXPECT_EQ(first.cells, 500u);
  EXPECT_EQ(first.written, 500u);
  const auto archive = TrialArchive::load(paths.archive);
  ASSERT_EQ(archive.records().size(), 500u);
  std::set<CellKey> keys;
  for (const auto& r : archive.records()) keys.insert(cell_key(r));
  EXPECT_EQ(keys.size(), 500u);

  const auto calls = sim.gateway->backend_calls();
  const auto second = execute_run(config, corpus, sim.bindings, paths);
  EXPECT_EQ(second.written, 0u);
  EXPECT_EQ(second.resumed, 500u);
  EXPECT_EQ(sim.gateway->backend_calls(), calls);
}

TEST(ExecuteRun, ArchiveIndependentOfWorkerCount) {
  TempDir dir;
  auto corpus = make_corpus(8);
  RunConfig config;
  config.strategies = {Strategy::parse("vanilla"), Strategy::parse("cot")};
  config.trials_per_cell = 2;
  config.seed = 11;
  SimulatedResponderProfile profile;
  profile.malform_rate = 0.2;
  std::string archives[2];
  for (int i = 0; i < 2; ++i) {
    config.concurrency_limit = i == 0 ? 1 : 4;
    auto sim = sim_endpoint(profile);
    const RunPaths paths{dir / ("a" + std::to_string(i)), dir / ("f" + std::to_string(i))};
    execute_run(config, corpus, sim.bindings, paths);
    archives[i] = slurp(paths.archive);
  }
  EXPECT_FALSE(archives[0].empty());
  EXPECT_EQ(archives[0], archives[1]);
}

TEST(ExecuteRun, MisleadingRecordsHint) {
  TempDir dir;
  auto corpus = make_corpus(3);
  RunConfig config;
  config.strategies = {Strategy::parse("vanilla+hint1")};
  config.sampling = {SamplingKind::Misleading, MisleadMode::Far};
  config.trials_per_cell = 1;
  auto sim = sim_endpoint();
  execute_run(config, corpus, sim.bindings, {dir / "a", dir / "f"});
  const auto archive = TrialArchive::load(dir / "a");
  for (const auto& r : archive.records()) {
    ASSERT_TRUE(r.hint_interval);
    EXPECT_FALSE(r.hint_interval->contains(r.ground_truth));
  }
}

TEST(ExecuteRun, MissingCredentialFailsBeforeAnyCall) {
  TempDir dir;
  ModelEndpoint e;
  e.base_url = "https://api.example.invalid/v1";
  e.model_name = "m";
  e.auth_env = "OVERPREC_TEST_SURELY_UNSET_KEY";
  ::unsetenv(e.auth_env.c_str());
  auto gw = std::make_shared<Gateway>(std::make_shared<HttpBackend>(e),
                                      std::make_shared<CompletionCache>());
  EXPECT_THROW(execute_run({}, make_corpus(2), {{"live", gw}}, {dir / "a", dir / "f"}), AuthError);
  EXPECT_FALSE(std::filesystem::exists(dir / "a"));
}

TEST(TrialRecord, JsonRoundTrip) {
  auto r = trial("q1", 90, 2, Interval{1.5, 2.5});
  r.hint_interval = Interval{10, 20};
  r.raw_text = "lower_bound: 1.5, upper_bound: 2.5";
  const auto back = TrialRecord::from_json(r.to_json());
  EXPECT_EQ(back.to_json(), r.to_json());
  auto failed = trial("q1", 90, 3, std::nullopt);
  failed.parse_error = "no interval found in response";
  EXPECT_FALSE(TrialRecord::from_json(failed.to_json()).parsed());
}

TEST(TrialArchive, MissingFileMessage) {
  try {
    TrialArchive::load("/nonexistent/archive.jsonl");
    FAIL();
  } catch (const DataError& e) {
    EXPECT_NE(std::string(e.what()).find("archive not found"), std::string::npos);
  }
}

TEST(SampleForRefinement, SingleDrawsDistinctTrialsAtLevel) {
  std::vector<TrialRecord> records;
  for (double c : {60.0, 80.0}) {
    for (int t = 0; t < 5; ++t) records.push_back(trial("q", c, t, Interval{c + t, c + t + 1}));
  }
  CandidatePool pool{TrialArchive(records)};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto s = sample_for_refinement(pool, "q", {RefineSetting::Kind::Single, 80}, 3, seed);
    ASSERT_TRUE(s);
    ASSERT_EQ(s->size(), 3u);
    std::set<double> lowers;
    for (const auto& c : *s) {
      EXPECT_EQ(c.confidence, 80);
      lowers.insert(c.lower);
    }
    EXPECT_EQ(lowers.size(), 3u);
  }
}

TEST(SampleForRefinement, MixedSpansLevels) {
  // P(all 9 from one level of 5) = 5 * C(5,9) / C(25,9) = 0: at least two
  // levels always appear since no level has 9 answers.
  std::vector<TrialRecord> records;
  for (double c : {60.0, 70.0, 80.0, 90.0, 95.0}) {
    for (int t = 0; t < 5; ++t) records.push_back(trial("q", c, t, Interval{0, c}));
  }
  CandidatePool pool{TrialArchive(records)};
  for (std::uint64_t seed = 0; seed < 50; ++seed) {
    auto s = sample_for_refinement(pool, "q", {RefineSetting::Kind::Mixed, kAllLevels}, 9, seed);
    ASSERT_TRUE(s);
    std::set<double> levels;
    for (const auto& c : *s) levels.insert(c.confidence);
    EXPECT_GE(levels.size(), 2u);
  }
}

TEST(SampleForRefinement, ShortCellSkipsAndPrefixProperty) {
  std::vector<TrialRecord> records{trial("q", 80, 0, Interval{0, 1}), trial("q", 80, 1, Interval{0, 2}),
                                   trial("q", 80, 2, std::nullopt)};
  CandidatePool pool{TrialArchive(records)};
  EXPECT_FALSE(sample_for_refinement(pool, "q", {RefineSetting::Kind::Single, 80}, 3, 1));
  EXPECT_FALSE(sample_for_refinement(pool, "missing", {RefineSetting::Kind::Single, 80}, 1, 1));
  EXPECT_THROW(sample_for_refinement(pool, "q", {RefineSetting::Kind::Single, 80}, 0, 1), ConfigError);
  const auto one = sample_for_refinement(pool, "q", {RefineSetting::Kind::Single, 80}, 1, 4);
  const auto two = sample_for_refinement(pool, "q", {RefineSetting::Kind::Single, 80}, 2, 4);
  ASSERT_TRUE(one && two);
  EXPECT_EQ((*one)[0], (*two)[0]);
}

TEST(ParallelFor, RunsEveryIndexAndRethrows) {
  std::vector<int> seen(100, 0);
  parallel_for(100, 4, [&](std::size_t i) { seen[i] += 1; });
  for (int v : seen) EXPECT_EQ(v, 1);
  EXPECT_THROW(parallel_for(10, 3, [](std::size_t i) {
                 if (i == 5) throw DataError("boom");
               }),
               DataError);
}
