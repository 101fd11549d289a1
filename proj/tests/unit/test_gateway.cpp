#include <gtest/gtest.h>

#include <cstdlib>
#include <mutex>
#include <thread>

#include "overprec/error.hpp"
#include "overprec/gateway.hpp"
#include "overprec/mock_server.hpp"
#include "overprec/orchestrator.hpp"
#include "overprec/simulator.hpp"
#include "temp_dir.hpp"

using namespace overprec;
using namespace std::chrono_literals;

namespace {

ModelEndpoint endpoint_for(const MockServer& server) {
  ModelEndpoint e;
  e.base_url = server.base_url();
  e.model_name = "mock-model";
  e.timeout = 5000ms;
  e.auth_env.clear();
  return e;
}

RetryPolicy fast_retry() {
  RetryPolicy r;
  r.max_attempts = 5;
  r.base_delay = 1ms;
  r.max_delay = 5ms;
  return r;
}

CompletionRequest request(std::string prompt, std::string tag = "t0") {
  CompletionRequest r;
  r.prompt = std::move(prompt);
  r.trial_tag = std::move(tag);
  return r;
}

}  // namespace

TEST(BaseUrl, Parses) {
  auto u = parse_base_url("https://api.example.com/v1/");
  EXPECT_EQ(u.scheme, "https");
  EXPECT_EQ(u.host, "api.example.com");
  EXPECT_EQ(u.port, 443);
  EXPECT_EQ(u.path_prefix, "/v1");
  auto local = parse_base_url("http://127.0.0.1:8089");
  EXPECT_EQ(local.port, 8089);
  EXPECT_EQ(local.path_prefix, "");
  EXPECT_THROW(parse_base_url("ftp://x"), ConfigError);
  EXPECT_THROW(parse_base_url("api.example.com"), ConfigError);
  EXPECT_THROW(parse_base_url("http://host:abc"), ConfigError);
}

TEST(CacheKey, DeterministicAndSensitive) {
  const auto k = completion_cache_key("id", "prompt", "tag");
  EXPECT_EQ(k, completion_cache_key("id", "prompt", "tag"));
  EXPECT_EQ(k.size(), 64u);
  EXPECT_NE(k, completion_cache_key("id", "prompt", "tag2"));
  EXPECT_NE(k, completion_cache_key("id2", "prompt", "tag"));
  EXPECT_NE(completion_cache_key("a", "bc", ""), completion_cache_key("ab", "c", ""));
}

TEST(RetryPolicy, ExponentialAndCapped) {
  RetryPolicy r;
  r.base_delay = 100ms;
  r.max_delay = 1000ms;
  EXPECT_EQ(r.delay_before(2), 100ms);
  EXPECT_EQ(r.delay_before(3), 200ms);
  EXPECT_EQ(r.delay_before(4), 400ms);
  EXPECT_EQ(r.delay_before(10), 1000ms);
}

TEST(Gateway, SecondIdenticalCallServedFromCache) {
  MockServer server(canned_handler({"lower_bound: 1, upper_bound: 2"}));
  Gateway gw(std::make_shared<HttpBackend>(endpoint_for(server)),
             std::make_shared<CompletionCache>(), fast_retry());
  const auto first = gw.complete(request("p"));
  EXPECT_FALSE(first.from_cache);
  EXPECT_EQ(first.raw_text, "lower_bound: 1, upper_bound: 2");
  const auto second = gw.complete(request("p"));
  EXPECT_TRUE(second.from_cache);
  EXPECT_EQ(second.raw_text, first.raw_text);
  EXPECT_EQ(server.request_count(), 1u);
  EXPECT_EQ(gw.backend_calls(), 1u);
  gw.complete(request("p", "t1"));
  EXPECT_EQ(server.request_count(), 2u);
}

TEST(Gateway, FailTwiceThenSucceed) {
  MockServer server(canned_handler({"ok [1, 2]"}));
  server.fail_next({500, 503});
  Gateway gw(std::make_shared<HttpBackend>(endpoint_for(server)),
             std::make_shared<CompletionCache>(), fast_retry());
  const auto record = gw.complete(request("p"));
  EXPECT_EQ(record.retries_used, 2);
  EXPECT_EQ(server.request_count(), 3u);
  EXPECT_FALSE(record.timestamp.empty());
}

TEST(Gateway, RateLimitedHonoursRetryAfter) {
  MockServer server(canned_handler({"x"}));
  server.fail_next({429}, 0);
  Gateway gw(std::make_shared<HttpBackend>(endpoint_for(server)),
             std::make_shared<CompletionCache>(), fast_retry());
  EXPECT_EQ(gw.complete(request("p")).retries_used, 1);
}

TEST(Gateway, ExhaustsAfterFiveAttempts) {
  MockServer server(canned_handler({"x"}));
  server.always_fail(500);
  Gateway gw(std::make_shared<HttpBackend>(endpoint_for(server)),
             std::make_shared<CompletionCache>(), fast_retry());
  try {
    gw.complete(request("p"));
    FAIL();
  } catch (const GatewayError& e) {
    EXPECT_NE(std::string(e.what()).find("5 attempts"), std::string::npos);
  }
  EXPECT_EQ(server.request_count(), 5u);
}

TEST(Gateway, ClientErrorIsNotRetried) {
  MockServer server(canned_handler({"x"}));
  server.always_fail(401);
  Gateway gw(std::make_shared<HttpBackend>(endpoint_for(server)),
             std::make_shared<CompletionCache>(), fast_retry());
  EXPECT_THROW(gw.complete(request("p")), GatewayError);
  EXPECT_EQ(server.request_count(), 1u);
}

TEST(Gateway, UnreachableHostIsTransient) {
  ModelEndpoint e;
  e.base_url = "http://127.0.0.1:1/v1";
  e.model_name = "m";
  e.timeout = 200ms;
  e.auth_env.clear();
  RetryPolicy r = fast_retry();
  r.max_attempts = 2;
  Gateway gw(std::make_shared<HttpBackend>(e), std::make_shared<CompletionCache>(), r);
  EXPECT_THROW(gw.complete(request("p")), GatewayError);
  EXPECT_EQ(gw.backend_calls(), 2u);
}

TEST(Gateway, MissingCredentialIsAuthError) {
  ModelEndpoint e;
  e.base_url = "https://api.example.invalid/v1";
  e.model_name = "m";
  e.auth_env = "OVERPREC_TEST_SURELY_UNSET_KEY";
  ::unsetenv(e.auth_env.c_str());
  Gateway gw(std::make_shared<HttpBackend>(e), std::make_shared<CompletionCache>());
  EXPECT_THROW(gw.complete(request("p")), AuthError);
  EXPECT_EQ(gw.backend_calls(), 0u);
}

TEST(Gateway, SendsBearerAndTrialTag) {
  std::mutex mutex;
  MockRequest seen;
  MockServer server([&](const MockRequest& r) {
    std::lock_guard lock(mutex);
    seen = r;
    return std::string("fine");
  });
  auto e = endpoint_for(server);
  e.auth_env = "OVERPREC_TEST_KEY";
  ::setenv("OVERPREC_TEST_KEY", "sekret", 1);
  Gateway gw(std::make_shared<HttpBackend>(e), std::make_shared<CompletionCache>(), fast_retry());
  gw.complete(request("hello", "s1/vanilla/c90/t3"));
  std::lock_guard lock(mutex);
  EXPECT_EQ(seen.authorization, "Bearer sekret");
  EXPECT_EQ(seen.trial_tag, "s1/vanilla/c90/t3");
  EXPECT_EQ(seen.prompt, "hello");
  EXPECT_EQ(seen.model, "mock-model");
}

TEST(Gateway, ConcurrentIdenticalRequestsShareOneCall) {
  MockServer server([](const MockRequest&) {
    std::this_thread::sleep_for(50ms);
    return std::string("slow");
  });
  Gateway gw(std::make_shared<HttpBackend>(endpoint_for(server)),
             std::make_shared<CompletionCache>(), fast_retry());
  std::vector<std::thread> threads;
  for (int i = 0; i < 6; ++i) threads.emplace_back([&] { gw.complete(request("same")); });
  for (auto& t : threads) t.join();
  EXPECT_EQ(server.request_count(), 1u);
}

TEST(CompletionCache, PersistsAcrossInstancesAndSkipsTornLines) {
  TempDir dir;
  const auto path = dir / "cache.jsonl";
  {
    CompletionCache cache(path);
    CompletionRecord r;
    r.cache_key = "k1";
    r.raw_text = "first";
    cache.store(r);
    r.raw_text = "second";
    cache.store(r);
  }
  { std::ofstream(path, std::ios::app) << "{\"key\": \"k2\", \"raw_te"; }
  CompletionCache reloaded(path);
  ASSERT_TRUE(reloaded.lookup("k1"));
  EXPECT_EQ(reloaded.lookup("k1")->raw_text, "first");
  EXPECT_FALSE(reloaded.lookup("k2"));
  EXPECT_EQ(reloaded.size(), 1u);
}

TEST(SimulatedBackend, NeedsStructuredQuestion) {
  auto backend = std::make_shared<SimulatedBackend>(SimulatedResponderProfile{});
  EXPECT_EQ(backend->attempt(request("p")).status, AttemptResult::Status::Fatal);
  Gateway gw(backend, std::make_shared<CompletionCache>(), fast_retry());
  EXPECT_THROW(gw.complete(request("p")), GatewayError);
  EXPECT_EQ(gw.backend_calls(), 1u);
}

TEST(MockServer, SimulatingHandlerAnswersRenderedPrompts) {
  Corpus corpus{{"q1", "S", "How many legs does a spider have?", 8, std::nullopt, {}}};
  SimulatedResponderProfile profile;
  profile.coverage = 1.0;
  MockServer server(simulating_handler(profile, corpus));
  Gateway gw(std::make_shared<HttpBackend>(endpoint_for(server)),
             std::make_shared<CompletionCache>(), fast_retry());
  PromptSpec spec{PromptStyle::Cot, 90, std::nullopt, &corpus[0]};
  auto record = gw.complete(request(render_prompt(spec), "s0/cot/c90/t0"));
  EXPECT_EQ(record.raw_text, simulate(profile, corpus[0], 90, "s0/cot/c90/t0"));
}
