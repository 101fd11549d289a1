#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <filesystem>
#include <fstream>
#include <future>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "overprec/dataset.hpp"
#include "overprec/interval.hpp"

namespace overprec {

/// A chat-completion endpoint speaking the common /chat/completions schema.
struct ModelEndpoint {
  std::string base_url;  // everything before "/chat/completions", e.g. https://api.openai.com/v1
  std::string model_name;
  double temperature = 1.0;
  int max_tokens = 1024;
  std::chrono::milliseconds timeout{60'000};
  std::string auth_env = "OPENAI_API_KEY";  // empty: send no Authorization header

  void validate() const;
  std::string identity() const;
};

struct ParsedUrl {
  std::string scheme;
  std::string host;
  int port = 0;
  std::string path_prefix;  // no trailing slash
};

/// Throws ConfigError when `url` is not http(s)://host[:port][/path].
ParsedUrl parse_base_url(std::string_view url);

enum class RequestKind { Generation, Refinement };

struct CompletionRequest {
  std::string prompt;
  std::string trial_tag;
  RequestKind kind = RequestKind::Generation;
  // Structured view of the prompt, consumed by simulated backends only.
  const QuestionRecord* question = nullptr;
  double confidence = 0.0;
  std::vector<Candidate> candidates;
};

struct CompletionRecord {
  std::string cache_key;
  std::string raw_text;
  std::chrono::milliseconds latency{0};
  int retries_used = 0;
  bool from_cache = false;
  std::string timestamp;  // UTC, empty for backends without a wall clock
};

struct AttemptResult {
  enum class Status { Ok, Transient, Fatal };
  Status status = Status::Ok;
  std::string content;
  std::optional<std::chrono::milliseconds> retry_after;
  std::string error;
};

class Backend {
 public:
  virtual ~Backend() = default;
  virtual std::string identity() const = 0;
  /// Throws AuthError if a credential the backend needs is missing.
  virtual void check_ready() const {}
  virtual AttemptResult attempt(const CompletionRequest& request) = 0;
  virtual bool wall_clock() const { return true; }
};

class HttpBackend : public Backend {
 public:
  explicit HttpBackend(ModelEndpoint endpoint);

  std::string identity() const override { return endpoint_.identity(); }
  void check_ready() const override;
  AttemptResult attempt(const CompletionRequest& request) override;

  const ModelEndpoint& endpoint() const { return endpoint_; }

 private:
  ModelEndpoint endpoint_;
  ParsedUrl url_;
};

/// SHA-256 over (endpoint identity, prompt, trial tag), hex encoded.
std::string completion_cache_key(std::string_view endpoint_identity, std::string_view prompt,
                                 std::string_view trial_tag);

/// Append-only record-per-line JSON store of completions keyed by digest.
/// The first record written for a key wins; later stores are ignored.
class CompletionCache {
 public:
  CompletionCache() = default;  // memory only
  explicit CompletionCache(std::filesystem::path path);

  std::optional<CompletionRecord> lookup(const std::string& key) const;
  void store(const CompletionRecord& record);
  std::size_t size() const;

 private:
  mutable std::mutex mutex_;
  std::optional<std::filesystem::path> path_;
  std::ofstream out_;
  std::unordered_map<std::string, CompletionRecord> entries_;
};

struct RetryPolicy {
  int max_attempts = 5;
  std::chrono::milliseconds base_delay{500};
  std::chrono::milliseconds max_delay{30'000};

  std::chrono::milliseconds delay_before(int attempt) const;  // attempt >= 2
};

/// Token bucket shared by all gateways; zero rate disables limiting.
class RateLimiter {
 public:
  explicit RateLimiter(double requests_per_minute);
  void acquire();

 private:
  std::mutex mutex_;
  double rate_per_second_;
  double capacity_;
  double tokens_;
  std::chrono::steady_clock::time_point last_;
};

/// Cached, retrying access to one backend. Safe to call concurrently;
/// concurrent requests for the same key share a single backend call.
class Gateway {
 public:
  Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<CompletionCache> cache,
          RetryPolicy retry = {}, std::shared_ptr<RateLimiter> limiter = {});

  CompletionRecord complete(const CompletionRequest& request);
  std::string cache_key(const CompletionRequest& request) const;

  /// Attempts sent to the backend (cache hits excluded).
  std::size_t backend_calls() const { return backend_calls_.load(); }
  const Backend& backend() const { return *backend_; }

 private:
  CompletionRecord fetch(const CompletionRequest& request, const std::string& key);

  std::shared_ptr<Backend> backend_;
  std::shared_ptr<CompletionCache> cache_;
  RetryPolicy retry_;
  std::shared_ptr<RateLimiter> limiter_;
  std::atomic<std::size_t> backend_calls_{0};
  std::mutex inflight_mutex_;
  std::map<std::string, std::shared_future<CompletionRecord>> inflight_;
};

std::string utc_timestamp();

}  // namespace overprec
