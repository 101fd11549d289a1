#include "overprec/gateway.hpp"

#include <algorithm>
#include <cctype>
#include <ctime>
#include <thread>

#include <fmt/format.h>
#include <json.hpp>
#include <openssl/evp.h>
#include <spdlog/spdlog.h>

#include "overprec/error.hpp"
#include "overprec/numeric.hpp"

namespace overprec {

void ModelEndpoint::validate() const {
  parse_base_url(base_url);
  if (model_name.empty()) throw ConfigError("endpoint model name is empty");
  if (!(temperature >= 0.0)) throw ConfigError("endpoint temperature must be >= 0");
  if (max_tokens <= 0) throw ConfigError("endpoint max_tokens must be positive");
  if (timeout.count() <= 0) throw ConfigError("endpoint timeout must be positive");
}

std::string ModelEndpoint::identity() const {
  return fmt::format("http|{}|{}|t={}|max={}", base_url, model_name, format_number(temperature),
                     max_tokens);
}

ParsedUrl parse_base_url(std::string_view url) {
  ParsedUrl parsed;
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string_view::npos) {
    throw ConfigError(fmt::format("base_url '{}' has no scheme", url));
  }
  parsed.scheme = std::string(url.substr(0, scheme_end));
  if (parsed.scheme != "http" && parsed.scheme != "https") {
    throw ConfigError(fmt::format("base_url '{}' must use http or https", url));
  }
  const std::string rest(url.substr(scheme_end + 3));
  const auto slash = rest.find('/');
  std::string_view authority = std::string_view(rest).substr(0, slash);
  if (slash != std::string_view::npos) parsed.path_prefix = std::string(rest.substr(slash));
  while (!parsed.path_prefix.empty() && parsed.path_prefix.back() == '/') {
    parsed.path_prefix.pop_back();
  }

  const auto colon = authority.rfind(':');
  if (colon != std::string_view::npos) {
    const std::string_view port_text = authority.substr(colon + 1);
    if (port_text.empty() ||
        !std::all_of(port_text.begin(), port_text.end(),
                     [](char c) { return std::isdigit(static_cast<unsigned char>(c)); })) {
      throw ConfigError(fmt::format("base_url '{}' has an invalid port", url));
    }
    parsed.port = std::stoi(std::string(port_text));
    authority = authority.substr(0, colon);
  } else {
    parsed.port = parsed.scheme == "https" ? 443 : 80;
  }
  if (authority.empty() || parsed.port <= 0 || parsed.port > 65535) {
    throw ConfigError(fmt::format("base_url '{}' has no valid host", url));
  }
  for (char c : authority) {
    if (std::isspace(static_cast<unsigned char>(c)) || c == '@' || c == '?' || c == '#') {
      throw ConfigError(fmt::format("base_url '{}' has an invalid host", url));
    }
  }
  parsed.host = std::string(authority);
  return parsed;
}

std::string completion_cache_key(std::string_view endpoint_identity, std::string_view prompt,
                                 std::string_view trial_tag) {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), &EVP_MD_CTX_free);
  const char separator = '\x1f';
  EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr);
  EVP_DigestUpdate(ctx.get(), endpoint_identity.data(), endpoint_identity.size());
  EVP_DigestUpdate(ctx.get(), &separator, 1);
  EVP_DigestUpdate(ctx.get(), prompt.data(), prompt.size());
  EVP_DigestUpdate(ctx.get(), &separator, 1);
  EVP_DigestUpdate(ctx.get(), trial_tag.data(), trial_tag.size());
  unsigned char digest[EVP_MAX_MD_SIZE];
  unsigned int length = 0;
  EVP_DigestFinal_ex(ctx.get(), digest, &length);

  std::string hex;
  hex.reserve(length * 2);
  for (unsigned int i = 0; i < length; ++i) fmt::format_to(std::back_inserter(hex), "{:02x}", digest[i]);
  return hex;
}

CompletionCache::CompletionCache(std::filesystem::path path) : path_(std::move(path)) {
  if (std::filesystem::exists(*path_)) {
    std::ifstream in(*path_);
    std::string line;
    std::size_t line_number = 0;
    while (std::getline(in, line)) {
      ++line_number;
      if (line.empty()) continue;
      auto parsed = nlohmann::json::parse(line, nullptr, false);
      if (parsed.is_discarded() || !parsed.contains("key") || !parsed.contains("raw_text")) {
        // A torn final line from an interrupted run; everything before it is valid.
        spdlog::warn("{}:{}: skipping unreadable cache line", path_->string(), line_number);
        continue;
      }
      CompletionRecord record;
      record.cache_key = parsed["key"].get<std::string>();
      record.raw_text = parsed["raw_text"].get<std::string>();
      record.latency = std::chrono::milliseconds(parsed.value("latency_ms", 0));
      record.retries_used = parsed.value("retries_used", 0);
      record.timestamp = parsed.value("timestamp", std::string());
      entries_.emplace(record.cache_key, std::move(record));
    }
  } else if (path_->has_parent_path()) {
    std::filesystem::create_directories(path_->parent_path());
  }
  out_.open(*path_, std::ios::app);
  if (!out_) throw GatewayError(fmt::format("cannot open cache file '{}'", path_->string()));
}

std::optional<CompletionRecord> CompletionCache::lookup(const std::string& key) const {
  std::lock_guard lock(mutex_);
  auto it = entries_.find(key);
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void CompletionCache::store(const CompletionRecord& record) {
  std::lock_guard lock(mutex_);
  auto [it, inserted] = entries_.emplace(record.cache_key, record);
  if (!inserted) return;
  it->second.from_cache = false;
  if (path_) {
    nlohmann::json line = {{"key", record.cache_key},
                           {"raw_text", record.raw_text},
                           {"latency_ms", record.latency.count()},
                           {"retries_used", record.retries_used},
                           {"timestamp", record.timestamp}};
    out_ << line.dump() << '\n';
    out_.flush();
  }
}

std::size_t CompletionCache::size() const {
  std::lock_guard lock(mutex_);
  return entries_.size();
}

std::chrono::milliseconds RetryPolicy::delay_before(int attempt) const {
  const int doublings = std::clamp(attempt - 2, 0, 30);
  const auto delay = base_delay * (std::int64_t{1} << doublings);
  return std::min(delay, max_delay);
}

RateLimiter::RateLimiter(double requests_per_minute)
    : rate_per_second_(requests_per_minute / 60.0),
      capacity_(std::max(1.0, requests_per_minute / 60.0)),
      tokens_(capacity_),
      last_(std::chrono::steady_clock::now()) {}

void RateLimiter::acquire() {
  if (rate_per_second_ <= 0.0) return;
  std::unique_lock lock(mutex_);
  while (true) {
    const auto now = std::chrono::steady_clock::now();
    const double elapsed = std::chrono::duration<double>(now - last_).count();
    tokens_ = std::min(capacity_, tokens_ + elapsed * rate_per_second_);
    last_ = now;
    if (tokens_ >= 1.0) {
      tokens_ -= 1.0;
      return;
    }
    const double wait_seconds = (1.0 - tokens_) / rate_per_second_;
    lock.unlock();
    std::this_thread::sleep_for(std::chrono::duration<double>(wait_seconds));
    lock.lock();
  }
}

Gateway::Gateway(std::shared_ptr<Backend> backend, std::shared_ptr<CompletionCache> cache,
                 RetryPolicy retry, std::shared_ptr<RateLimiter> limiter)
    : backend_(std::move(backend)),
      cache_(cache ? std::move(cache) : std::make_shared<CompletionCache>()),
      retry_(retry),
      limiter_(std::move(limiter)) {
  if (!backend_) throw GatewayError("gateway needs a backend");
  if (retry_.max_attempts < 1) throw ConfigError("retry max_attempts must be >= 1");
}

std::string Gateway::cache_key(const CompletionRequest& request) const {
  return completion_cache_key(backend_->identity(), request.prompt, request.trial_tag);
}

CompletionRecord Gateway::complete(const CompletionRequest& request) {
  const std::string key = cache_key(request);
  if (auto hit = cache_->lookup(key)) {
    hit->from_cache = true;
    return *hit;
  }

  std::promise<CompletionRecord> promise;
  std::shared_future<CompletionRecord> shared;
  {
    std::lock_guard lock(inflight_mutex_);
    if (auto hit = cache_->lookup(key)) {
      hit->from_cache = true;
      return *hit;
    }
    auto it = inflight_.find(key);
    if (it != inflight_.end()) {
      shared = it->second;
    } else {
      inflight_.emplace(key, promise.get_future().share());
    }
  }
  if (shared.valid()) {
    CompletionRecord record = shared.get();
    record.from_cache = true;
    return record;
  }

  try {
    CompletionRecord record = fetch(request, key);
    cache_->store(record);
    promise.set_value(record);
    std::lock_guard lock(inflight_mutex_);
    inflight_.erase(key);
    return record;
  } catch (...) {
    promise.set_exception(std::current_exception());
    std::lock_guard lock(inflight_mutex_);
    inflight_.erase(key);
    throw;
  }
}

CompletionRecord Gateway::fetch(const CompletionRequest& request, const std::string& key) {
  backend_->check_ready();

  std::string last_error;
  std::optional<std::chrono::milliseconds> retry_after;
  for (int attempt = 1; attempt <= retry_.max_attempts; ++attempt) {
    if (attempt > 1) {
      auto delay = retry_.delay_before(attempt);
      if (retry_after) delay = std::max(delay, *retry_after);
      std::this_thread::sleep_for(delay);
    }
    if (limiter_) limiter_->acquire();
    ++backend_calls_;

    const auto started = std::chrono::steady_clock::now();
    AttemptResult result = backend_->attempt(request);
    const auto latency = std::chrono::duration_cast<std::chrono::milliseconds>(
        std::chrono::steady_clock::now() - started);

    switch (result.status) {
      case AttemptResult::Status::Ok: {
        CompletionRecord record;
        record.cache_key = key;
        record.raw_text = std::move(result.content);
        record.latency = latency;
        record.retries_used = attempt - 1;
        if (backend_->wall_clock()) record.timestamp = utc_timestamp();
        return record;
      }
      case AttemptResult::Status::Fatal:
        throw GatewayError(fmt::format("non-retryable failure: {}", result.error));
      case AttemptResult::Status::Transient:
        last_error = std::move(result.error);
        retry_after = result.retry_after;
        spdlog::debug("attempt {}/{} failed: {}", attempt, retry_.max_attempts, last_error);
        break;
    }
  }
  throw GatewayError(
      fmt::format("exhausted retries after {} attempts: {}", retry_.max_attempts, last_error));
}

std::string utc_timestamp() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t seconds = std::chrono::system_clock::to_time_t(now);
  std::tm utc{};
  gmtime_r(&seconds, &utc);
  char buffer[32];
  std::strftime(buffer, sizeof(buffer), "%Y-%m-%dT%H:%M:%SZ", &utc);
  return buffer;
}

}  // namespace overprec
