#include <cstdlib>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>

#include "overprec/error.hpp"
#include "overprec/gateway.hpp"
#include "overprec/numeric.hpp"

namespace overprec {
namespace {

std::optional<std::chrono::milliseconds> retry_after_header(const httplib::Response& response) {
  if (!response.has_header("Retry-After")) return std::nullopt;
  auto seconds = parse_number(response.get_header_value("Retry-After"));
  if (!seconds || *seconds < 0) return std::nullopt;
  return std::chrono::milliseconds(static_cast<std::int64_t>(*seconds * 1000.0));
}

std::string truncated(const std::string& body) {
  constexpr std::size_t kLimit = 200;
  return body.size() <= kLimit ? body : body.substr(0, kLimit) + "...";
}

}  // namespace

HttpBackend::HttpBackend(ModelEndpoint endpoint)
    : endpoint_(std::move(endpoint)), url_(parse_base_url(endpoint_.base_url)) {
  endpoint_.validate();
}

void HttpBackend::check_ready() const {
  if (endpoint_.auth_env.empty()) return;
  const char* key = std::getenv(endpoint_.auth_env.c_str());
  if (key == nullptr || *key == '\0') {
    throw AuthError(fmt::format("environment variable {} is not set", endpoint_.auth_env));
  }
}

AttemptResult HttpBackend::attempt(const CompletionRequest& request) {
  AttemptResult result;

  const std::string origin = fmt::format("{}://{}:{}", url_.scheme, url_.host, url_.port);
  httplib::Client client(origin);
  const auto timeout_us = std::chrono::duration_cast<std::chrono::microseconds>(endpoint_.timeout);
  client.set_connection_timeout(timeout_us);
  client.set_read_timeout(timeout_us);
  client.set_write_timeout(timeout_us);

  httplib::Headers headers;
  if (!endpoint_.auth_env.empty()) {
    if (const char* key = std::getenv(endpoint_.auth_env.c_str())) {
      headers.emplace("Authorization", fmt::format("Bearer {}", key));
    }
  }
  if (!request.trial_tag.empty()) headers.emplace("X-Trial-Tag", request.trial_tag);

  const nlohmann::json body = {
      {"model", endpoint_.model_name},
      {"messages", nlohmann::json::array({{{"role", "user"}, {"content", request.prompt}}})},
      {"temperature", endpoint_.temperature},
      {"max_tokens", endpoint_.max_tokens},
  };

  auto response =
      client.Post(url_.path_prefix + "/chat/completions", headers, body.dump(), "application/json");
  if (!response) {
    result.status = AttemptResult::Status::Transient;
    result.error = fmt::format("request to {} failed: {}", origin, httplib::to_string(response.error()));
    return result;
  }

  const int status = response->status;
  if (status == 200) {
    auto parsed = nlohmann::json::parse(response->body, nullptr, false);
    const nlohmann::json* content = nullptr;
    if (!parsed.is_discarded() && parsed.contains("choices") && parsed["choices"].is_array() &&
        !parsed["choices"].empty()) {
      const auto& choice = parsed["choices"][0];
      if (choice.contains("message") && choice["message"].contains("content") &&
          choice["message"]["content"].is_string()) {
        content = &choice["message"]["content"];
      }
    }
    if (content == nullptr) {
      result.status = AttemptResult::Status::Fatal;
      result.error = fmt::format("response has no choices[0].message.content: {}",
                                 truncated(response->body));
      return result;
    }
    result.content = content->get<std::string>();
    return result;
  }

  result.error = fmt::format("HTTP {}: {}", status, truncated(response->body));
  if (status == 429) {
    result.status = AttemptResult::Status::Transient;
    result.retry_after = retry_after_header(*response);
  } else if (status >= 500) {
    result.status = AttemptResult::Status::Transient;
  } else {
    result.status = AttemptResult::Status::Fatal;
  }
  return result;
}

}  // namespace overprec
