#include "overprec/mock_server.hpp"

#include <atomic>
#include <deque>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <fmt/format.h>
#include <httplib.h>
#include <json.hpp>
#include <spdlog/spdlog.h>

#include "overprec/error.hpp"
#include "overprec/numeric.hpp"
#include "overprec/prompt.hpp"

namespace overprec {

struct MockServer::Impl {
  MockHandler handler;
  std::string host;
  int port = 0;
  httplib::Server server;
  std::thread thread;

  mutable std::mutex mutex;
  std::deque<int> scheduled;
  std::optional<int> retry_after;
  std::optional<int> always;
  std::atomic<std::size_t> requests{0};
  std::atomic<std::size_t> served{0};

  std::optional<int> next_failure() {
    std::lock_guard lock(mutex);
    if (!scheduled.empty()) {
      const int status = scheduled.front();
      scheduled.pop_front();
      return status;
    }
    return always;
  }

  void handle(const httplib::Request& req, httplib::Response& res) {
    ++requests;
    if (auto failure = next_failure()) {
      res.status = *failure;
      std::lock_guard lock(mutex);
      if (retry_after) res.set_header("Retry-After", std::to_string(*retry_after));
      res.set_content(nlohmann::json{{"error", {{"message", "scheduled failure"}}}}.dump(),
                      "application/json");
      return;
    }

    auto body = nlohmann::json::parse(req.body, nullptr, false);
    if (body.is_discarded() || !body.contains("messages") || !body["messages"].is_array() ||
        body["messages"].empty()) {
      res.status = 400;
      res.set_content(R"({"error":{"message":"malformed request"}})", "application/json");
      return;
    }

    MockRequest request;
    request.model = body.value("model", std::string());
    const auto& last = body["messages"].back();
    request.prompt = last.value("content", std::string());
    request.trial_tag = req.get_header_value("X-Trial-Tag");
    request.authorization = req.get_header_value("Authorization");

    std::string content;
    try {
      content = handler(request);
    } catch (const Error& e) {
      res.status = 400;
      res.set_content(nlohmann::json{{"error", {{"message", e.what()}}}}.dump(),
                      "application/json");
      return;
    }

    const nlohmann::json reply = {
        {"id", fmt::format("mock-{}", served++)},
        {"object", "chat.completion"},
        {"model", request.model},
        {"choices",
         {{{"index", 0},
           {"message", {{"role", "assistant"}, {"content", content}}},
           {"finish_reason", "stop"}}}},
    };
    res.status = 200;
    res.set_content(reply.dump(), "application/json");
  }
};

MockServer::MockServer(MockHandler handler, std::string host, int port)
    : impl_(std::make_unique<Impl>()) {
  impl_->handler = std::move(handler);
  impl_->host = std::move(host);
  impl_->server.Post(R"(.*/chat/completions)",
                     [impl = impl_.get()](const httplib::Request& req, httplib::Response& res) {
                       impl->handle(req, res);
                     });
  if (port == 0) {
    impl_->port = impl_->server.bind_to_any_port(impl_->host);
  } else if (impl_->server.bind_to_port(impl_->host, port)) {
    impl_->port = port;
  } else {
    impl_->port = -1;
  }
  if (impl_->port <= 0) {
    throw GatewayError(fmt::format("mock server cannot bind {}:{}", impl_->host, port));
  }
  impl_->thread = std::thread([impl = impl_.get()] { impl->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
}

MockServer::~MockServer() { stop(); }

int MockServer::port() const { return impl_->port; }

std::string MockServer::base_url() const {
  return fmt::format("http://{}:{}/v1", impl_->host, impl_->port);
}

void MockServer::fail_next(std::vector<int> statuses, std::optional<int> retry_after_seconds) {
  std::lock_guard lock(impl_->mutex);
  impl_->scheduled.insert(impl_->scheduled.end(), statuses.begin(), statuses.end());
  impl_->retry_after = retry_after_seconds;
}

void MockServer::always_fail(int status) {
  std::lock_guard lock(impl_->mutex);
  impl_->always = status;
}

void MockServer::clear_failures() {
  std::lock_guard lock(impl_->mutex);
  impl_->scheduled.clear();
  impl_->always.reset();
  impl_->retry_after.reset();
}

std::size_t MockServer::request_count() const { return impl_->requests.load(); }

void MockServer::wait() {
  if (impl_->thread.joinable()) impl_->thread.join();
}

void MockServer::stop() {
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

MockHandler canned_handler(std::vector<std::string> replies) {
  if (replies.empty()) throw ConfigError("canned handler needs at least one reply");
  auto next = std::make_shared<std::atomic<std::size_t>>(0);
  return [replies = std::move(replies), next](const MockRequest&) {
    return replies[next->fetch_add(1) % replies.size()];
  };
}

namespace {

constexpr std::string_view kRefineMarker = "\n- Possible Answers:\n";
constexpr std::string_view kRefineQuestion = "\n- Question: ";
constexpr std::string_view kQuestion = "\nQuestion: ";
constexpr std::string_view kConfidence = "you should be ";

std::vector<Candidate> parse_candidate_lines(std::string_view text) {
  std::vector<Candidate> out;
  std::size_t start = 0;
  while (start < text.size()) {
    std::size_t end = text.find('\n', start);
    if (end == std::string_view::npos) end = text.size();
    const std::string_view line = trim(text.substr(start, end - start));
    start = end + 1;
    if (line.empty()) continue;

    double fields[3];
    std::size_t field = 0;
    std::size_t from = 0;
    while (field < 3) {
      const std::size_t bar = line.find('|', from);
      const auto number = parse_number(line.substr(from, bar == std::string_view::npos
                                                               ? std::string_view::npos
                                                               : bar - from));
      if (!number) throw ParseError(fmt::format("bad candidate line '{}'", line));
      fields[field++] = *number;
      if (bar == std::string_view::npos) break;
      from = bar + 1;
    }
    if (field != 3) throw ParseError(fmt::format("bad candidate line '{}'", line));
    out.push_back({fields[0], fields[1], fields[2]});
  }
  return out;
}

}  // namespace

MockHandler simulating_handler(SimulatedResponderProfile profile, Corpus corpus) {
  profile.validate();
  auto records = std::make_shared<Corpus>(std::move(corpus));
  auto by_text = std::make_shared<std::unordered_map<std::string, const QuestionRecord*>>();
  for (const auto& record : *records) by_text->emplace(question_block_text(record), &record);

  return [profile, records, by_text](const MockRequest& request) -> std::string {
    const std::string_view prompt = request.prompt;
    auto lookup = [&](std::string_view text) -> const QuestionRecord& {
      auto it = by_text->find(std::string(text));
      if (it == by_text->end()) throw ParseError("question not in the mock corpus");
      return *it->second;
    };

    const std::size_t marker = prompt.rfind(kRefineMarker);
    if (marker != std::string_view::npos) {
      const std::size_t q = prompt.find(kRefineQuestion);
      if (q == std::string_view::npos || q > marker) {
        throw ParseError("refinement prompt without a question");
      }
      const std::size_t begin = q + kRefineQuestion.size();
      const auto& question = lookup(prompt.substr(begin, marker - begin));
      const auto candidates = parse_candidate_lines(prompt.substr(marker + kRefineMarker.size()));
      return simulate_refinement(profile, question, candidates, request.trial_tag);
    }

    const std::size_t c = prompt.find(kConfidence);
    if (c == std::string_view::npos) throw ParseError("prompt states no confidence level");
    const auto confidence = match_number(prompt, c + kConfidence.size());
    if (!confidence) throw ParseError("prompt states no confidence level");
    const std::size_t q = prompt.find(kQuestion);
    if (q == std::string_view::npos) throw ParseError("prompt has no question block");
    const auto& question = lookup(prompt.substr(q + kQuestion.size()));
    return simulate(profile, question, confidence->value, request.trial_tag);
  };
}

}  // namespace overprec
