#pragma once

#include <cstddef>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "overprec/dataset.hpp"
#include "overprec/simulator.hpp"

namespace overprec {

struct MockRequest {
  std::string model;
  std::string prompt;  // content of the last user message
  std::string trial_tag;
  std::string authorization;
};

/// Produces the assistant message for one request. Throwing ParseError turns
/// into an HTTP 400 reply.
using MockHandler = std::function<std::string(const MockRequest&)>;

/// Local listener speaking the /chat/completions schema, for tests and dry
/// runs. Binds an ephemeral port unless one is given.
class MockServer {
 public:
  explicit MockServer(MockHandler handler, std::string host = "127.0.0.1", int port = 0);
  ~MockServer();

  MockServer(const MockServer&) = delete;
  MockServer& operator=(const MockServer&) = delete;

  int port() const;
  /// e.g. "http://127.0.0.1:41234/v1"
  std::string base_url() const;

  /// The next requests answer with these statuses, one each, before normal
  /// service resumes.
  void fail_next(std::vector<int> statuses, std::optional<int> retry_after_seconds = {});
  /// Every request answers with `status` until cleared.
  void always_fail(int status);
  void clear_failures();

  std::size_t request_count() const;

  /// Blocks until stop() is called from another thread or a signal handler.
  void wait();
  void stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Replies with the given texts in rotation.
MockHandler canned_handler(std::vector<std::string> replies);

/// Answers prompts rendered with the default templates by locating the
/// question in `corpus` and running the simulated responder on it.
MockHandler simulating_handler(SimulatedResponderProfile profile, Corpus corpus);

}  // namespace overprec
