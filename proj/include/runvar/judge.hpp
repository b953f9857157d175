#pragma once

// Text-generation judge used for extraction, clustering and grading.

#include <chrono>
#include <memory>
#include <semaphore>
#include <string>
#include <string_view>

#include <json.hpp>

namespace runvar {

struct JudgeSettings {
  /// "mock" selects the built-in deterministic RuleBasedJudge.
  std::string endpoint = "mock";
  std::string model;
  std::chrono::milliseconds timeout{60'000};
  int max_retries = 2;
  int max_in_flight = 4;
  /// Environment variable holding the bearer token, if any.
  std::string token_env = "RUNVAR_JUDGE_TOKEN";
};

class JudgeTransport {
 public:
  virtual ~JudgeTransport() = default;
  /// Sends one prompt and returns the raw completion text.
  /// Throws OracleUnavailable when the service cannot be reached.
  virtual std::string complete(std::string_view prompt) = 0;
  /// True when identical prompts are guaranteed to produce identical text.
  virtual bool deterministic() const noexcept { return false; }
};

/// Request body for a chat-completion endpoint. Decoding is always greedy.
nlohmann::json chat_request_body(std::string_view model, std::string_view prompt);

/// Extracts choices[0].message.content from a chat-completion response body.
std::string chat_response_content(std::string_view body);

/// Chat-completion client over HTTP(S) with retry and timeout.
class HttpJudge final : public JudgeTransport {
 public:
  explicit HttpJudge(JudgeSettings settings);
  std::string complete(std::string_view prompt) override;

 private:
  JudgeSettings settings_;
  std::string base_;  // scheme://host[:port]
  std::string path_;
  std::string token_;
};

/// Offline judge that answers every prompt template with simple text rules.
/// Reports are expected to use "[n]" citation markers and a "[n] URL"
/// reference list, and to state the answer on a line beginning "Answer:".
class RuleBasedJudge final : public JudgeTransport {
 public:
  std::string complete(std::string_view prompt) override;
  bool deterministic() const noexcept override { return true; }
};

/// Caps the number of concurrent requests sent to an inner judge.
class ThrottledJudge final : public JudgeTransport {
 public:
  ThrottledJudge(JudgeTransport& inner, int max_in_flight);
  std::string complete(std::string_view prompt) override;
  bool deterministic() const noexcept override { return inner_.deterministic(); }

 private:
  JudgeTransport& inner_;
  std::counting_semaphore<> slots_;
};

std::unique_ptr<JudgeTransport> make_judge(const JudgeSettings& settings);

}  // namespace runvar
