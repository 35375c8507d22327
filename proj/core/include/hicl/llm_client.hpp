#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>
#include <functional>
#include <memory>
#include <mutex>
#include <semaphore>
#include <string>
#include <string_view>
#include <vector>

#include "hicl/error.hpp"

namespace hicl {

struct ChatMessage {
  std::string role;
  std::string content;
};

enum class LlmPurpose { Describe, ClassifyLevel, ClassifyPath, PickExample };

std::string_view to_string(LlmPurpose purpose);

/// A chat-completion request. `candidates` and `demo_answers` mirror what
/// the prompt text already contains; only deterministic stubs read them.
struct LlmRequest {
  std::vector<ChatMessage> messages;
  double temperature = 0.2;
  LlmPurpose purpose = LlmPurpose::ClassifyLevel;
  std::vector<std::string> candidates;
  struct DemoAnswer {
    std::string answer;
    double score = 0.0;
  };
  std::vector<DemoAnswer> demo_answers;  // in retrieval rank order
};

class LlmError : public Error {
 public:
  enum class Kind { Timeout, Transport, HttpStatus, MalformedBody, EmptyReply, ScriptExhausted };

  LlmError(Kind kind, const std::string& message, int status = 0);

  Kind kind() const { return kind_; }
  int status() const { return status_; }
  /// Timeouts, transport failures, 429 and 5xx are worth retrying.
  bool retryable() const;

 private:
  Kind kind_;
  int status_;
};

class LlmClient {
 public:
  virtual ~LlmClient() = default;
  virtual std::string complete(const LlmRequest& request) = 0;
  virtual std::string name() const = 0;
};

/// Returns the last non-empty line of the final message.
class EchoClient final : public LlmClient {
 public:
  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return "stub:echo"; }
};

/// Deterministic stand-in for a model that trusts its demonstrations: picks
/// the candidate carried by the best-scoring demo (first candidate if none
/// is carried). For PickExample requests answers "1".
class OracleDemoClient final : public LlmClient {
 public:
  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return "stub:oracle-demo"; }
};

/// Replays recorded replies in order; throws ScriptExhausted past the end.
class FixedScriptClient final : public LlmClient {
 public:
  explicit FixedScriptClient(std::vector<std::string> replies);
  /// Reads the `reply` field of each record in an audit log (or any JSON
  /// lines file with that field). Records of failed calls are skipped.
  static std::unique_ptr<FixedScriptClient> from_audit_log(const std::filesystem::path& file);

  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return "stub:fixed-script"; }
  std::size_t remaining() const;

 private:
  mutable std::mutex mu_;
  std::vector<std::string> replies_;
  std::size_t next_ = 0;
};

struct RetryPolicy {
  int max_attempts = 3;
  std::chrono::milliseconds initial_backoff{500};
  double multiplier = 2.0;
  std::chrono::milliseconds max_backoff{8000};

  /// Delay before attempt `attempt + 1`, attempt being 1-based.
  std::chrono::milliseconds backoff_after(int attempt) const;
};

struct HttpClientConfig {
  std::string url = "http://127.0.0.1:8000/v1/chat/completions";
  std::string model = "gpt-3.5-turbo";
  std::string api_key;
  std::chrono::milliseconds timeout{30000};
  RetryPolicy retry{};

  /// HICL_LLM_URL, HICL_LLM_MODEL, HICL_LLM_API_KEY, HICL_LLM_TIMEOUT_MS,
  /// HICL_LLM_MAX_ATTEMPTS override the defaults when set.
  static HttpClientConfig from_env();
};

/// OpenAI-style chat completion over HTTP: POST {model, messages,
/// temperature}, reply read from choices[0].message.content.
class HttpChatClient final : public LlmClient {
 public:
  explicit HttpChatClient(HttpClientConfig config);

  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return "http:" + config_.url; }

  /// Wire body for a request.
  std::string request_body(const LlmRequest& request) const;
  /// Extracts the reply from a response body; throws MalformedBody.
  static std::string parse_reply(std::string_view body);

 private:
  std::string attempt(const std::string& body);
  HttpClientConfig config_;
};

/// Appends one JSON record per call (request, reply or error, elapsed time)
/// to a line-delimited log.
class AuditedClient final : public LlmClient {
 public:
  AuditedClient(std::unique_ptr<LlmClient> inner, std::filesystem::path log_file);

  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return inner_->name(); }

 private:
  std::unique_ptr<LlmClient> inner_;
  std::filesystem::path log_file_;
  std::mutex mu_;
  std::size_t seq_ = 0;
};

/// Caps the number of concurrent in-flight calls to the wrapped client.
class BoundedClient final : public LlmClient {
 public:
  BoundedClient(std::unique_ptr<LlmClient> inner, std::ptrdiff_t max_in_flight);

  std::string complete(const LlmRequest& request) override;
  std::string name() const override { return inner_->name(); }

 private:
  std::unique_ptr<LlmClient> inner_;
  std::counting_semaphore<1024> slots_;
};

/// "stub:echo", "stub:oracle-demo", "stub:fixed-script=<file>", "http"
/// (config from environment) or "http:<url>".
std::unique_ptr<LlmClient> make_llm_client(std::string_view spec);

}  // namespace hicl
