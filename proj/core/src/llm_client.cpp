#include "hicl/llm_client.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <limits>
#include <thread>

#include "hicl/io.hpp"
#include "httplib.h"
#include "json.hpp"
#include "text_util.hpp"

namespace hicl {

using nlohmann::json;

std::string_view to_string(LlmPurpose purpose) {
  switch (purpose) {
    case LlmPurpose::Describe: return "describe";
    case LlmPurpose::ClassifyLevel: return "classify-level";
    case LlmPurpose::ClassifyPath: return "classify-path";
    case LlmPurpose::PickExample: return "pick-example";
  }
  return "?";
}

LlmError::LlmError(Kind kind, const std::string& message, int status)
    : Error(message), kind_(kind), status_(status) {}

bool LlmError::retryable() const {
  switch (kind_) {
    case Kind::Timeout:
    case Kind::Transport: return true;
    case Kind::HttpStatus: return status_ == 429 || status_ >= 500;
    default: return false;
  }
}

std::string EchoClient::complete(const LlmRequest& request) {
  if (request.messages.empty()) return {};
  std::string_view content = request.messages.back().content;
  auto lines = detail::split(content, '\n');
  for (auto it = lines.rbegin(); it != lines.rend(); ++it) {
    auto t = detail::trim(*it);
    if (!t.empty()) return std::string(t);
  }
  return {};
}

std::string OracleDemoClient::complete(const LlmRequest& request) {
  if (request.purpose == LlmPurpose::PickExample) return request.demo_answers.empty() ? "" : "1";
  if (request.candidates.empty()) {
    return request.demo_answers.empty() ? "" : request.demo_answers.front().answer;
  }
  const std::string* best = &request.candidates.front();
  double best_score = -std::numeric_limits<double>::infinity();
  for (const std::string& cand : request.candidates) {
    for (const auto& demo : request.demo_answers) {
      if (demo.answer == cand && demo.score > best_score) {
        best_score = demo.score;
        best = &cand;
      }
    }
  }
  return *best;
}

FixedScriptClient::FixedScriptClient(std::vector<std::string> replies) : replies_(std::move(replies)) {}

std::unique_ptr<FixedScriptClient> FixedScriptClient::from_audit_log(const std::filesystem::path& file) {
  std::vector<std::string> replies;
  std::size_t line_no = 0;
  const std::string content = read_text_file(file);
  for (std::string_view line : detail::split(content, '\n')) {
    ++line_no;
    if (detail::trim(line).empty()) continue;
    json rec = json::parse(line, nullptr, false);
    // failed calls are logged too; they carry no reply to replay
    if (rec.is_object() && rec.contains("error") && !rec.contains("reply")) continue;
    if (rec.is_discarded() || !rec.is_object() || !rec.contains("reply") || !rec["reply"].is_string()) {
      throw FormatError("script " + file.string() + " line " + std::to_string(line_no) + ": expected a 'reply' string");
    }
    replies.push_back(rec["reply"].get<std::string>());
  }
  return std::make_unique<FixedScriptClient>(std::move(replies));
}

std::string FixedScriptClient::complete(const LlmRequest&) {
  std::lock_guard lock(mu_);
  if (next_ >= replies_.size()) {
    throw LlmError(LlmError::Kind::ScriptExhausted,
                   "fixed script exhausted after " + std::to_string(replies_.size()) + " replies");
  }
  return replies_[next_++];
}

std::size_t FixedScriptClient::remaining() const {
  std::lock_guard lock(mu_);
  return replies_.size() - next_;
}

std::chrono::milliseconds RetryPolicy::backoff_after(int attempt) const {
  double ms = static_cast<double>(initial_backoff.count()) * std::pow(multiplier, attempt - 1);
  ms = std::min(ms, static_cast<double>(max_backoff.count()));
  return std::chrono::milliseconds(static_cast<long long>(ms));
}

HttpClientConfig HttpClientConfig::from_env() {
  HttpClientConfig cfg;
  if (const char* v = std::getenv("HICL_LLM_URL")) cfg.url = v;
  if (const char* v = std::getenv("HICL_LLM_MODEL")) cfg.model = v;
  if (const char* v = std::getenv("HICL_LLM_API_KEY")) cfg.api_key = v;
  if (const char* v = std::getenv("HICL_LLM_TIMEOUT_MS")) cfg.timeout = std::chrono::milliseconds(std::atoll(v));
  if (const char* v = std::getenv("HICL_LLM_MAX_ATTEMPTS")) cfg.retry.max_attempts = std::max(1, std::atoi(v));
  return cfg;
}

HttpChatClient::HttpChatClient(HttpClientConfig config) : config_(std::move(config)) {
  if (config_.retry.max_attempts < 1) throw ConfigError("retry policy needs at least one attempt");
}

std::string HttpChatClient::request_body(const LlmRequest& request) const {
  json body;
  body["model"] = config_.model;
  body["temperature"] = request.temperature;
  body["messages"] = json::array();
  for (const ChatMessage& m : request.messages) body["messages"].push_back({{"role", m.role}, {"content", m.content}});
  return body.dump();
}

std::string HttpChatClient::parse_reply(std::string_view body) {
  json doc = json::parse(body, nullptr, false);
  if (doc.is_discarded()) throw LlmError(LlmError::Kind::MalformedBody, "LLM response is not JSON");
  try {
    const json& content = doc.at("choices").at(0).at("message").at("content");
    if (!content.is_string()) throw LlmError(LlmError::Kind::MalformedBody, "LLM response content is not a string");
    std::string reply = content.get<std::string>();
    if (detail::trim(reply).empty()) throw LlmError(LlmError::Kind::EmptyReply, "LLM returned an empty reply");
    return reply;
  } catch (const json::exception&) {
    throw LlmError(LlmError::Kind::MalformedBody, "LLM response lacks choices[0].message.content");
  }
}

std::string HttpChatClient::attempt(const std::string& body) {
  // Split "scheme://host[:port]/path".
  const std::string& url = config_.url;
  auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos) throw ConfigError("LLM url lacks a scheme: " + url);
  auto path_start = url.find('/', scheme_end + 3);
  std::string origin = path_start == std::string::npos ? url : url.substr(0, path_start);
  std::string path = path_start == std::string::npos ? "/" : url.substr(path_start);

  httplib::Client cli(origin);
  const auto secs = std::chrono::duration_cast<std::chrono::seconds>(config_.timeout);
  const auto usecs = std::chrono::duration_cast<std::chrono::microseconds>(config_.timeout - secs);
  cli.set_connection_timeout(secs.count(), static_cast<time_t>(usecs.count()));
  cli.set_read_timeout(secs.count(), static_cast<time_t>(usecs.count()));
  cli.set_write_timeout(secs.count(), static_cast<time_t>(usecs.count()));
  httplib::Headers headers;
  if (!config_.api_key.empty()) headers.emplace("Authorization", "Bearer " + config_.api_key);

  auto res = cli.Post(path, headers, body, "application/json");
  if (!res) {
    const auto err = res.error();
    if (err == httplib::Error::Read || err == httplib::Error::ConnectionTimeout) {
      throw LlmError(LlmError::Kind::Timeout, "LLM request timed out (" + httplib::to_string(err) + ")");
    }
    throw LlmError(LlmError::Kind::Transport, "LLM request failed: " + httplib::to_string(err));
  }
  if (res->status < 200 || res->status >= 300) {
    throw LlmError(LlmError::Kind::HttpStatus, "LLM endpoint returned HTTP " + std::to_string(res->status),
                   res->status);
  }
  return parse_reply(res->body);
}

std::string HttpChatClient::complete(const LlmRequest& request) {
  const std::string body = request_body(request);
  for (int attempt_no = 1;; ++attempt_no) {
    try {
      return attempt(body);
    } catch (const LlmError& e) {
      if (!e.retryable() || attempt_no >= config_.retry.max_attempts) throw;
      std::this_thread::sleep_for(config_.retry.backoff_after(attempt_no));
    }
  }
}

AuditedClient::AuditedClient(std::unique_ptr<LlmClient> inner, std::filesystem::path log_file)
    : inner_(std::move(inner)), log_file_(std::move(log_file)) {}

std::string AuditedClient::complete(const LlmRequest& request) {
  const auto start = std::chrono::steady_clock::now();
  json rec;
  rec["client"] = inner_->name();
  rec["purpose"] = std::string(to_string(request.purpose));
  rec["temperature"] = request.temperature;
  rec["messages"] = json::array();
  for (const ChatMessage& m : request.messages) rec["messages"].push_back({{"role", m.role}, {"content", m.content}});

  auto finish = [&](json& r) {
    r["elapsed_ms"] = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
    std::lock_guard lock(mu_);
    r["seq"] = seq_++;
    append_line_durable(log_file_, r.dump());
  };
  try {
    std::string reply = inner_->complete(request);
    rec["reply"] = reply;
    finish(rec);
    return reply;
  } catch (const std::exception& e) {
    rec["error"] = e.what();
    finish(rec);
    throw;
  }
}

BoundedClient::BoundedClient(std::unique_ptr<LlmClient> inner, std::ptrdiff_t max_in_flight)
    : inner_(std::move(inner)), slots_(std::clamp<std::ptrdiff_t>(max_in_flight, 1, 1024)) {}

std::string BoundedClient::complete(const LlmRequest& request) {
  slots_.acquire();
  struct Release {
    std::counting_semaphore<1024>& s;
    ~Release() { s.release(); }
  } release{slots_};
  return inner_->complete(request);
}

std::unique_ptr<LlmClient> make_llm_client(std::string_view spec) {
  if (spec == "stub:echo") return std::make_unique<EchoClient>();
  if (spec == "stub:oracle-demo") return std::make_unique<OracleDemoClient>();
  constexpr std::string_view kScript = "stub:fixed-script=";
  if (spec.starts_with(kScript)) {
    return FixedScriptClient::from_audit_log(std::string(spec.substr(kScript.size())));
  }
  if (spec == "http") return std::make_unique<HttpChatClient>(HttpClientConfig::from_env());
  if (spec.starts_with("http:")) {
    auto cfg = HttpClientConfig::from_env();
    cfg.url = std::string(spec.substr(5));
    return std::make_unique<HttpChatClient>(cfg);
  }
  throw ConfigError("unknown LLM client '" + std::string(spec) +
                    "' (expected stub:echo | stub:oracle-demo | stub:fixed-script=<file> | http | http:<url>)");
}

}  // namespace hicl
