#pragma once

#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "s2c/errors.hpp"

namespace s2c::llm {

/// Every transport, authentication, rate-limit or protocol failure.
class Unavailable : public Error {
 public:
  using Error::Error;
};

/// Chat-completion endpoint settings. The API key only ever comes from the
/// environment and is never written to logs or reports.
struct LlmConfig {
  std::string endpoint;
  std::string model;
  std::string api_key;
  double temperature = 0.0;
  double timeout_s = 60.0;
  int max_retries = 3;
  /// First retry delay; doubled after every failed attempt.
  double backoff_s = 1.0;

  /// Reads S2C_LLM_ENDPOINT, S2C_LLM_MODEL and S2C_LLM_API_KEY.
  static LlmConfig from_env();

  /// Throws DomainError for a non-positive timeout or negative retry count.
  void validate() const;
};

struct ChatExchange {
  std::string system;
  std::string user;
  std::string reply;
  int prompt_tokens = 0;
  int completion_tokens = 0;
  double latency_ms = 0.0;
  int attempts = 0;
  bool ok = false;
};

/// Blocking chat completion. Implementations record one ChatExchange per
/// call; recording is thread-safe.
class LlmClient {
 public:
  virtual ~LlmClient() = default;

  /// Returns the reply text or throws Unavailable.
  virtual std::string complete(const std::string& system,
                               const std::string& user) = 0;

  std::vector<ChatExchange> exchanges() const;
  std::size_t call_count() const;

 protected:
  void record(ChatExchange e);

 private:
  mutable std::mutex mu_;
  std::vector<ChatExchange> log_;
};

/// Offline backend: every call returns "{}".
class NullClient final : public LlmClient {
 public:
  std::string complete(const std::string& system,
                       const std::string& user) override;
};

/// HTTP(S) client for the chat-completions wire shape
/// {model, temperature, messages: [{role, content}]}; the reply is read from
/// choices[0].message.content. Retries with exponential backoff.
class HttpClient final : public LlmClient {
 public:
  explicit HttpClient(LlmConfig cfg);
  std::string complete(const std::string& system,
                       const std::string& user) override;

 private:
  LlmConfig cfg_;
};

/// Null backend when the endpoint is empty, HTTP otherwise.
std::unique_ptr<LlmClient> make_client(const LlmConfig& cfg);

/// One-shot completion through make_client(cfg).
std::string complete(const LlmConfig& cfg, const std::string& system,
                     const std::string& user);

/// First balanced top-level JSON object in `reply`, after unwrapping fenced
/// code blocks. Throws ParseError when none parses.
nlohmann::json extract_json(const std::string& reply);

/// Request body for one call (exposed for tests).
nlohmann::json request_body(const LlmConfig& cfg, const std::string& system,
                            const std::string& user);

/// System prompts shipped with the library.
const std::string& specint_prompt();
const std::string& adapt_prompt();

}  // namespace s2c::llm
