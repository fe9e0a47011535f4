#include "s2c/llm.hpp"

#include <httplib.h>

#include <cctype>
#include <chrono>
#include <cstdlib>
#include <optional>
#include <thread>

#include "s2c/embedded_assets.hpp"

namespace s2c::llm {

namespace {

std::string env_or_empty(const char* name) {
  const char* v = std::getenv(name);
  return v ? std::string(v) : std::string();
}

struct Endpoint {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

Endpoint split_endpoint(const std::string& url) {
  const auto scheme_end = url.find("://");
  if (scheme_end == std::string::npos ||
      (url.compare(0, scheme_end, "http") != 0 &&
       url.compare(0, scheme_end, "https") != 0)) {
    throw Unavailable("endpoint must start with http:// or https://");
  }
  const auto path_start = url.find('/', scheme_end + 3);
  Endpoint e;
  if (path_start == std::string::npos) {
    e.origin = url;
    e.path = "/v1/chat/completions";
  } else {
    e.origin = url.substr(0, path_start);
    e.path = url.substr(path_start);
  }
  return e;
}

// Bodies of fenced code blocks in order, language tags removed.
std::vector<std::string> fenced_blocks(const std::string& text) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  for (;;) {
    const auto open = text.find("```", pos);
    if (open == std::string::npos) break;
    std::size_t body = open + 3;
    while (body < text.size() &&
           (std::isalnum(static_cast<unsigned char>(text[body])) ||
            text[body] == '_' || text[body] == '-')) {
      ++body;
    }
    const auto close = text.find("```", body);
    if (close == std::string::npos) {
      out.push_back(text.substr(body));
      break;
    }
    out.push_back(text.substr(body, close - body));
    pos = close + 3;
  }
  return out;
}

// Index one past the brace closing the object opened at `start`, honouring
// string literals; npos when unbalanced.
std::size_t balanced_end(const std::string& s, std::size_t start) {
  int depth = 0;
  bool in_string = false;
  bool escaped = false;
  for (std::size_t i = start; i < s.size(); ++i) {
    const char c = s[i];
    if (in_string) {
      if (escaped) {
        escaped = false;
      } else if (c == '\\') {
        escaped = true;
      } else if (c == '"') {
        in_string = false;
      }
      continue;
    }
    if (c == '"') {
      in_string = true;
    } else if (c == '{') {
      ++depth;
    } else if (c == '}') {
      if (--depth == 0) return i + 1;
    }
  }
  return std::string::npos;
}

std::optional<nlohmann::json> first_object(const std::string& s) {
  for (auto open = s.find('{'); open != std::string::npos;
       open = s.find('{', open + 1)) {
    const auto end = balanced_end(s, open);
    if (end == std::string::npos) continue;
    auto j = nlohmann::json::parse(s.begin() + static_cast<long>(open),
                                   s.begin() + static_cast<long>(end), nullptr,
                                   false);
    if (!j.is_discarded() && j.is_object()) return j;
  }
  return std::nullopt;
}

}  // namespace

LlmConfig LlmConfig::from_env() {
  LlmConfig cfg;
  cfg.endpoint = env_or_empty("S2C_LLM_ENDPOINT");
  cfg.model = env_or_empty("S2C_LLM_MODEL");
  cfg.api_key = env_or_empty("S2C_LLM_API_KEY");
  return cfg;
}

void LlmConfig::validate() const {
  if (!(timeout_s > 0.0)) throw DomainError("LLM timeout must be positive");
  if (max_retries < 0) throw DomainError("LLM retry count must be >= 0");
  if (!(backoff_s >= 0.0)) throw DomainError("LLM backoff must be >= 0");
}

std::vector<ChatExchange> LlmClient::exchanges() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_;
}

std::size_t LlmClient::call_count() const {
  std::lock_guard<std::mutex> lock(mu_);
  return log_.size();
}

void LlmClient::record(ChatExchange e) {
  std::lock_guard<std::mutex> lock(mu_);
  log_.push_back(std::move(e));
}

std::string NullClient::complete(const std::string& system,
                                 const std::string& user) {
  ChatExchange e;
  e.system = system;
  e.user = user;
  e.reply = "{}";
  e.attempts = 1;
  e.ok = true;
  record(e);
  return "{}";
}

HttpClient::HttpClient(LlmConfig cfg) : cfg_(std::move(cfg)) {
  cfg_.validate();
}

nlohmann::json request_body(const LlmConfig& cfg, const std::string& system,
                            const std::string& user) {
  return {{"model", cfg.model},
          {"temperature", cfg.temperature},
          {"messages",
           nlohmann::json::array(
               {{{"role", "system"}, {"content", system}},
                {{"role", "user"}, {"content", user}}})}};
}

std::string HttpClient::complete(const std::string& system,
                                 const std::string& user) {
  ChatExchange ex;
  ex.system = system;
  ex.user = user;
  const auto t0 = std::chrono::steady_clock::now();
  auto finish = [&](bool ok) {
    ex.ok = ok;
    ex.latency_ms = std::chrono::duration<double, std::milli>(
                        std::chrono::steady_clock::now() - t0)
                        .count();
    record(ex);
  };

  Endpoint ep;
  try {
    ep = split_endpoint(cfg_.endpoint);
  } catch (const Unavailable&) {
    finish(false);
    throw;
  }
  const std::string body = request_body(cfg_, system, user).dump();
  const auto timeout = std::chrono::duration_cast<std::chrono::milliseconds>(
      std::chrono::duration<double>(cfg_.timeout_s));

  std::string last_error = "no attempt made";
  double delay = cfg_.backoff_s;
  for (int attempt = 0; attempt <= cfg_.max_retries; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(delay));
      delay *= 2.0;
    }
    ex.attempts = attempt + 1;
    httplib::Client cli(ep.origin);
    cli.set_connection_timeout(timeout);
    cli.set_read_timeout(timeout);
    cli.set_write_timeout(timeout);
    httplib::Headers headers;
    if (!cfg_.api_key.empty()) {
      headers.emplace("Authorization", "Bearer " + cfg_.api_key);
    }
    const auto res = cli.Post(ep.path, headers, body, "application/json");
    if (!res) {
      last_error = "transport error: " + httplib::to_string(res.error());
      continue;
    }
    if (res->status == 401 || res->status == 403) {
      last_error = "authentication rejected (HTTP " +
                   std::to_string(res->status) + ")";
      break;  // retrying cannot help
    }
    if (res->status != 200) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    const auto j = nlohmann::json::parse(res->body, nullptr, false);
    try {
      if (j.is_discarded()) throw std::runtime_error("malformed body");
      ex.reply = j.at("choices").at(0).at("message").at("content")
                     .get<std::string>();
      if (j.contains("usage") && j["usage"].is_object()) {
        ex.prompt_tokens = j["usage"].value("prompt_tokens", 0);
        ex.completion_tokens = j["usage"].value("completion_tokens", 0);
      }
    } catch (const std::exception&) {
      last_error = "unexpected response shape";
      continue;
    }
    finish(true);
    return ex.reply;
  }
  finish(false);
  throw Unavailable("LLM endpoint unavailable: " + last_error);
}

std::unique_ptr<LlmClient> make_client(const LlmConfig& cfg) {
  if (cfg.endpoint.empty()) return std::make_unique<NullClient>();
  return std::make_unique<HttpClient>(cfg);
}

std::string complete(const LlmConfig& cfg, const std::string& system,
                     const std::string& user) {
  return make_client(cfg)->complete(system, user);
}

nlohmann::json extract_json(const std::string& reply) {
  for (const auto& block : fenced_blocks(reply)) {
    if (auto j = first_object(block)) return *j;
  }
  if (auto j = first_object(reply)) return *j;
  throw ParseError("no JSON object found in reply");
}

const std::string& specint_prompt() {
  static const std::string s = assets::kSpecIntPrompt;
  return s;
}

const std::string& adapt_prompt() {
  static const std::string s = assets::kAdaptPrompt;
  return s;
}

}  // namespace s2c::llm
