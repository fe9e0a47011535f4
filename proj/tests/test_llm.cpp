#include <gtest/gtest.h>

#include <atomic>
#include <cstdlib>
#include <thread>

#include "s2c/errors.hpp"
#include "s2c/llm.hpp"
#include "support.hpp"

// After Eigen: <resolv.h> defines a `_res` macro that clashes with Eigen
// parameter names.
#include <httplib.h>

namespace s2c::llm {
namespace {

using nlohmann::json;

// Serves on an ephemeral loopback port for the lifetime of the object.
class FakeServer {
 public:
  explicit FakeServer(httplib::Server::Handler handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~FakeServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const {
    return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions";
  }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

std::string completion(const std::string& content) {
  return json{{"choices", {{{"message", {{"role", "assistant"}, {"content", content}}}}}},
              {"usage", {{"prompt_tokens", 11}, {"completion_tokens", 7}}}}
      .dump();
}

LlmConfig fast_config(const std::string& endpoint) {
  LlmConfig cfg;
  cfg.endpoint = endpoint;
  cfg.model = "test-model";
  cfg.api_key = "secret-key-123";
  cfg.timeout_s = 2.0;
  cfg.max_retries = 2;
  cfg.backoff_s = 0.01;
  return cfg;
}

TEST(NullClient, RepliesEmptyObject) {
  NullClient c;
  EXPECT_EQ(c.complete("sys", "user"), "{}");
  EXPECT_EQ(c.call_count(), 1u);
  EXPECT_TRUE(c.exchanges()[0].ok);
}

TEST(MakeClient, EmptyEndpointIsNull) {
  LlmConfig cfg;
  const auto c = make_client(cfg);
  EXPECT_NE(dynamic_cast<NullClient*>(c.get()), nullptr);
  EXPECT_EQ(complete(cfg, "s", "u"), "{}");
}

TEST(LlmConfig, DefaultsAndValidation) {
  LlmConfig cfg;
  EXPECT_EQ(cfg.temperature, 0.0);
  EXPECT_NO_THROW(cfg.validate());
  cfg.timeout_s = 0.0;
  EXPECT_THROW(cfg.validate(), DomainError);
  cfg = {};
  cfg.max_retries = -1;
  EXPECT_THROW(cfg.validate(), DomainError);
}

TEST(LlmConfig, ReadsEnvironment) {
  ::setenv("S2C_LLM_ENDPOINT", "http://example.invalid/x", 1);
  ::setenv("S2C_LLM_MODEL", "m", 1);
  ::setenv("S2C_LLM_API_KEY", "k", 1);
  const LlmConfig cfg = LlmConfig::from_env();
  EXPECT_EQ(cfg.endpoint, "http://example.invalid/x");
  EXPECT_EQ(cfg.model, "m");
  EXPECT_EQ(cfg.api_key, "k");
  ::unsetenv("S2C_LLM_ENDPOINT");
  ::unsetenv("S2C_LLM_MODEL");
  ::unsetenv("S2C_LLM_API_KEY");
}

TEST(RequestBody, ChatShape) {
  LlmConfig cfg = fast_config("http://x");
  const json b = request_body(cfg, "S", "U");
  EXPECT_EQ(b.at("model"), "test-model");
  EXPECT_EQ(b.at("temperature").get<double>(), 0.0);
  ASSERT_EQ(b.at("messages").size(), 2u);
  EXPECT_EQ(b["messages"][0]["role"], "system");
  EXPECT_EQ(b["messages"][0]["content"], "S");
  EXPECT_EQ(b["messages"][1]["role"], "user");
  EXPECT_EQ(b["messages"][1]["content"], "U");
  EXPECT_EQ(b.dump().find("secret"), std::string::npos);
}

TEST(ExtractJson, FenceUnwrap) {
  EXPECT_EQ(extract_json("```json {\"a\":1} ```"), json({{"a", 1}}));
}

TEST(ExtractJson, ProseAroundObject) {
  EXPECT_EQ(extract_json("Sure! {\"a\": {\"b\": \"}\"}} Hope that helps {x}"),
            json({{"a", {{"b", "}"}}}}));
}

TEST(ExtractJson, NoJson) {
  EXPECT_THROW(extract_json("no json here"), ParseError);
  EXPECT_THROW(extract_json(""), ParseError);
  EXPECT_THROW(extract_json("{ unbalanced"), ParseError);
}

TEST(ExtractJson, RoundTripOnSpecDocuments) {
  testing::Gen g(17);
  const char* prios[] = {"low", "medium", "high", "critical"};
  for (int k = 0; k < 200; ++k) {
    json d;
    d["h_infinity_norm"] = {{"target", g.uniform(0.1, 100)},
                            {"slack", g.uniform(0, 5)},
                            {"priority", prios[g.integer(0, 3)]}};
    d["settling_time"] = {{"target", g.uniform(0.1, 60)},
                          {"slack", g.uniform(0, 5)},
                          {"priority", prios[g.integer(0, 3)]}};
    if (k % 2) d["decay_rate"] = {{"target", g.uniform(0, 1)}};
    EXPECT_EQ(extract_json(d.dump()), d);
    EXPECT_EQ(extract_json("Result:\n```json\n" + d.dump(2) + "\n```\n"), d);
  }
}

TEST(HttpClient, CannedReplyVerbatimAndHeaders) {
  const std::string canned =
      R"({"settling_time": {"target": 16.0, "priority": "medium", "slack": 2.0}})";
  std::string auth, model;
  FakeServer server([&](const httplib::Request& req, httplib::Response& res) {
    auth = req.get_header_value("Authorization");
    model = json::parse(req.body).at("model");
    res.set_content(completion(canned), "application/json");
  });
  HttpClient c(fast_config(server.endpoint()));
  EXPECT_EQ(c.complete("sys", "usr"), canned);
  EXPECT_EQ(auth, "Bearer secret-key-123");
  EXPECT_EQ(model, "test-model");
  const auto ex = c.exchanges();
  ASSERT_EQ(ex.size(), 1u);
  EXPECT_TRUE(ex[0].ok);
  EXPECT_EQ(ex[0].attempts, 1);
  EXPECT_EQ(ex[0].prompt_tokens, 11);
  EXPECT_EQ(ex[0].completion_tokens, 7);
  EXPECT_EQ(ex[0].reply, canned);
  EXPECT_GE(ex[0].latency_ms, 0.0);
  EXPECT_EQ(ex[0].system.find("secret"), std::string::npos);
  EXPECT_EQ(ex[0].user.find("secret"), std::string::npos);
}

TEST(HttpClient, RetriesServerErrorsThenSucceeds) {
  std::atomic<int> hits{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    if (++hits < 3) {
      res.status = 503;
      return;
    }
    res.set_content(completion("ok"), "application/json");
  });
  HttpClient c(fast_config(server.endpoint()));
  EXPECT_EQ(c.complete("s", "u"), "ok");
  EXPECT_EQ(hits.load(), 3);
  EXPECT_EQ(c.exchanges()[0].attempts, 3);
}

TEST(HttpClient, AuthFailureIsUnavailableWithoutRetry) {
  std::atomic<int> hits{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 401;
  });
  HttpClient c(fast_config(server.endpoint()));
  try {
    c.complete("s", "u");
    FAIL() << "expected Unavailable";
  } catch (const Unavailable& e) {
    EXPECT_EQ(std::string(e.what()).find("secret"), std::string::npos);
  }
  EXPECT_EQ(hits.load(), 1);
  EXPECT_FALSE(c.exchanges()[0].ok);
}

TEST(HttpClient, MalformedBodyIsUnavailableAfterRetries) {
  std::atomic<int> hits{0};
  FakeServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.set_content("{\"choices\": []}", "application/json");
  });
  HttpClient c(fast_config(server.endpoint()));
  EXPECT_THROW(c.complete("s", "u"), Unavailable);
  EXPECT_EQ(hits.load(), 3);
}

TEST(HttpClient, UnreachableEndpointIsUnavailable) {
  int port = 0;
  {
    httplib::Server probe;
    port = probe.bind_to_any_port("127.0.0.1");
  }
  LlmConfig cfg = fast_config("http://127.0.0.1:" + std::to_string(port) + "/v1/chat/completions");
  HttpClient c(cfg);
  EXPECT_THROW(c.complete("s", "u"), Unavailable);
  EXPECT_EQ(c.exchanges()[0].attempts, cfg.max_retries + 1);
}

TEST(HttpClient, BadSchemeIsUnavailable) {
  HttpClient c(fast_config("ftp://host/x"));
  EXPECT_THROW(c.complete("s", "u"), Unavailable);
}

TEST(Prompts, AreShipped) {
  EXPECT_FALSE(specint_prompt().empty());
  EXPECT_FALSE(adapt_prompt().empty());
}

}  // namespace
}  // namespace s2c::llm
