#include <algorithm>
#include <atomic>
#include <cstdlib>
#include <thread>

#include "divbench/provider.hpp"
#include "support.hpp"

using namespace divbench;
using namespace std::chrono_literals;

namespace {

ChatRequest request(const std::string& text = "Generate 5 design solutions for an innovative product to froth milk") {
  ChatRequest r;
  r.model = "gpt-4-0613";
  r.messages = {{Role::user, text}};
  r.params = {1.0, 0.5};
  return r;
}

// Local HTTP server on an ephemeral port, torn down with the fixture.
class LocalServer {
 public:
  explicit LocalServer(std::function<void(const httplib::Request&, httplib::Response&)> handler) {
    server_.Post("/v1/chat/completions", std::move(handler));
    port_ = server_.bind_to_any_port("127.0.0.1");
    thread_ = std::thread([this] { server_.listen_after_bind(); });
    server_.wait_until_ready();
  }
  ~LocalServer() {
    server_.stop();
    thread_.join();
  }
  std::string endpoint() const { return "http://127.0.0.1:" + std::to_string(port_) + "/v1/chat/completions"; }

 private:
  httplib::Server server_;
  int port_ = 0;
  std::thread thread_;
};

class ScriptedProvider final : public ChatProvider {
 public:
  explicit ScriptedProvider(std::vector<int> statuses) : statuses_(std::move(statuses)) {}
  std::string complete(const ChatRequest&) override {
    const auto i = calls_++;
    const int status = i < statuses_.size() ? statuses_[i] : statuses_.back();
    if (status != 200) throw ProviderError(status, "scripted");
    return "ok";
  }
  std::string model() const override { return "scripted"; }
  std::size_t calls_ = 0;

 private:
  std::vector<int> statuses_;
};

}  // namespace

TEST(Wire, ChatCompletionShape) {
  auto r = request();
  r.messages.push_back({Role::assistant, "1. a"});
  r.messages.push_back({Role::system_free_text, "be brief"});
  const auto j = to_wire(r);
  EXPECT_EQ(j.at("model"), "gpt-4-0613");
  EXPECT_EQ(j.at("temperature").get<double>(), 1.0);
  EXPECT_EQ(j.at("top_p").get<double>(), 0.5);
  ASSERT_EQ(j.at("messages").size(), 3u);
  EXPECT_EQ(j["messages"][0]["role"], "user");
  EXPECT_EQ(j["messages"][1]["role"], "assistant");
  EXPECT_EQ(j["messages"][2]["role"], "system");
  EXPECT_EQ(j["messages"][0]["content"], r.messages[0].content);
}

TEST(ProviderConfig, DefaultsAndValidation) {
  ProviderConfig c;
  EXPECT_EQ(c.model, "gpt-4-0613");
  EXPECT_NO_THROW(c.validate());
  c.max_retries = -1;
  EXPECT_ERRC(c.validate(), Errc::Config);
  c = {};
  c.requests_per_minute = 0;
  EXPECT_ERRC(c.validate(), Errc::Config);
}

TEST(ProviderConfig, MissingKeyNamesTheVariable) {
  ProviderConfig c;
  c.api_key_env = "DIVBENCH_TEST_KEY_THAT_IS_NOT_SET";
  ::unsetenv(c.api_key_env.c_str());
  try {
    c.resolve_api_key();
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::Config);
    EXPECT_NE(std::string(e.what()).find("DIVBENCH_TEST_KEY_THAT_IS_NOT_SET"), std::string::npos);
  }
  ::setenv(c.api_key_env.c_str(), "sk-secret", 1);
  EXPECT_EQ(c.resolve_api_key(), "sk-secret");
  ::unsetenv(c.api_key_env.c_str());
}

TEST(Http, PostsOpenAiStyleRequest) {
  nlohmann::json seen;
  std::string auth;
  LocalServer server([&](const httplib::Request& req, httplib::Response& res) {
    seen = nlohmann::json::parse(req.body);
    auth = req.get_header_value("Authorization");
    res.set_content(R"({"choices":[{"message":{"role":"assistant","content":"1. A\n2. B"}}]})", "application/json");
  });
  ProviderConfig cfg;
  cfg.endpoint = server.endpoint();
  HttpChatProvider http(cfg, "sk-test");
  EXPECT_EQ(http.complete(request()), "1. A\n2. B");
  EXPECT_EQ(auth, "Bearer sk-test");
  EXPECT_EQ(seen, to_wire(request()));
}

TEST(Http, ServerErrorForeverBecomesProviderErrorAfterRetries) {
  std::atomic<int> hits{0};
  LocalServer server([&](const httplib::Request&, httplib::Response& res) {
    ++hits;
    res.status = 500;
    res.set_content("boom", "text/plain");
  });
  ProviderConfig cfg;
  cfg.endpoint = server.endpoint();
  cfg.max_retries = 3;
  HttpChatProvider http(cfg, "k");
  ManualClock clock;
  ReliableChatProvider reliable(http, cfg.max_retries, 1000, clock, 5);
  try {
    reliable.complete(request());
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.status(), 500);
    EXPECT_TRUE(e.retryable());
  }
  EXPECT_EQ(hits.load(), 4);
  // Three backoff sleeps of 1, 2 and 4 s, each jittered into [0.5, 1].
  EXPECT_GE(clock.total_slept(), 3500ms);
  EXPECT_LE(clock.total_slept(), 7000ms);
}

TEST(Http, MalformedResponseIsProviderError) {
  LocalServer server([&](const httplib::Request&, httplib::Response& res) { res.set_content("{}", "application/json"); });
  ProviderConfig cfg;
  cfg.endpoint = server.endpoint();
  HttpChatProvider http(cfg, "k");
  EXPECT_THROW(http.complete(request()), ProviderError);
}

TEST(Http, TransportFailureIsRetryable) {
  try {
    post_json("http://127.0.0.1:1/v1/chat/completions", nlohmann::json::object(), "", 2s);
    FAIL();
  } catch (const ProviderError& e) {
    EXPECT_EQ(e.status(), 0);
    EXPECT_TRUE(e.retryable());
  }
  EXPECT_ERRC(parse_url("ftp://example.com"), Errc::Config);
  EXPECT_EQ(parse_url("https://api.example.com").path, "/");
}

TEST(Reliable, ClientErrorsAreNotRetried) {
  ScriptedProvider inner({400});
  ManualClock clock;
  ReliableChatProvider p(inner, 5, 60, clock);
  EXPECT_THROW(p.complete(request()), ProviderError);
  EXPECT_EQ(inner.calls_, 1u);
}

TEST(Reliable, RecoversFromTransientErrors) {
  ScriptedProvider inner({429, 503, 200});
  ManualClock clock;
  ReliableChatProvider p(inner, 5, 60, clock);
  EXPECT_EQ(p.complete(request()), "ok");
  EXPECT_EQ(inner.calls_, 3u);
}

TEST(Backoff, ExponentialWithJitterAndCap) {
  Backoff b(9);
  for (int attempt = 0; attempt < 10; ++attempt) {
    const double base = std::min(1000.0 * std::pow(2.0, attempt), 60000.0);
    const auto d = b.delay(attempt).count();
    EXPECT_GE(d, static_cast<long>(0.5 * base) - 1) << attempt;
    EXPECT_LE(d, static_cast<long>(base)) << attempt;
  }
}

TEST(RateLimiter, NeverExceedsCapInAnyWindow) {
  ManualClock clock;
  RateLimiter limiter(10, clock);
  std::vector<Clock::time_point> stamps;
  for (int i = 0; i < 95; ++i) {
    limiter.acquire();
    stamps.push_back(clock.now());
    if (i % 7 == 0) clock.sleep_for(3s);
  }
  for (std::size_t i = 0; i < stamps.size(); ++i) {
    const auto in_window = std::count_if(stamps.begin(), stamps.end(), [&](auto t) {
      return t >= stamps[i] && t - stamps[i] < 60s;
    });
    EXPECT_LE(in_window, 10) << "window starting at request " << i;
  }
  // 95 requests at 10 per minute need at least 9 full windows.
  EXPECT_GE(stamps.back() - stamps.front(), 9 * 60s);
}

TEST(RateLimiter, CapsConcurrentCallers) {
  ManualClock clock;
  ScriptedProvider inner({200});
  ReliableChatProvider p(inner, 0, 5, clock);
  std::vector<std::thread> ts;
  for (int t = 0; t < 4; ++t)
    ts.emplace_back([&] {
      for (int i = 0; i < 5; ++i) p.complete(request());
    });
  for (auto& t : ts) t.join();
  EXPECT_EQ(inner.calls_, 20u);
  EXPECT_GE(clock.total_slept(), 3 * 60s);
}

TEST(Mock, DeterministicInSeedAndConversation) {
  MockChatProvider a(1), b(1), c(2);
  const auto r = request();
  EXPECT_EQ(a.complete(r), b.complete(r));
  EXPECT_NE(a.complete(r), c.complete(r));
  auto other = r;
  other.params.temperature = 0.0;
  EXPECT_NE(a.complete(r), a.complete(other));
  EXPECT_EQ(a.calls(), 4u);
}

TEST(Mock, HonoursRequestedCountAndAvoidsRepeats) {
  MockChatProvider m(3);
  auto r = request("Generate 50 design solutions for an innovative product to froth milk");
  const auto reply = m.complete(r);
  EXPECT_NE(reply.find("\n50. "), std::string::npos);
  EXPECT_EQ(reply.find("\n51. "), std::string::npos);

  r = request();
  const auto first = m.complete(r);
  r.messages.push_back({Role::assistant, first});
  r.messages.push_back({Role::user, "Generate 5 more design solutions for an innovative product to froth milk"});
  const auto second = m.complete(r);
  for (int i = 1; i <= 5; ++i) {
    const auto key = "\n" + std::to_string(i) + ". ";
    const auto line = second.substr(second.find(key) + key.size());
    EXPECT_EQ(first.find(line.substr(0, line.find('\n'))), std::string::npos);
  }
}

TEST(Mock, ExpansionAppendsRationale) {
  MockChatProvider m(4);
  const std::string source = "A hinged tray made of cork.";
  const auto reply = m.complete(request(std::string(kExpansionInstruction) + "\n\n" + source));
  EXPECT_EQ(reply.rfind(source, 0), 0u);
  EXPECT_GT(reply.size(), source.size());
}
