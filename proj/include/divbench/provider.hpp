#pragma once

// Chat-completion providers: the OpenAI-style HTTP client, a deterministic
// mock, and the retry/rate-limit decorator used by unattended sweeps.

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdlib>
#include <deque>
#include <memory>
#include <mutex>
#include <optional>
#include <random>
#include <regex>
#include <string>
#include <thread>
#include <vector>

#include "httplib.h"
// <resolv.h>, reached through httplib, defines _res as a macro, which breaks
// Eigen headers included afterwards.
#ifdef _res
#undef _res
#endif
#include "json.hpp"

#include "divbench/corpus.hpp"
#include "divbench/error.hpp"
#include "divbench/promptkit.hpp"
#include "divbench/random.hpp"

namespace divbench {

struct ChatRequest {
  std::string model;
  std::vector<ChatMessage> messages;
  SamplingParams params;
};

inline nlohmann::json to_wire(const ChatRequest& req) {
  nlohmann::json msgs = nlohmann::json::array();
  for (const auto& m : req.messages) msgs.push_back({{"role", wire_role(m.role)}, {"content", m.content}});
  return {{"model", req.model},
          {"messages", std::move(msgs)},
          {"temperature", req.params.temperature},
          {"top_p", req.params.top_p}};
}

class ChatProvider {
 public:
  virtual ~ChatProvider() = default;

  /// Returns the assistant message content. Throws ProviderError.
  virtual std::string complete(const ChatRequest& request) = 0;

  virtual std::string model() const = 0;
};

struct ProviderConfig {
  std::string endpoint = "https://api.openai.com/v1/chat/completions";
  std::string model = "gpt-4-0613";
  std::string api_key_env = "OPENAI_API_KEY";
  int max_retries = 5;
  double requests_per_minute = 60.0;
  int max_in_flight = 4;

  void validate() const {
    if (max_retries < 0) throw Error(Errc::Config, "provider.max_retries must be >= 0");
    if (!(requests_per_minute > 0.0)) throw Error(Errc::Config, "provider.requests_per_minute must be > 0");
    if (max_in_flight < 1) throw Error(Errc::Config, "provider.max_in_flight must be >= 1");
    if (model.empty()) throw Error(Errc::Config, "provider.model must be non-empty");
  }

  /// Reads the API key from the configured environment variable.
  std::string resolve_api_key() const {
    const char* v = std::getenv(api_key_env.c_str());
    if (v == nullptr || *v == '\0')
      throw Error(Errc::Config, "environment variable " + api_key_env + " is not set");
    return v;
  }
};

// ---------------------------------------------------------------------------
// Clock abstraction so backoff and rate limiting can be tested without waiting.

class Clock {
 public:
  using duration = std::chrono::nanoseconds;
  using time_point = std::chrono::time_point<std::chrono::steady_clock, duration>;

  virtual ~Clock() = default;
  virtual time_point now() = 0;
  virtual void sleep_for(duration d) = 0;
};

class SystemClock final : public Clock {
 public:
  time_point now() override { return std::chrono::steady_clock::now(); }
  void sleep_for(duration d) override { std::this_thread::sleep_for(d); }
};

/// Time only moves when someone sleeps.
class ManualClock final : public Clock {
 public:
  time_point now() override {
    std::lock_guard lock(mu_);
    return now_;
  }
  void sleep_for(duration d) override {
    std::lock_guard lock(mu_);
    now_ += d;
    slept_ += d;
  }
  duration total_slept() {
    std::lock_guard lock(mu_);
    return slept_;
  }

 private:
  std::mutex mu_;
  time_point now_{};
  duration slept_{};
};

/// Exponential backoff: 1 s, 2 s, 4 s, ... each scaled by a jitter factor
/// drawn uniformly from [0.5, 1.0].
class Backoff {
 public:
  explicit Backoff(std::uint64_t seed, std::chrono::milliseconds initial = std::chrono::seconds(1),
                   double factor = 2.0, std::chrono::milliseconds cap = std::chrono::seconds(60))
      : rng_(seed), initial_(initial), factor_(factor), cap_(cap) {}

  std::chrono::milliseconds delay(int attempt) {
    double base = static_cast<double>(initial_.count());
    for (int i = 0; i < attempt; ++i) base *= factor_;
    base = std::min(base, static_cast<double>(cap_.count()));
    const double jitter = 0.5 + 0.5 * uniform01(rng_);
    return std::chrono::milliseconds(static_cast<std::int64_t>(base * jitter));
  }

 private:
  std::mt19937_64 rng_;
  std::chrono::milliseconds initial_;
  double factor_;
  std::chrono::milliseconds cap_;
};

/// Sliding 60-second window: at most `per_minute` acquisitions in any window.
class RateLimiter {
 public:
  RateLimiter(double per_minute, Clock& clock)
      : cap_(static_cast<std::size_t>(per_minute < 1.0 ? 1.0 : per_minute)), clock_(clock) {}

  void acquire() {
    std::unique_lock lock(mu_);
    const auto window = std::chrono::seconds(60);
    for (;;) {
      const auto now = clock_.now();
      while (!stamps_.empty() && now - stamps_.front() >= window) stamps_.pop_front();
      if (stamps_.size() < cap_) {
        stamps_.push_back(now);
        return;
      }
      const auto wait = stamps_.front() + window - now;
      lock.unlock();
      clock_.sleep_for(wait);
      lock.lock();
    }
  }

  std::size_t cap() const noexcept { return cap_; }

 private:
  std::size_t cap_;
  Clock& clock_;
  std::mutex mu_;
  std::deque<Clock::time_point> stamps_;
};

/// Decorator adding retries with backoff and rate limiting to any provider.
class ReliableChatProvider final : public ChatProvider {
 public:
  ReliableChatProvider(ChatProvider& inner, int max_retries, double requests_per_minute, Clock& clock,
                       std::uint64_t jitter_seed = 0)
      : inner_(inner),
        max_retries_(max_retries),
        limiter_(requests_per_minute, clock),
        clock_(clock),
        jitter_seed_(jitter_seed) {}

  std::string complete(const ChatRequest& request) override {
    Backoff backoff(derive_seed(jitter_seed_, std::to_string(calls_.fetch_add(1))));
    for (int attempt = 0;; ++attempt) {
      limiter_.acquire();
      try {
        return inner_.complete(request);
      } catch (const ProviderError& e) {
        if (!e.retryable() || attempt >= max_retries_) throw;
        clock_.sleep_for(backoff.delay(attempt));
      }
    }
  }

  std::string model() const override { return inner_.model(); }

 private:
  ChatProvider& inner_;
  int max_retries_;
  RateLimiter limiter_;
  Clock& clock_;
  std::uint64_t jitter_seed_;
  std::atomic<std::uint64_t> calls_{0};
};

// ---------------------------------------------------------------------------
// HTTP

struct ParsedUrl {
  std::string origin;  // scheme://host[:port]
  std::string path;
};

inline ParsedUrl parse_url(const std::string& url) {
  static const std::regex re(R"(^(https?://[^/]+)(/.*)?$)");
  std::smatch m;
  if (!std::regex_match(url, m, re)) throw Error(Errc::Config, "invalid endpoint URL '" + url + "'");
  return {m[1].str(), m[2].matched ? m[2].str() : "/"};
}

/// POSTs a JSON body and returns the parsed JSON response. Non-2xx statuses
/// and transport failures become ProviderError.
inline nlohmann::json post_json(const std::string& url, const nlohmann::json& body,
                                const std::string& bearer_token,
                                std::chrono::seconds timeout = std::chrono::seconds(120)) {
  const auto u = parse_url(url);
  httplib::Client client(u.origin);
  client.set_connection_timeout(std::chrono::seconds(10));
  client.set_read_timeout(timeout);
  httplib::Headers headers;
  if (!bearer_token.empty()) headers.emplace("Authorization", "Bearer " + bearer_token);
  auto res = client.Post(u.path, headers, body.dump(), "application/json");
  if (!res) throw ProviderError(0, "transport failure: " + httplib::to_string(res.error()));
  if (res->status < 200 || res->status >= 300)
    throw ProviderError(res->status, res->body.substr(0, 512));
  try {
    return nlohmann::json::parse(res->body);
  } catch (const nlohmann::json::exception& e) {
    throw ProviderError(res->status, std::string("invalid JSON response: ") + e.what());
  }
}

/// OpenAI-compatible chat-completion client.
class HttpChatProvider final : public ChatProvider {
 public:
  HttpChatProvider(ProviderConfig config, std::string api_key)
      : config_(std::move(config)), api_key_(std::move(api_key)) {}

  std::string complete(const ChatRequest& request) override {
    const auto res = post_json(config_.endpoint, to_wire(request), api_key_);
    try {
      return res.at("choices").at(0).at("message").at("content").get<std::string>();
    } catch (const nlohmann::json::exception& e) {
      throw ProviderError(200, std::string("unexpected response shape: ") + e.what());
    }
  }

  std::string model() const override { return config_.model; }

 private:
  ProviderConfig config_;
  std::string api_key_;
};

// ---------------------------------------------------------------------------
// Mock

namespace detail {

struct MockVocabulary {
  std::vector<std::string_view> forms{
      "collapsible frame", "modular kit",      "handheld unit",     "wearable band",
      "foldable panel",    "magnetic dock",    "spring-loaded arm", "inflatable shell",
      "clip-on attachment", "rotating drum",   "telescoping rod",   "layered mat",
      "pocket-sized case", "suction mount",    "hinged tray",       "woven sleeve"};
  std::vector<std::string_view> materials{
      "recycled aluminum", "silicone",       "bamboo fiber",   "carbon composite",
      "stainless steel",   "bioplastic",     "ripstop nylon",  "cork",
      "ceramic",           "memory foam",    "borosilicate glass", "hemp canvas",
      "titanium wire",     "natural rubber", "felted wool",    "polycarbonate"};
  std::vector<std::string_view> mechanisms{
      "uses a ratcheting gear train",     "relies on a vacuum seal",
      "harvests kinetic energy",          "pairs with a phone app",
      "is driven by a compressed spring", "uses interlocking magnets",
      "works through a pneumatic bladder", "applies variable friction",
      "is powered by a small solar cell", "uses gravity-fed channels",
      "vibrates at ultrasonic frequencies", "uses a shape-memory alloy",
      "counts motion with an accelerometer", "uses a counterweight pendulum",
      "is operated by a foot pedal",      "relies on capillary wicking"};
  std::vector<std::string_view> benefits{
      "so it packs flat",                   "to cut setup time in half",
      "so it can be cleaned in a dishwasher", "to keep noise low",
      "so children can use it safely",      "to avoid disposable parts",
      "so one hand is enough",              "to work without electricity",
      "so it fits in a carry-on bag",       "to give consistent results",
      "so it can be shared by a household", "to reduce wasted material",
      "so it doubles as a storage box",     "to adapt to different users",
      "so it can be repaired at home",      "to signal progress with color"};
  std::vector<std::string_view> extras{
      "with adjustable tension",   "with a built-in timer",      "in three color options",
      "with replaceable pads",     "with a quick-release latch", "with a textured grip",
      "with an optional stand",    "with a lighted indicator",   "with a travel pouch",
      "with a modular extension",  "with a weighted base",       "with an anti-slip coating",
      "with interchangeable heads", "with a companion guide",    "with a safety lock",
      "with a refill cartridge"};
};

inline const MockVocabulary& mock_vocabulary() {
  static const MockVocabulary v;
  return v;
}

}  // namespace detail

/// Deterministic stand-in for a chat model. Replies are numbered lists whose
/// content is a pure function of (seed, sampling params, conversation), so a
/// replayed campaign is byte-identical. Within one conversation the mock never
/// repeats a solution already present in the history.
class MockChatProvider final : public ChatProvider {
 public:
  explicit MockChatProvider(std::uint64_t seed = 0, std::string model = "mock-gpt")
      : seed_(seed), model_(std::move(model)) {}

  std::string complete(const ChatRequest& request) override {
    ++calls_;
    if (request.messages.empty()) throw ProviderError(400, "no messages");
    std::uint64_t key = derive_seed(seed_, request.model);
    key = mix64(key ^ fnv1a(std::to_string(request.params.temperature) + "/" +
                            std::to_string(request.params.top_p)));
    std::string history;
    for (const auto& m : request.messages) {
      key = mix64(key ^ fnv1a(m.content));
      if (m.role == Role::assistant) history += m.content + "\n";
    }
    std::mt19937_64 rng(key);

    const std::string& prompt = request.messages.back().content;
    if (prompt.rfind(kExpansionInstruction, 0) == 0) {
      const std::string source = trim(std::string_view(prompt).substr(kExpansionInstruction.size()));
      return source + " " + expansion(rng);
    }

    static const std::regex count_re(R"(Generate (\d+) )");
    std::smatch m;
    int count = 5;
    if (std::regex_search(prompt, m, count_re)) count = std::stoi(m[1].str());

    std::vector<std::string> items;
    while (static_cast<int>(items.size()) < count) {
      std::string idea = solution(rng);
      if (history.find(idea) != std::string::npos) continue;
      if (std::find(items.begin(), items.end(), idea) != items.end()) continue;
      items.push_back(std::move(idea));
    }
    return "Here are " + std::to_string(count) + " design solutions:\n\n" + format_numbered(items);
  }

  std::string model() const override { return model_; }

  std::size_t calls() const noexcept { return calls_.load(); }

 private:
  static std::string_view pick(std::mt19937_64& rng, const std::vector<std::string_view>& v) {
    return v[uniform_below(rng, v.size())];
  }

  static std::string solution(std::mt19937_64& rng) {
    const auto& v = detail::mock_vocabulary();
    std::string s = "A ";
    s += pick(rng, v.forms);
    s += " made of ";
    s += pick(rng, v.materials);
    s += " that ";
    s += pick(rng, v.mechanisms);
    s += " ";
    s += pick(rng, v.benefits);
    s += ", ";
    s += pick(rng, v.extras);
    s += ".";
    return s;
  }

  static std::string expansion(std::mt19937_64& rng) {
    const auto& v = detail::mock_vocabulary();
    std::string s = "In more detail, the design ";
    s += pick(rng, v.mechanisms);
    s += " ";
    s += pick(rng, v.benefits);
    s += ". It assumes the user prefers ";
    s += pick(rng, v.materials);
    s += " parts, and the reasoning is that a version ";
    s += pick(rng, v.extras);
    s += " is easier to adopt.";
    return s;
  }

  std::uint64_t seed_;
  std::string model_;
  std::atomic<std::size_t> calls_{0};
};

}  // namespace divbench
