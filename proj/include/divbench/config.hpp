#pragma once

// Run configuration: a JSON document validated field by field. Every error
// names the JSON pointer of the offending value.

#include <algorithm>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "json.hpp"

#include "divbench/corpus.hpp"
#include "divbench/embedding.hpp"
#include "divbench/error.hpp"
#include "divbench/provider.hpp"
#include "divbench/random.hpp"

namespace divbench {

enum class SweepSelection { params, strategies, both };

inline std::string to_string(SweepSelection s) {
  switch (s) {
    case SweepSelection::params: return "params";
    case SweepSelection::strategies: return "strategies";
    case SweepSelection::both: return "both";
  }
  return "unknown";
}

struct RunConfig {
  std::string run_id = "run";
  std::filesystem::path output_dir = "runs";
  std::vector<std::string> topics;
  std::map<std::string, std::filesystem::path> human_corpus;  // topic -> JSONL
  bool synthetic_human = false;  // fabricate corpora for topics without a file
  int human_corpus_size = 100;
  ProviderConfig provider;
  EmbeddingProviderSpec embedding;
  SweepSelection sweeps = SweepSelection::both;
  int k_hull = 13;
  int k_centroid = 20;
  std::string baseline_label = "Human 50 v2";
  std::uint64_t seed = 0;
  SamplingParams strategy_params{1.0, 1.0};
  SamplingParams critique_params{1.0, 1.0};
  bool critique_critique = false;
  int exemplar_count = 3;
  double test_fraction = 0.2;
  double l2 = 1.0;
  bool standardize = false;
  std::size_t facet_budget = 5'000'000;

  bool wants_params() const { return sweeps != SweepSelection::strategies; }
  bool wants_strategies() const { return sweeps != SweepSelection::params; }

  /// Purpose-specific seeds all derive from the one master seed.
  std::uint64_t seed_for(const std::string& purpose) const { return derive_seed(seed, purpose); }

  std::filesystem::path run_dir() const { return output_dir / run_id; }
};

namespace detail {

using json = nlohmann::json;

[[noreturn]] inline void config_fail(const std::string& path, const std::string& what) {
  throw Error(Errc::Config, path + ": " + what);
}

class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) config_fail(path_.empty() ? "/" : path_, "expected an object");
  }

  const json* get(const std::string& key) {
    seen_.insert(key);
    auto it = j_.find(key);
    return it == j_.end() ? nullptr : &*it;
  }
  std::string at(const std::string& key) const { return path_ + "/" + key; }

  template <class Fn>
  void opt(const std::string& key, Fn&& fn) {
    if (const json* v = get(key)) fn(*v, at(key));
  }

  void reject_unknown() const {
    for (auto it = j_.begin(); it != j_.end(); ++it)
      if (!seen_.count(it.key())) config_fail(at(it.key()), "unknown key");
  }

 private:
  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

inline std::string as_string(const json& v, const std::string& path) {
  if (!v.is_string()) config_fail(path, "expected a string");
  return v.get<std::string>();
}

inline std::string as_nonempty(const json& v, const std::string& path) {
  auto s = as_string(v, path);
  if (s.empty()) config_fail(path, "must not be empty");
  return s;
}

inline bool as_bool(const json& v, const std::string& path) {
  if (!v.is_boolean()) config_fail(path, "expected a boolean");
  return v.get<bool>();
}

inline double as_number(const json& v, const std::string& path) {
  if (!v.is_number()) config_fail(path, "expected a number");
  return v.get<double>();
}

inline long long as_int(const json& v, const std::string& path, long long lo) {
  if (!v.is_number_integer()) config_fail(path, "expected an integer");
  const auto x = v.get<long long>();
  if (x < lo) config_fail(path, "must be at least " + std::to_string(lo));
  return x;
}

inline std::uint64_t as_seed(const json& v, const std::string& path) {
  if (v.is_number_unsigned()) return v.get<std::uint64_t>();
  return static_cast<std::uint64_t>(as_int(v, path, 0));
}

inline SamplingParams as_params(const json& v, const std::string& path) {
  ObjectReader r(v, path);
  SamplingParams p;
  r.opt("temperature", [&](const json& x, const std::string& at) { p.temperature = as_number(x, at); });
  r.opt("top_p", [&](const json& x, const std::string& at) { p.top_p = as_number(x, at); });
  r.reject_unknown();
  try {
    p.validate();
  } catch (const Error& e) {
    config_fail(path, e.detail());
  }
  return p;
}

}  // namespace detail

/// Parses and validates a configuration document. Relative corpus and
/// embedding paths resolve against `base_dir`.
inline RunConfig parse_run_config(const nlohmann::json& j, const std::filesystem::path& base_dir = {}) {
  using detail::json;
  using namespace detail;
  RunConfig c;
  ObjectReader r(j, "");
  auto resolve = [&](const std::string& p) {
    std::filesystem::path path(p);
    return path.is_relative() && !base_dir.empty() ? base_dir / path : path;
  };

  r.opt("run_id", [&](const json& v, const std::string& at) {
    c.run_id = as_nonempty(v, at);
    if (c.run_id.find_first_of("/\\") != std::string::npos || c.run_id == "." || c.run_id == "..")
      config_fail(at, "must be a plain directory name");
  });
  r.opt("output_dir", [&](const json& v, const std::string& at) { c.output_dir = resolve(as_nonempty(v, at)); });

  const json* topics = r.get("topics");
  if (!topics) config_fail("/topics", "is required");
  if (!topics->is_array() || topics->empty()) config_fail("/topics", "expected a non-empty array");
  for (std::size_t i = 0; i < topics->size(); ++i) {
    const std::string at = "/topics/" + std::to_string(i);
    const auto id = as_nonempty((*topics)[i], at);
    try {
      find_problem(id);
    } catch (const Error&) {
      config_fail(at, "unknown topic '" + id + "'");
    }
    if (std::find(c.topics.begin(), c.topics.end(), id) != c.topics.end()) config_fail(at, "duplicate topic");
    c.topics.push_back(id);
  }

  r.opt("human_corpus", [&](const json& v, const std::string& at) {
    if (!v.is_object()) config_fail(at, "expected an object of topic -> path");
    for (auto it = v.begin(); it != v.end(); ++it) {
      if (std::find(c.topics.begin(), c.topics.end(), it.key()) == c.topics.end())
        config_fail(at + "/" + it.key(), "topic is not selected");
      c.human_corpus[it.key()] = resolve(as_nonempty(it.value(), at + "/" + it.key()));
    }
  });
  r.opt("synthetic_human", [&](const json& v, const std::string& at) { c.synthetic_human = as_bool(v, at); });
  r.opt("human_corpus_size", [&](const json& v, const std::string& at) {
    c.human_corpus_size = static_cast<int>(as_int(v, at, 2));
    if (c.human_corpus_size % 2) config_fail(at, "must be even");
  });

  r.opt("provider", [&](const json& v, const std::string& at) {
    ObjectReader p(v, at);
    p.opt("endpoint", [&](const json& x, const std::string& a) { c.provider.endpoint = as_nonempty(x, a); });
    p.opt("model", [&](const json& x, const std::string& a) { c.provider.model = as_nonempty(x, a); });
    p.opt("api_key_env", [&](const json& x, const std::string& a) { c.provider.api_key_env = as_nonempty(x, a); });
    p.opt("max_retries", [&](const json& x, const std::string& a) {
      c.provider.max_retries = static_cast<int>(as_int(x, a, 0));
    });
    p.opt("requests_per_minute", [&](const json& x, const std::string& a) {
      c.provider.requests_per_minute = as_number(x, a);
      if (!(c.provider.requests_per_minute > 0.0)) config_fail(a, "must be positive");
    });
    p.opt("max_in_flight", [&](const json& x, const std::string& a) {
      c.provider.max_in_flight = static_cast<int>(as_int(x, a, 1));
    });
    p.reject_unknown();
  });

  r.opt("embedding", [&](const json& v, const std::string& at) {
    ObjectReader e(v, at);
    e.opt("kind", [&](const json& x, const std::string& a) {
      try {
        c.embedding.kind = embedding_kind_from_string(as_string(x, a));
      } catch (const Error&) {
        config_fail(a, "expected one of file, remote, stub");
      }
    });
    e.opt("location", [&](const json& x, const std::string& a) { c.embedding.location = as_string(x, a); });
    e.opt("model_tag", [&](const json& x, const std::string& a) { c.embedding.model_tag = as_nonempty(x, a); });
    e.opt("dim", [&](const json& x, const std::string& a) { c.embedding.dim = static_cast<int>(as_int(x, a, 1)); });
    e.opt("api_key_env", [&](const json& x, const std::string& a) { c.embedding.api_key_env = as_string(x, a); });
    e.opt("batch_size", [&](const json& x, const std::string& a) {
      c.embedding.batch_size = static_cast<int>(as_int(x, a, 1));
    });
    e.reject_unknown();
    if (c.embedding.kind == EmbeddingKind::file) {
      if (c.embedding.location.empty()) config_fail(at + "/location", "is required for file embeddings");
      c.embedding.location = resolve(c.embedding.location).string();
    }
    if (c.embedding.kind == EmbeddingKind::remote && c.embedding.location.empty())
      config_fail(at + "/location", "is required for remote embeddings");
  });

  r.opt("sweeps", [&](const json& v, const std::string& at) {
    const auto s = as_string(v, at);
    if (s == "params") c.sweeps = SweepSelection::params;
    else if (s == "strategies") c.sweeps = SweepSelection::strategies;
    else if (s == "both") c.sweeps = SweepSelection::both;
    else config_fail(at, "expected one of params, strategies, both");
  });
  r.opt("k_hull", [&](const json& v, const std::string& at) { c.k_hull = static_cast<int>(as_int(v, at, 1)); });
  r.opt("k_centroid", [&](const json& v, const std::string& at) { c.k_centroid = static_cast<int>(as_int(v, at, 1)); });
  r.opt("baseline_label", [&](const json& v, const std::string& at) { c.baseline_label = as_nonempty(v, at); });
  r.opt("seed", [&](const json& v, const std::string& at) { c.seed = as_seed(v, at); });
  r.opt("strategy_params", [&](const json& v, const std::string& at) { c.strategy_params = as_params(v, at); });
  r.opt("critique", [&](const json& v, const std::string& at) {
    ObjectReader k(v, at);
    k.opt("params", [&](const json& x, const std::string& a) { c.critique_params = as_params(x, a); });
    k.opt("second_pass", [&](const json& x, const std::string& a) { c.critique_critique = as_bool(x, a); });
    k.reject_unknown();
  });
  r.opt("exemplar_count", [&](const json& v, const std::string& at) {
    c.exemplar_count = static_cast<int>(as_int(v, at, 1));
  });
  r.opt("classifier", [&](const json& v, const std::string& at) {
    ObjectReader k(v, at);
    k.opt("test_fraction", [&](const json& x, const std::string& a) {
      c.test_fraction = as_number(x, a);
      if (!(c.test_fraction > 0.0 && c.test_fraction < 1.0)) config_fail(a, "must lie in (0, 1)");
    });
    k.opt("l2", [&](const json& x, const std::string& a) {
      c.l2 = as_number(x, a);
      if (!(c.l2 >= 0.0)) config_fail(a, "must be non-negative");
    });
    k.opt("standardize", [&](const json& x, const std::string& a) { c.standardize = as_bool(x, a); });
    k.reject_unknown();
  });
  r.opt("facet_budget", [&](const json& v, const std::string& at) {
    c.facet_budget = static_cast<std::size_t>(as_int(v, at, 1));
  });
  r.reject_unknown();

  if (c.k_hull > c.embedding.dim) config_fail("/k_hull", "exceeds the embedding dimension");
  if (c.k_centroid > c.embedding.dim) config_fail("/k_centroid", "exceeds the embedding dimension");
  try {
    c.provider.validate();
  } catch (const Error& e) {
    config_fail("/provider", e.detail());
  }
  return c;
}

inline RunConfig load_run_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(Errc::MissingFile, path.string());
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::Config, path.string() + ": " + e.what());
  }
  return parse_run_config(j, path.parent_path());
}

/// Canonical JSON form; its hash identifies the configuration in manifests.
inline nlohmann::ordered_json to_json(const RunConfig& c) {
  nlohmann::ordered_json j;
  j["run_id"] = c.run_id;
  j["output_dir"] = c.output_dir.generic_string();
  j["topics"] = c.topics;
  j["human_corpus"] = nlohmann::ordered_json::object();
  for (const auto& [t, p] : c.human_corpus) j["human_corpus"][t] = p.generic_string();
  j["synthetic_human"] = c.synthetic_human;
  j["human_corpus_size"] = c.human_corpus_size;
  j["provider"] = {{"endpoint", c.provider.endpoint},
                   {"model", c.provider.model},
                   {"api_key_env", c.provider.api_key_env},
                   {"max_retries", c.provider.max_retries},
                   {"requests_per_minute", c.provider.requests_per_minute},
                   {"max_in_flight", c.provider.max_in_flight}};
  j["embedding"] = {{"kind", to_string(c.embedding.kind)},
                    {"location", c.embedding.location},
                    {"model_tag", c.embedding.model_tag},
                    {"dim", c.embedding.dim},
                    {"api_key_env", c.embedding.api_key_env},
                    {"batch_size", c.embedding.batch_size}};
  j["sweeps"] = to_string(c.sweeps);
  j["k_hull"] = c.k_hull;
  j["k_centroid"] = c.k_centroid;
  j["baseline_label"] = c.baseline_label;
  j["seed"] = c.seed;
  j["strategy_params"] = {{"temperature", c.strategy_params.temperature}, {"top_p", c.strategy_params.top_p}};
  j["critique"] = {
      {"params", {{"temperature", c.critique_params.temperature}, {"top_p", c.critique_params.top_p}}},
      {"second_pass", c.critique_critique}};
  j["exemplar_count"] = c.exemplar_count;
  j["classifier"] = {{"test_fraction", c.test_fraction}, {"l2", c.l2}, {"standardize", c.standardize}};
  j["facet_budget"] = c.facet_budget;
  return j;
}

inline std::string config_hash(const RunConfig& c) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(to_json(c).dump())));
  return buf;
}

}  // namespace divbench
