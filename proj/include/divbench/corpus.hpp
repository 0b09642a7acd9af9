#pragma once

// Design problems, solution records and the line-delimited JSON solutions
// interchange format.

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cmath>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <optional>
#include <regex>
#include <set>
#include <sstream>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "divbench/error.hpp"
#include "divbench/random.hpp"

namespace divbench {

using ordered_json = nlohmann::ordered_json;

struct DesignProblem {
  std::string id;
  std::string statement;

  /// The statement as it reads after "design solutions for ": leading
  /// capital lowered ("A device ..." -> "a device ...").
  std::string prompt_phrase() const {
    std::string s = statement;
    if (!s.empty()) s[0] = static_cast<char>(std::tolower(static_cast<unsigned char>(s[0])));
    return s;
  }
};

/// The five historical design problems, in their canonical order.
inline const std::vector<DesignProblem>& builtin_problems() {
  static const std::vector<DesignProblem> problems = {
      {"exercise", "A lightweight exercise device that can be used while traveling"},
      {"powder", "A device that disperses a light coating of powdered substance over a surface"},
      {"time", "A new way to measure the passage of time"},
      {"froth", "An innovative product to froth milk"},
      {"towels", "A device to fold washcloths, hand towels, and small bath towels"},
  };
  return problems;
}

inline const DesignProblem& find_problem(const std::string& id) {
  for (const auto& p : builtin_problems())
    if (p.id == id) return p;
  throw Error(Errc::InvalidArgument, "unknown design problem '" + id + "'");
}

struct SamplingParams {
  double temperature = 1.0;
  double top_p = 1.0;

  void validate() const {
    if (!(temperature >= 0.0 && temperature <= 2.0))
      throw Error(Errc::InvalidParams, "temperature must be in [0,2]");
    if (!(top_p >= 0.0 && top_p <= 1.0)) throw Error(Errc::InvalidParams, "top_p must be in [0,1]");
  }

  /// Column label used in heatmaps, e.g. "Temp 1 / TopP 0.5".
  std::string label() const { return "Temp " + format(temperature) + " / TopP " + format(top_p); }

  /// Directory-safe cell name, e.g. "temp1_topp0.5".
  std::string slug() const { return "temp" + format(temperature) + "_topp" + format(top_p); }

  friend bool operator==(const SamplingParams&, const SamplingParams&) = default;

 private:
  static std::string format(double v) {
    std::ostringstream os;
    os << v;
    return os.str();
  }
};

enum class Source { human, llm };

inline std::string to_string(Source s) { return s == Source::human ? "human" : "llm"; }

inline std::string utc_now_rfc3339() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline bool is_rfc3339(const std::string& s) {
  static const std::regex re(
      R"(^\d{4}-\d{2}-\d{2}[Tt]\d{2}:\d{2}:\d{2}(\.\d+)?([Zz]|[+-]\d{2}:\d{2})$)");
  return std::regex_match(s, re);
}

inline std::string trim(std::string_view s) {
  const auto ws = [](unsigned char c) { return std::isspace(c) != 0; };
  std::size_t b = 0, e = s.size();
  while (b < e && ws(s[b])) ++b;
  while (e > b && ws(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

struct SolutionRecord {
  std::string id;
  std::string topic;
  Source source = Source::llm;
  std::string strategy;
  std::optional<SamplingParams> params;
  int round = 0;
  std::string text;
  std::string created_at;

  /// Throws Error(MalformedRecord) naming the first violated invariant.
  void validate() const {
    if (id.empty()) throw Error(Errc::MalformedRecord, "empty id");
    if (topic.empty()) throw Error(Errc::MalformedRecord, "record " + id + ": empty topic");
    if (trim(text).empty()) throw Error(Errc::MalformedRecord, "record " + id + ": empty text");
    if (round < 0) throw Error(Errc::MalformedRecord, "record " + id + ": negative round");
    if (source == Source::human && params)
      throw Error(Errc::MalformedRecord, "record " + id + ": human record carries sampling params");
    if (source == Source::human && round != 0)
      throw Error(Errc::MalformedRecord, "record " + id + ": human record with round != 0");
    if (params) {
      try {
        params->validate();
      } catch (const Error& e) {
        throw Error(Errc::MalformedRecord, "record " + id + ": " + e.what());
      }
    }
  }
};

inline ordered_json to_json(const SolutionRecord& r) {
  ordered_json j;
  j["id"] = r.id;
  j["topic"] = r.topic;
  j["source"] = to_string(r.source);
  j["strategy"] = r.strategy;
  if (r.params) {
    j["params"] = {{"temperature", r.params->temperature}, {"top_p", r.params->top_p}};
  } else {
    j["params"] = nullptr;
  }
  j["round"] = r.round;
  j["text"] = r.text;
  j["created_at"] = r.created_at;
  return j;
}

inline std::string dump_line(const ordered_json& j) {
  return j.dump(-1, ' ', false, ordered_json::error_handler_t::replace);
}

/// Decodes one interchange object. Only topic and text are mandatory; the
/// remaining keys fall back to human-corpus defaults when absent.
inline SolutionRecord record_from_json(const nlohmann::json& j, std::size_t line) {
  if (!j.is_object()) throw MalformedRecordError(line, "expected a JSON object");
  const auto str = [&](const char* key, std::optional<std::string> fallback) -> std::string {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) {
      if (fallback) return *fallback;
      throw MalformedRecordError(line, std::string("missing key '") + key + "'");
    }
    if (!it->is_string()) throw MalformedRecordError(line, std::string("'") + key + "' must be a string");
    return it->get<std::string>();
  };

  SolutionRecord r;
  r.topic = str("topic", std::nullopt);
  r.text = str("text", std::nullopt);
  r.id = str("id", r.topic + "-h" + std::to_string(line));
  const std::string source = str("source", "human");
  if (source == "human") {
    r.source = Source::human;
  } else if (source == "llm") {
    r.source = Source::llm;
  } else {
    throw MalformedRecordError(line, "source must be \"human\" or \"llm\"");
  }
  r.strategy = str("strategy", r.source == Source::human ? "crowdsourced" : "");
  r.created_at = str("created_at", "");
  if (!r.created_at.empty() && !is_rfc3339(r.created_at))
    throw MalformedRecordError(line, "created_at is not an RFC 3339 timestamp");

  if (auto it = j.find("params"); it != j.end() && !it->is_null()) {
    if (!it->is_object() || !it->contains("temperature") || !it->contains("top_p") ||
        !(*it)["temperature"].is_number() || !(*it)["top_p"].is_number())
      throw MalformedRecordError(line, "params must be null or {temperature, top_p}");
    r.params = SamplingParams{(*it)["temperature"].get<double>(), (*it)["top_p"].get<double>()};
  }
  if (auto it = j.find("round"); it != j.end() && !it->is_null()) {
    if (!it->is_number_integer()) throw MalformedRecordError(line, "round must be an integer");
    r.round = it->get<int>();
  }
  try {
    r.validate();
  } catch (const Error& e) {
    throw MalformedRecordError(line, e.what());
  }
  return r;
}

/// Reads every record of a solutions interchange file in file order.
inline std::vector<SolutionRecord> read_solutions(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, path.string());
  std::vector<SolutionRecord> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecordError(lineno, e.what());
    }
    out.push_back(record_from_json(j, lineno));
  }
  return out;
}

inline void write_solutions(const std::filesystem::path& path,
                            const std::vector<SolutionRecord>& records, bool append = false) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | (append ? std::ios::app : std::ios::trunc));
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  for (const auto& r : records) out << dump_line(to_json(r)) << '\n';
}

struct SolutionSet {
  std::string label;
  std::string topic;
  std::vector<SolutionRecord> records;

  std::size_t size() const noexcept { return records.size(); }

  void validate() const {
    std::set<std::string> ids;
    for (const auto& r : records) {
      if (r.topic != topic)
        throw Error(Errc::TopicMismatch, "record " + r.id + " has topic '" + r.topic +
                                             "' in set for '" + topic + "'");
      if (!ids.insert(r.id).second) throw Error(Errc::MalformedRecord, "duplicate record id " + r.id);
    }
  }
};

/// Loads the crowdsourced corpus for one topic. Every record must be a human
/// record for that topic; the set is labelled "Human <count>".
inline SolutionSet load_human_corpus(const std::filesystem::path& path, const std::string& topic) {
  if (!std::filesystem::exists(path)) throw Error(Errc::MissingFile, path.string());
  auto records = read_solutions(path);
  if (records.empty()) throw Error(Errc::EmptyCorpus, path.string());
  for (std::size_t i = 0; i < records.size(); ++i) {
    if (records[i].topic != topic)
      throw Error(Errc::TopicMismatch, path.string() + ": record " + records[i].id + " has topic '" +
                                           records[i].topic + "', expected '" + topic + "'");
    if (records[i].source != Source::human)
      throw Error(Errc::MalformedRecord, path.string() + ": record " + records[i].id +
                                             " is not a human record");
  }
  SolutionSet set{"Human " + std::to_string(records.size()), topic, std::move(records)};
  set.validate();
  return set;
}

namespace detail {

inline std::string half_label(const std::string& label, std::size_t half, int version) {
  // "Human 100" -> "Human 50 v1"; anything else gets a plain suffix.
  std::string base = label;
  if (auto sp = base.rfind(' '); sp != std::string::npos) {
    const std::string tail = base.substr(sp + 1);
    if (!tail.empty() && std::all_of(tail.begin(), tail.end(), [](unsigned char c) { return std::isdigit(c); }))
      base = base.substr(0, sp) + " " + std::to_string(half);
  }
  return base + " v" + std::to_string(version);
}

}  // namespace detail

/// Splits an even-sized set into two halves. Without a seed the split keeps
/// file order; with one the records are shuffled first.
inline std::pair<SolutionSet, SolutionSet> split_halves(const SolutionSet& set,
                                                        std::optional<std::uint64_t> seed) {
  const std::size_t n = set.size();
  if (n < 2 || n % 2 != 0)
    throw Error(Errc::OddCardinality, "cannot halve a set of " + std::to_string(n));
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  if (seed) order = seeded_permutation(n, *seed);

  const std::size_t half = n / 2;
  SolutionSet v1{detail::half_label(set.label, half, 1), set.topic, {}};
  SolutionSet v2{detail::half_label(set.label, half, 2), set.topic, {}};
  for (std::size_t i = 0; i < n; ++i)
    (i < half ? v1 : v2).records.push_back(set.records[order[i]]);
  return {std::move(v1), std::move(v2)};
}

}  // namespace divbench
