#pragma once

// Prompt rendering for every generation strategy, and parsing of numbered or
// bulleted replies into individual solutions.

#include <array>
#include <cctype>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "divbench/corpus.hpp"
#include "divbench/error.hpp"

namespace divbench {

enum class StrategyKind {
  baseline,
  adjective_novel,
  adjective_unique,
  adjective_creative,
  phrase_expert,
  phrase_farfetched,
  few_shot,
  critique,
};

inline constexpr std::array<StrategyKind, 8> kAllStrategies = {
    StrategyKind::baseline,         StrategyKind::adjective_novel,   StrategyKind::adjective_unique,
    StrategyKind::adjective_creative, StrategyKind::phrase_expert, StrategyKind::phrase_farfetched,
    StrategyKind::few_shot,         StrategyKind::critique,
};

inline std::string to_string(StrategyKind k) {
  switch (k) {
    case StrategyKind::baseline: return "baseline";
    case StrategyKind::adjective_novel: return "adjective_novel";
    case StrategyKind::adjective_unique: return "adjective_unique";
    case StrategyKind::adjective_creative: return "adjective_creative";
    case StrategyKind::phrase_expert: return "phrase_expert";
    case StrategyKind::phrase_farfetched: return "phrase_farfetched";
    case StrategyKind::few_shot: return "few_shot";
    case StrategyKind::critique: return "critique";
  }
  return "unknown";
}

inline StrategyKind strategy_from_string(std::string_view s) {
  for (auto k : kAllStrategies)
    if (to_string(k) == s) return k;
  throw Error(Errc::InvalidArgument, "unknown strategy '" + std::string(s) + "'");
}

/// Heatmap column label.
inline std::string display_label(StrategyKind k) {
  switch (k) {
    case StrategyKind::baseline: return "Baseline";
    case StrategyKind::adjective_novel: return "Adjective - Novel";
    case StrategyKind::adjective_unique: return "Adjective - Unique";
    case StrategyKind::adjective_creative: return "Adjective - Creative";
    case StrategyKind::phrase_expert: return "Phrase - Expert";
    case StrategyKind::phrase_farfetched: return "Phrase - Far-fetched";
    case StrategyKind::few_shot: return "Few-Shot";
    case StrategyKind::critique: return "Critique";
  }
  return "Unknown";
}

struct PromptStrategy {
  StrategyKind kind = StrategyKind::baseline;
  int exemplar_count = 0;

  static PromptStrategy of(StrategyKind k) {
    return {k, k == StrategyKind::few_shot ? 3 : 0};
  }

  void validate() const {
    if (kind == StrategyKind::few_shot && exemplar_count < 1)
      throw Error(Errc::InvalidArgument, "few_shot needs exemplar_count >= 1");
    if (kind != StrategyKind::few_shot && exemplar_count != 0)
      throw Error(Errc::InvalidArgument, "exemplar_count is only meaningful for few_shot");
  }
};

enum class Role { system_free_text, user, assistant };

inline std::string wire_role(Role r) {
  switch (r) {
    case Role::system_free_text: return "system";
    case Role::user: return "user";
    case Role::assistant: return "assistant";
  }
  return "user";
}

inline Role role_from_wire(std::string_view s) {
  if (s == "system") return Role::system_free_text;
  if (s == "assistant") return Role::assistant;
  if (s == "user") return Role::user;
  throw Error(Errc::InvalidArgument, "unknown role '" + std::string(s) + "'");
}

struct ChatMessage {
  Role role = Role::user;
  std::string content;

  friend bool operator==(const ChatMessage&, const ChatMessage&) = default;
};

struct RenderedPrompt {
  std::vector<ChatMessage> messages;
  int expects_count = 5;

  const std::string& last_user_content() const {
    for (auto it = messages.rbegin(); it != messages.rend(); ++it)
      if (it->role == Role::user) return it->content;
    throw Error(Errc::InvalidArgument, "prompt has no user message");
  }
};

inline constexpr std::string_view kExpansionInstruction =
    "please expand the design solution to add more detail and explain the reasoning and "
    "assumptions behind the solution";

namespace detail {

inline std::optional<std::string_view> adjective(StrategyKind k) {
  switch (k) {
    case StrategyKind::adjective_novel: return "novel";
    case StrategyKind::adjective_unique: return "unique";
    case StrategyKind::adjective_creative: return "creative";
    default: return std::nullopt;
  }
}

inline std::optional<std::string_view> persona(StrategyKind k) {
  switch (k) {
    case StrategyKind::phrase_expert: return "You are a design expert.";
    case StrategyKind::phrase_farfetched:
      return "You are a design expert who is excellent at ideating far-fetched design ideas.";
    default: return std::nullopt;
  }
}

inline std::string exemplar_block(std::span<const SolutionRecord> exemplars) {
  std::string out = "[";
  for (std::size_t i = 0; i < exemplars.size(); ++i) {
    if (i) out += ", ";
    out += '"' + trim(exemplars[i].text) + '"';
  }
  return out + "]";
}

// Persona and few-shot rows end the statement with a period; the bare and
// adjective rows do not.
inline std::string request_sentence(const PromptStrategy& s, const DesignProblem& p, bool more) {
  std::string text;
  if (auto who = persona(s.kind)) text += std::string(*who) + " ";
  const int count = s.kind == StrategyKind::critique ? 50 : 5;
  text += "Generate " + std::to_string(count) + (more ? " more" : "");
  if (auto adj = adjective(s.kind)) text += " " + std::string(*adj);
  text += " design solutions for " + p.prompt_phrase();
  if (persona(s.kind) || s.kind == StrategyKind::few_shot) text += ".";
  return text;
}

inline void check_exemplars(const PromptStrategy& s, std::span<const SolutionRecord> exemplars) {
  s.validate();
  if (s.kind == StrategyKind::few_shot && exemplars.empty())
    throw Error(Errc::MissingExemplars, "few_shot prompting needs exemplar solutions");
  if (s.kind != StrategyKind::few_shot && !exemplars.empty())
    throw Error(Errc::UnexpectedExemplars, to_string(s.kind) + " takes no exemplars");
}

}  // namespace detail

inline RenderedPrompt render_initial(const PromptStrategy& strategy, const DesignProblem& problem,
                                     std::span<const SolutionRecord> exemplars = {}) {
  detail::check_exemplars(strategy, exemplars);
  std::string text = detail::request_sentence(strategy, problem, false);
  if (strategy.kind == StrategyKind::few_shot) {
    text += " Here are some example design solutions " + detail::exemplar_block(exemplars) +
            ". Note, the example design solutions are just for guidance. You do not have to "
            "mimic the solutions.";
  }
  return {{{Role::user, std::move(text)}}, strategy.kind == StrategyKind::critique ? 50 : 5};
}

/// Next prompt in an iterative conversation. The returned messages carry the
/// whole history so the reply is conditioned on every earlier solution.
inline RenderedPrompt render_followup(const PromptStrategy& strategy, const DesignProblem& problem,
                                      std::span<const ChatMessage> history,
                                      std::span<const SolutionRecord> exemplars = {}) {
  if (strategy.kind == StrategyKind::critique)
    throw Error(Errc::CritiqueHasNoFollowup, "critique prompting is a single bulk request");
  detail::check_exemplars(strategy, exemplars);
  if (history.size() < 2 || history.front().role != Role::user ||
      history.back().role != Role::assistant)
    throw Error(Errc::InvalidArgument, "follow-up needs the initial prompt and its reply in history");

  std::string text = detail::request_sentence(strategy, problem, true);
  if (strategy.kind == StrategyKind::few_shot) {
    // The follow-up row ends with the singular "solution".
    text += " Here are some example design solutions " + detail::exemplar_block(exemplars) +
            ". Note, the example design solutions are just for guidance. You do not have to "
            "mimic the solution.";
  }
  RenderedPrompt out;
  out.messages.assign(history.begin(), history.end());
  out.messages.push_back({Role::user, std::move(text)});
  out.expects_count = 5;
  return out;
}

inline RenderedPrompt render_critique_expansion(const SolutionRecord& solution) {
  if (solution.source != Source::llm)
    throw Error(Errc::NotLlmSolution, "record " + solution.id + " is not LLM-generated");
  solution.validate();
  return {{{Role::user, std::string(kExpansionInstruction) + "\n\n" + trim(solution.text)}}, 1};
}

// ---------------------------------------------------------------------------
// Reply parsing

struct CoherenceStats {
  double good_fraction = 1.0;
  double mean_word_length = 0.0;
};

namespace detail {

// Decodes one code point; invalid sequences yield U+FFFD and consume one byte.
inline char32_t next_code_point(std::string_view s, std::size_t& i) {
  const auto b0 = static_cast<unsigned char>(s[i]);
  auto cont = [&](std::size_t k) {
    return i + k < s.size() && (static_cast<unsigned char>(s[i + k]) & 0xC0) == 0x80;
  };
  if (b0 < 0x80) {
    ++i;
    return b0;
  }
  if ((b0 & 0xE0) == 0xC0 && b0 >= 0xC2 && cont(1)) {
    char32_t cp = ((b0 & 0x1F) << 6) | (static_cast<unsigned char>(s[i + 1]) & 0x3F);
    i += 2;
    return cp;
  }
  if ((b0 & 0xF0) == 0xE0 && cont(1) && cont(2)) {
    char32_t cp = ((b0 & 0x0F) << 12) | ((static_cast<unsigned char>(s[i + 1]) & 0x3F) << 6) |
                  (static_cast<unsigned char>(s[i + 2]) & 0x3F);
    i += 3;
    return cp;
  }
  if ((b0 & 0xF8) == 0xF0 && cont(1) && cont(2) && cont(3)) {
    char32_t cp = ((b0 & 0x07) << 18) | ((static_cast<unsigned char>(s[i + 1]) & 0x3F) << 12) |
                  ((static_cast<unsigned char>(s[i + 2]) & 0x3F) << 6) |
                  (static_cast<unsigned char>(s[i + 3]) & 0x3F);
    i += 4;
    return cp;
  }
  ++i;
  return 0xFFFD;
}

inline bool is_text_like(char32_t cp) {
  if (cp < 0x80) {
    const auto c = static_cast<unsigned char>(cp);
    return std::isalnum(c) || std::ispunct(c) || std::isspace(c);
  }
  if (cp >= 0x00C0 && cp <= 0x024F && cp != 0x00D7 && cp != 0x00F7) return true;  // Latin letters
  switch (cp) {
    case 0x00B0: case 0x00B7: case 0x2013: case 0x2014: case 0x2018: case 0x2019:
    case 0x201C: case 0x201D: case 0x2022: case 0x2026: case 0x00A0:
      return true;
    default:
      return false;
  }
}

}  // namespace detail

inline CoherenceStats coherence_stats(std::string_view reply) {
  std::size_t total = 0, good = 0, words = 0, word_chars = 0, current = 0;
  for (std::size_t i = 0; i < reply.size();) {
    const char32_t cp = detail::next_code_point(reply, i);
    ++total;
    if (detail::is_text_like(cp)) ++good;
    const bool space = cp < 0x80 && std::isspace(static_cast<unsigned char>(cp));
    if (space) {
      if (current) ++words;
      current = 0;
    } else {
      ++current;
      ++word_chars;
    }
  }
  if (current) ++words;
  CoherenceStats st;
  st.good_fraction = total ? static_cast<double>(good) / static_cast<double>(total) : 1.0;
  st.mean_word_length = words ? static_cast<double>(word_chars) / static_cast<double>(words) : 0.0;
  return st;
}

/// Screen applied before list parsing: at least 80% of code points must be
/// alphanumeric, punctuation or whitespace and words must average at most 20
/// characters.
inline bool is_coherent(std::string_view reply) {
  const auto st = coherence_stats(reply);
  return st.good_fraction >= 0.8 && st.mean_word_length <= 20.0;
}

namespace detail {

enum class MarkerStyle { numeric, bullet };

struct Marker {
  MarkerStyle style;
  std::size_t indent;
  std::size_t body;  // offset of the item text within the line
};

inline std::optional<Marker> match_marker(std::string_view line) {
  std::size_t i = 0;
  while (i < line.size() && (line[i] == ' ' || line[i] == '\t')) ++i;
  const std::size_t indent = i;
  auto followed_by_space = [&](std::size_t k) {
    return k < line.size() && (line[k] == ' ' || line[k] == '\t');
  };
  auto skip_space = [&](std::size_t k) {
    while (k < line.size() && (line[k] == ' ' || line[k] == '\t')) ++k;
    return k;
  };
  auto digits_from = [&](std::size_t k) {
    std::size_t e = k;
    while (e < line.size() && std::isdigit(static_cast<unsigned char>(line[e]))) ++e;
    return e;
  };

  if (i < line.size() && line[i] == '(') {
    const std::size_t e = digits_from(i + 1);
    if (e > i + 1 && e < line.size() && line[e] == ')' && followed_by_space(e + 1))
      return Marker{MarkerStyle::numeric, indent, skip_space(e + 1)};
    return std::nullopt;
  }
  if (const std::size_t e = digits_from(i); e > i) {
    if (e < line.size() && (line[e] == '.' || line[e] == ')') && followed_by_space(e + 1))
      return Marker{MarkerStyle::numeric, indent, skip_space(e + 1)};
    return std::nullopt;
  }
  if (line.substr(i, 3) == "•" && followed_by_space(i + 3))
    return Marker{MarkerStyle::bullet, indent, skip_space(i + 3)};
  if (i < line.size() && (line[i] == '-' || line[i] == '*' || line[i] == '+') && followed_by_space(i + 1))
    return Marker{MarkerStyle::bullet, indent, skip_space(i + 1)};
  return std::nullopt;
}

inline std::vector<std::string> split_lines(std::string_view text) {
  std::vector<std::string> lines;
  std::size_t start = 0;
  while (start <= text.size()) {
    const std::size_t nl = text.find('\n', start);
    std::string line(text.substr(start, nl == std::string_view::npos ? std::string_view::npos : nl - start));
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
    if (nl == std::string_view::npos) break;
    start = nl + 1;
  }
  return lines;
}

}  // namespace detail

namespace detail {

// List items of a reply (see parse_solutions for the grammar), without any
// count or coherence checks.
inline std::vector<std::string> list_items(std::string_view reply) {
  std::vector<std::string> items;
  std::optional<Marker> style;
  std::vector<std::string> current;
  std::vector<std::string> pending;  // unindented paragraph after a blank line
  bool blank_seen = false;

  auto flush = [&] {
    if (!current.empty()) {
      std::string joined;
      for (std::size_t i = 0; i < current.size(); ++i) {
        if (i) joined += '\n';
        joined += current[i];
      }
      items.push_back(trim(joined));
      current.clear();
    }
  };

  for (const auto& line : split_lines(reply)) {
    const std::string t = trim(line);
    const auto m = match_marker(line);
    const bool opens = m && (!style || (m->style == style->style && m->indent <= style->indent));
    if (opens) {
      if (!style) style = m;
      for (auto& p : pending) current.push_back(std::move(p));
      pending.clear();
      flush();
      current.push_back(trim(std::string_view(line).substr(m->body)));
      blank_seen = false;
      continue;
    }
    if (!style) continue;  // preamble
    if (t.empty()) {
      blank_seen = true;
      continue;
    }
    const bool unindented = !line.empty() && line[0] != ' ' && line[0] != '\t';
    if ((blank_seen && unindented && !m) || !pending.empty()) {
      pending.push_back(t);
    } else {
      current.push_back(t);
    }
  }
  flush();

  items.erase(std::remove_if(items.begin(), items.end(), [](const std::string& s) { return s.empty(); }),
              items.end());
  return items;
}

}  // namespace detail

/// Splits a reply into exactly `expected` solutions.
///
/// The first list marker fixes the list style (numeric "1." / "1)" / "(1)" or
/// bullet "-" / "*" / "+" / U+2022) and its indentation; only markers of that
/// style at that indentation or shallower open a new item, so nested
/// sub-bullets stay inside their parent. Text before the first item is a
/// preamble and is dropped, as is an unindented closing paragraph separated
/// from the last item by a blank line. When `expected` is 1 the whole reply is
/// the solution, unless the reply is itself a one-item list.
///
/// Throws Error(Incoherent) when the reply fails the coherence screen and
/// CountMismatchError when the item count differs from `expected`.
inline std::vector<std::string> parse_solutions(std::string_view reply, std::size_t expected) {
  if (!is_coherent(reply)) throw Error(Errc::Incoherent, "reply failed the coherence screen");
  if (expected == 1) {
    std::string whole = trim(reply);
    if (whole.empty()) throw CountMismatchError(0, 1);
    if (detail::match_marker(whole))
      if (auto items = detail::list_items(reply); items.size() == 1) return items;
    return {std::move(whole)};
  }
  auto items = detail::list_items(reply);
  if (items.size() != expected) throw CountMismatchError(items.size(), expected);
  return items;
}

/// Numbered list in the canonical reply format: "1. a\n2. b".
inline std::string format_numbered(std::span<const std::string> items) {
  std::string out;
  for (std::size_t i = 0; i < items.size(); ++i) {
    if (i) out += '\n';
    out += std::to_string(i + 1) + ". " + items[i];
  }
  return out;
}

}  // namespace divbench
