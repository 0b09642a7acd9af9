#pragma once

// Generation campaigns: iterative prompting, critique expansion, and the two
// sweeps (sampling parameters and prompting strategies), with transcript
// persistence.

#include <algorithm>
#include <atomic>
#include <exception>
#include <filesystem>
#include <fstream>
#include <functional>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

#include "divbench/corpus.hpp"
#include "divbench/error.hpp"
#include "divbench/promptkit.hpp"
#include "divbench/provider.hpp"
#include "divbench/random.hpp"

namespace divbench {

inline constexpr int kSolutionsPerCell = 50;
inline constexpr int kFollowupRounds = 9;

/// The eight temperature/top-P cells; the high/high pair is excluded.
inline std::vector<SamplingParams> parameter_grid() {
  return {{0, 0}, {0, 0.5}, {0, 1}, {1, 0}, {1, 0.5}, {1, 1}, {2, 0}, {2, 0.5}};
}

inline void validate_sweep_params(const std::vector<SamplingParams>& cells) {
  for (const auto& p : cells) {
    p.validate();
    if (p.temperature == 2.0 && p.top_p == 1.0)
      throw Error(Errc::InvalidParams, "temperature=2 / top_p=1 is excluded from sweeps (incoherent output)");
  }
}

struct RoundRecord {
  std::vector<ChatMessage> messages;
  int expects_count = 0;
  std::string reply;
  std::vector<std::string> solutions;
};

struct GenerationTranscript {
  std::string topic;
  std::string cell;
  PromptStrategy strategy;
  std::string strategy_label;  // "critique_critique" for the double pass
  SamplingParams params;
  std::string provider_model;
  std::optional<std::uint64_t> seed;
  std::vector<std::string> exemplar_ids;
  std::vector<RoundRecord> rounds;
  std::vector<SolutionRecord> solutions;  // the cell's final solution set
};

struct CampaignContext {
  ChatProvider& provider;
  /// Re-sends of an identical prompt after an unparseable reply.
  int parse_retries = 2;
  std::function<std::string()> timestamp = utc_now_rfc3339;
};

namespace detail {

struct Exchange {
  std::string reply;
  std::vector<std::string> solutions;
};

inline Exchange ask(CampaignContext& ctx, const RenderedPrompt& prompt, const SamplingParams& params) {
  ChatRequest req{ctx.provider.model(), prompt.messages, params};
  std::string last_error;
  for (int attempt = 0; attempt <= ctx.parse_retries; ++attempt) {
    std::string reply = ctx.provider.complete(req);
    try {
      auto items = parse_solutions(reply, static_cast<std::size_t>(prompt.expects_count));
      return {std::move(reply), std::move(items)};
    } catch (const Error& e) {
      if (e.code() != Errc::CountMismatch && e.code() != Errc::Incoherent) throw;
      last_error = e.what();
    }
  }
  throw Error(Errc::ParseFailure, "gave up after " + std::to_string(ctx.parse_retries + 1) +
                                      " attempts: " + last_error);
}

inline SolutionRecord make_record(const GenerationTranscript& t, int round, std::size_t index,
                                  std::string text, const std::string& stamp) {
  SolutionRecord r;
  r.id = t.topic + "-" + t.cell + "-r" + std::to_string(round) + "-" + std::to_string(index);
  r.topic = t.topic;
  r.source = Source::llm;
  r.strategy = t.strategy_label;
  r.params = t.params;
  r.round = round;
  r.text = std::move(text);
  r.created_at = stamp;
  return r;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Persistence

inline ordered_json to_json(const ChatMessage& m) {
  ordered_json j;
  j["role"] = wire_role(m.role);
  j["content"] = m.content;
  return j;
}

/// Writes transcript.jsonl and solutions.jsonl into `dir`, then marks the cell
/// complete with cell.json (written last, so a crash leaves no marker).
inline void persist_transcript(const std::filesystem::path& dir, const GenerationTranscript& t) {
  std::filesystem::create_directories(dir);
  {
    std::ofstream out(dir / "transcript.jsonl", std::ios::binary | std::ios::trunc);
    if (!out) throw Error(Errc::Io, "cannot write " + (dir / "transcript.jsonl").string());
    ordered_json h;
    h["type"] = "header";
    h["topic"] = t.topic;
    h["cell"] = t.cell;
    h["strategy"] = t.strategy_label;
    h["exemplar_count"] = t.strategy.exemplar_count;
    h["params"] = {{"temperature", t.params.temperature}, {"top_p", t.params.top_p}};
    h["provider_model"] = t.provider_model;
    h["seed"] = t.seed ? ordered_json(*t.seed) : ordered_json(nullptr);
    h["exemplar_ids"] = t.exemplar_ids;
    out << dump_line(h) << '\n';
    for (std::size_t i = 0; i < t.rounds.size(); ++i) {
      const auto& r = t.rounds[i];
      ordered_json j;
      j["type"] = "round";
      j["index"] = i;
      j["expects_count"] = r.expects_count;
      j["messages"] = ordered_json::array();
      for (const auto& m : r.messages) j["messages"].push_back(to_json(m));
      j["reply"] = r.reply;
      j["solutions"] = r.solutions;
      out << dump_line(j) << '\n';
    }
  }
  write_solutions(dir / "solutions.jsonl", t.solutions);
  ordered_json cell;
  cell["topic"] = t.topic;
  cell["cell"] = t.cell;
  cell["strategy"] = t.strategy_label;
  cell["solutions"] = t.solutions.size();
  cell["rounds"] = t.rounds.size();
  cell["complete"] = true;
  std::ofstream(dir / "cell.json", std::ios::binary | std::ios::trunc) << cell.dump(2) << '\n';
}

/// True when `dir` holds a cell that finished with the expected solution count.
inline bool cell_complete(const std::filesystem::path& dir, std::size_t expected = kSolutionsPerCell) {
  std::ifstream in(dir / "cell.json");
  if (!in) return false;
  try {
    const auto j = nlohmann::json::parse(in);
    return j.value("complete", false) && j.value("solutions", std::size_t{0}) == expected &&
           std::filesystem::exists(dir / "solutions.jsonl");
  } catch (const nlohmann::json::exception&) {
    return false;
  }
}

/// Re-parses every stored reply and compares with the stored solutions.
/// Returns the indices of rounds that do not replay.
inline std::vector<std::size_t> replay_transcript(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw Error(Errc::MissingFile, file.string());
  std::vector<std::size_t> bad;
  std::string line;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.at("type") != "round") continue;
    const auto expected = j.at("solutions").get<std::vector<std::string>>();
    try {
      const auto parsed = parse_solutions(j.at("reply").get<std::string>(), j.at("expects_count").get<std::size_t>());
      if (parsed != expected) bad.push_back(j.at("index").get<std::size_t>());
    } catch (const Error&) {
      bad.push_back(j.at("index").get<std::size_t>());
    }
  }
  return bad;
}

// ---------------------------------------------------------------------------
// Campaigns

/// One initial prompt followed by nine history-conditioned follow-ups, five
/// solutions each. Few-shot cells pass their exemplars here.
inline GenerationTranscript run_baseline_iterative(const DesignProblem& problem, const PromptStrategy& strategy,
                                                   const SamplingParams& params, CampaignContext& ctx,
                                                   std::span<const SolutionRecord> exemplars = {},
                                                   std::optional<std::uint64_t> seed = std::nullopt,
                                                   std::optional<std::string> cell = std::nullopt,
                                                   std::optional<std::filesystem::path> persist_dir = std::nullopt) {
  if (strategy.kind == StrategyKind::critique)
    throw Error(Errc::CritiqueHasNoFollowup, "use run_critique for critique prompting");
  params.validate();

  GenerationTranscript t;
  t.topic = problem.id;
  t.cell = cell.value_or(to_string(strategy.kind));
  t.strategy = strategy;
  t.strategy_label = to_string(strategy.kind);
  t.params = params;
  t.provider_model = ctx.provider.model();
  t.seed = seed;
  for (const auto& e : exemplars) t.exemplar_ids.push_back(e.id);

  std::vector<ChatMessage> history;
  for (int round = 0; round <= kFollowupRounds; ++round) {
    const RenderedPrompt prompt = round == 0 ? render_initial(strategy, problem, exemplars)
                                             : render_followup(strategy, problem, history, exemplars);
    auto ex = detail::ask(ctx, prompt, params);
    const std::string stamp = ctx.timestamp();
    for (std::size_t i = 0; i < ex.solutions.size(); ++i)
      t.solutions.push_back(detail::make_record(t, round, i, ex.solutions[i], stamp));
    history = prompt.messages;
    history.push_back({Role::assistant, ex.reply});
    t.rounds.push_back({prompt.messages, prompt.expects_count, std::move(ex.reply), std::move(ex.solutions)});
  }
  if (persist_dir) persist_transcript(*persist_dir, t);
  return t;
}

/// One bulk request for 50 solutions, then one expansion request per
/// solution. With `second_pass` the expanded texts are expanded once more.
inline GenerationTranscript run_critique(const DesignProblem& problem, const SamplingParams& params,
                                         CampaignContext& ctx, bool second_pass = false,
                                         std::optional<std::uint64_t> seed = std::nullopt,
                                         std::optional<std::filesystem::path> persist_dir = std::nullopt) {
  params.validate();
  const PromptStrategy strategy = PromptStrategy::of(StrategyKind::critique);

  GenerationTranscript t;
  t.topic = problem.id;
  t.strategy = strategy;
  t.strategy_label = second_pass ? "critique_critique" : "critique";
  t.cell = t.strategy_label;
  t.params = params;
  t.provider_model = ctx.provider.model();
  t.seed = seed;

  const RenderedPrompt bulk = render_initial(strategy, problem);
  auto first = detail::ask(ctx, bulk, params);
  std::vector<SolutionRecord> current;
  {
    const std::string stamp = ctx.timestamp();
    for (std::size_t i = 0; i < first.solutions.size(); ++i)
      current.push_back(detail::make_record(t, 0, i, first.solutions[i], stamp));
  }
  t.rounds.push_back({bulk.messages, bulk.expects_count, std::move(first.reply), std::move(first.solutions)});

  const int passes = second_pass ? 2 : 1;
  for (int pass = 0; pass < passes; ++pass) {
    std::vector<SolutionRecord> expanded;
    for (std::size_t i = 0; i < current.size(); ++i) {
      const RenderedPrompt prompt = render_critique_expansion(current[i]);
      auto ex = detail::ask(ctx, prompt, params);
      const int round = static_cast<int>(t.rounds.size());
      expanded.push_back(detail::make_record(t, round, i, ex.solutions.front(), ctx.timestamp()));
      t.rounds.push_back({prompt.messages, prompt.expects_count, std::move(ex.reply), std::move(ex.solutions)});
    }
    current = std::move(expanded);
  }
  t.solutions = std::move(current);
  if (persist_dir) persist_transcript(*persist_dir, t);
  return t;
}

// ---------------------------------------------------------------------------
// Sweeps

struct CellFailure {
  std::string cell;
  Errc code;
  std::string message;
};

struct SweepResult {
  std::vector<GenerationTranscript> transcripts;  // successful cells, canonical order
  std::vector<std::string> skipped;               // already complete on disk
  std::vector<CellFailure> failures;

  bool ok() const noexcept { return failures.empty(); }
};

/// Runs fn(i) for i in [0, n) with at most `max_in_flight` concurrent calls.
inline void bounded_parallel_for(std::size_t n, int max_in_flight, const std::function<void(std::size_t)>& fn) {
  const std::size_t workers = std::min<std::size_t>(n, static_cast<std::size_t>(std::max(1, max_in_flight)));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w)
    pool.emplace_back([&] {
      for (std::size_t i = next++; i < n; i = next++) fn(i);
    });
}

struct SweepOptions {
  std::optional<std::filesystem::path> out_dir;  // cells land in out_dir/<cell>/
  bool force = false;
  int max_in_flight = 4;
  std::uint64_t seed = 0;
  SamplingParams strategy_params{1.0, 1.0};
  std::optional<SamplingParams> critique_params;  // defaults to strategy_params
  bool critique_critique = false;
  int exemplar_count = 3;
};

namespace detail {

struct CellJob {
  std::string cell;
  std::function<GenerationTranscript(const std::optional<std::filesystem::path>&)> run;
};

inline SweepResult run_cells(const std::vector<CellJob>& jobs, const SweepOptions& opt) {
  std::vector<std::optional<GenerationTranscript>> done(jobs.size());
  std::vector<std::optional<CellFailure>> failed(jobs.size());
  std::vector<char> skipped(jobs.size(), 0);
  bounded_parallel_for(jobs.size(), opt.max_in_flight, [&](std::size_t i) {
    std::optional<std::filesystem::path> dir;
    if (opt.out_dir) dir = *opt.out_dir / jobs[i].cell;
    if (dir && !opt.force && cell_complete(*dir)) {
      skipped[i] = 1;
      return;
    }
    try {
      done[i] = jobs[i].run(dir);
    } catch (const Error& e) {
      failed[i] = CellFailure{jobs[i].cell, e.code(), e.what()};
    } catch (const std::exception& e) {
      failed[i] = CellFailure{jobs[i].cell, Errc::Io, e.what()};
    }
  });
  SweepResult out;
  for (std::size_t i = 0; i < jobs.size(); ++i) {
    if (done[i]) out.transcripts.push_back(std::move(*done[i]));
    if (failed[i]) out.failures.push_back(std::move(*failed[i]));
    if (skipped[i]) out.skipped.push_back(jobs[i].cell);
  }
  return out;
}

}  // namespace detail

/// Baseline prompting at every cell of `cells` (the eight-cell grid by default).
inline SweepResult run_parameter_sweep(const DesignProblem& problem, CampaignContext& ctx,
                                       const SweepOptions& opt = {},
                                       std::vector<SamplingParams> cells = parameter_grid()) {
  validate_sweep_params(cells);
  std::vector<detail::CellJob> jobs;
  for (const auto& p : cells) {
    const std::string cell = p.slug();
    const std::uint64_t seed = derive_seed(opt.seed, problem.id + "/" + cell);
    jobs.push_back({cell, [&, p, cell, seed](const std::optional<std::filesystem::path>& dir) {
                      return run_baseline_iterative(problem, PromptStrategy::of(StrategyKind::baseline), p, ctx,
                                                    {}, seed, cell, dir);
                    }});
  }
  return detail::run_cells(jobs, opt);
}

/// Draws `count` distinct exemplars from the human corpus.
inline std::vector<SolutionRecord> sample_exemplars(const SolutionSet& corpus, int count, std::uint64_t seed) {
  if (corpus.records.empty()) throw Error(Errc::MissingExemplars, "human corpus is empty");
  if (static_cast<std::size_t>(count) > corpus.size())
    throw Error(Errc::MissingExemplars, "corpus has fewer than " + std::to_string(count) + " records");
  const auto perm = seeded_permutation(corpus.size(), seed);
  std::vector<SolutionRecord> out;
  for (int i = 0; i < count; ++i) out.push_back(corpus.records[perm[static_cast<std::size_t>(i)]]);
  return out;
}

/// All eight prompting strategies at the fixed control parameters.
inline SweepResult run_strategy_sweep(const DesignProblem& problem, const std::optional<SolutionSet>& human_corpus,
                                      CampaignContext& ctx, const SweepOptions& opt = {}) {
  opt.strategy_params.validate();
  std::vector<detail::CellJob> jobs;
  for (auto kind : kAllStrategies) {
    const std::string cell = kind == StrategyKind::critique && opt.critique_critique ? "critique_critique"
                                                                                     : to_string(kind);
    const std::uint64_t seed = derive_seed(opt.seed, problem.id + "/" + cell);
    jobs.push_back({cell, [&, kind, cell, seed](const std::optional<std::filesystem::path>& dir) {
                      if (kind == StrategyKind::critique)
                        return run_critique(problem, opt.critique_params.value_or(opt.strategy_params), ctx,
                                            opt.critique_critique, seed, dir);
                      PromptStrategy strategy = PromptStrategy::of(kind);
                      std::vector<SolutionRecord> exemplars;
                      if (kind == StrategyKind::few_shot) {
                        if (!human_corpus)
                          throw Error(Errc::MissingExemplars, "no human corpus for " + problem.id);
                        strategy.exemplar_count = opt.exemplar_count;
                        exemplars = sample_exemplars(*human_corpus, opt.exemplar_count, seed);
                      }
                      return run_baseline_iterative(problem, strategy, opt.strategy_params, ctx, exemplars, seed,
                                                    cell, dir);
                    }});
  }
  return detail::run_cells(jobs, opt);
}

}  // namespace divbench
