#pragma once

// Subcommand orchestration over the on-disk run layout:
//
//   {output_dir}/{run_id}/manifest.json
//   {output_dir}/{run_id}/{topic}/{cell}/      solutions, transcript, embeddings
//   {output_dir}/{run_id}/{topic}/scores_{sweep}.json
//   {output_dir}/{run_id}/{topic}/classifier.json
//   {output_dir}/{run_id}/tables/              CSV, JSON and SVG outputs
//
// Every stage reads only what earlier stages persisted, so each can be rerun
// alone, and --verify can rebuild an emitted table and diff it against disk.

#include <atomic>
#include <cctype>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <memory>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "divbench/campaign.hpp"
#include "divbench/config.hpp"
#include "divbench/corpus.hpp"
#include "divbench/embedding.hpp"
#include "divbench/error.hpp"
#include "divbench/pca.hpp"
#include "divbench/promptkit.hpp"
#include "divbench/provider.hpp"
#include "divbench/report.hpp"
#include "divbench/scorecard.hpp"
#include "divbench/separability.hpp"

namespace divbench {

struct PipelineOptions {
  bool mock = false;
  bool force = false;
  bool verify = false;
  std::optional<std::uint64_t> seed;
  std::optional<std::filesystem::path> out;
  std::ostream* log = &std::cerr;
  std::function<std::string()> timestamp = utc_now_rfc3339;
  /// Replaces the configured provider (tests inject failures through this).
  ChatProvider* provider = nullptr;
};

struct StageResult {
  std::string stage;
  std::size_t errors = 0;
  std::vector<std::string> messages;  // one per cell-level error
  std::vector<std::string> diffs;     // --verify mismatches
  std::size_t provider_calls = 0;
  std::size_t cells_done = 0;
  std::size_t cells_skipped = 0;

  void fail(const std::string& what) {
    ++errors;
    messages.push_back(what);
  }
  void merge(const StageResult& o) {
    errors += o.errors;
    messages.insert(messages.end(), o.messages.begin(), o.messages.end());
    diffs.insert(diffs.end(), o.diffs.begin(), o.diffs.end());
    provider_calls += o.provider_calls;
    cells_done += o.cells_done;
    cells_skipped += o.cells_skipped;
  }
  int exit_code() const { return errors == 0 && diffs.empty() ? 0 : 1; }
};

/// The configuration after command-line overrides.
inline RunConfig effective_config(RunConfig c, const PipelineOptions& opt) {
  if (opt.seed) c.seed = *opt.seed;
  if (opt.out) c.output_dir = *opt.out;
  return c;
}

// ------------------------------------------------------------------ layout

struct SetRef {
  std::string dir;    // directory under the topic
  std::string label;  // column label
};

struct SweepSpec {
  std::string name;  // "params" or "strategies"
  std::vector<SetRef> cells;
};

inline std::string slugify(const std::string& label) {
  std::string out;
  for (unsigned char c : label) out += std::isalnum(c) ? static_cast<char>(std::tolower(c)) : '_';
  return out;
}

inline std::vector<SweepSpec> sweep_specs(const RunConfig& c) {
  std::vector<SweepSpec> out;
  if (c.wants_params()) {
    SweepSpec s{"params", {}};
    for (const auto& p : parameter_grid()) s.cells.push_back({p.slug(), p.label()});
    out.push_back(std::move(s));
  }
  if (c.wants_strategies()) {
    SweepSpec s{"strategies", {}};
    for (auto kind : kAllStrategies) {
      if (kind == StrategyKind::critique && c.critique_critique)
        s.cells.push_back({"critique_critique", "Critique-Critique"});
      else
        s.cells.push_back({to_string(kind), display_label(kind)});
    }
    out.push_back(std::move(s));
  }
  return out;
}

/// The two human halves, e.g. "Human 50 v1" and "Human 50 v2".
inline std::vector<SetRef> human_sets(const RunConfig& c) {
  const std::string base = "Human " + std::to_string(c.human_corpus_size);
  std::vector<SetRef> out;
  for (int v = 1; v <= 2; ++v) {
    const auto label = detail::half_label(base, static_cast<std::size_t>(c.human_corpus_size / 2), v);
    out.push_back({slugify(label), label});
  }
  return out;
}

inline std::filesystem::path topic_dir(const RunConfig& c, const std::string& topic) { return c.run_dir() / topic; }
inline std::filesystem::path tables_dir(const RunConfig& c) { return c.run_dir() / "tables"; }

inline std::string read_text(const std::filesystem::path& p) {
  std::ifstream in(p, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, p.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

inline void write_text(const std::filesystem::path& p, const std::string& s) {
  if (p.has_parent_path()) std::filesystem::create_directories(p.parent_path());
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + p.string());
  out << s;
}

inline nlohmann::json read_json(const std::filesystem::path& p) {
  try {
    return nlohmann::json::parse(read_text(p));
  } catch (const nlohmann::json::parse_error& e) {
    throw Error(Errc::MalformedRecord, p.string() + ": " + e.what());
  }
}

/// Counts llm records across every persisted cell of a run.
inline std::size_t count_llm_solutions(const RunConfig& c) {
  std::size_t n = 0;
  for (const auto& topic : c.topics)
    for (const auto& spec : sweep_specs(c))
      for (const auto& cell : spec.cells) {
        const auto file = topic_dir(c, topic) / cell.dir / "solutions.jsonl";
        if (!std::filesystem::exists(file)) continue;
        for (const auto& r : read_solutions(file)) n += r.source == Source::llm;
      }
  return n;
}

// ---------------------------------------------------------------- manifest

inline nlohmann::ordered_json manifest_json(const RunConfig& c, bool mock) {
  nlohmann::ordered_json j;
  j["run_id"] = c.run_id;
  j["config_hash"] = config_hash(c);
  j["mock_provider"] = mock;
  j["seeds"] = {{"master", c.seed},
                {"generate", c.seed_for("generate")},
                {"mock", c.seed_for("mock")},
                {"halves", c.seed_for("halves")},
                {"split", c.seed_for("split")},
                {"synthetic_human", c.seed_for("synthetic_human")}};
  j["assumptions"] = {
      {"embedding_model", "384-dim sentence encoder of the MiniLM family; the checkpoint is unspecified, "
                          "so comparisons are only valid within one model_tag"},
      {"embedding_model_tag", c.embedding.model_tag}};
  j["config"] = to_json(c);
  return j;
}

inline void write_manifest(const RunConfig& c, bool mock) {
  write_text(c.run_dir() / "manifest.json", manifest_json(c, mock).dump(2) + "\n");
}

/// Writes `content` to `path`, or under --verify compares instead of writing.
class Emitter {
 public:
  Emitter(bool verify, StageResult& res) : verify_(verify), res_(res) {}

  void operator()(const std::filesystem::path& path, const std::string& content) {
    if (!verify_) {
      write_text(path, content);
      return;
    }
    if (!std::filesystem::exists(path)) {
      res_.diffs.push_back(path.string() + ": missing");
      return;
    }
    const auto disk = read_text(path);
    if (disk == content) return;
    std::istringstream a(disk), b(content);
    std::string la, lb;
    std::size_t line = 0;
    while (true) {
      ++line;
      const bool ga = static_cast<bool>(std::getline(a, la));
      const bool gb = static_cast<bool>(std::getline(b, lb));
      if (!ga && !gb) break;
      if (!ga || !gb || la != lb) {
        res_.diffs.push_back(path.string() + ":" + std::to_string(line) + ": on disk '" + (ga ? la : "<eof>") +
                             "', recomputed '" + (gb ? lb : "<eof>") + "'");
        return;
      }
    }
    res_.diffs.push_back(path.string() + ": differs");
  }

 private:
  bool verify_;
  StageResult& res_;
};

// ------------------------------------------------------------ human corpus

/// Deterministic stand-in for a crowdsourced corpus, used only when the
/// configuration asks for synthetic human data.
inline SolutionSet synthetic_human_corpus(const DesignProblem& problem, int count, std::uint64_t seed) {
  static const char* const forms[] = {"frame", "pouch", "lever", "spring", "sleeve", "clip", "crank",
                                      "tray", "strap", "dial", "funnel", "hinge", "roller", "hook"};
  static const char* const materials[] = {"bamboo", "silicone", "scrap wood", "recycled plastic", "aluminium",
                                          "cardboard", "canvas", "rubber bands", "glass", "steel wire"};
  static const char* const actions[] = {"folds flat", "clips onto a table", "runs on a hand crank",
                                        "uses gravity", "stores in a drawer", "needs no electricity",
                                        "attaches to a bicycle", "works with one hand", "packs into a bag"};
  static const char* const extras[] = {"with a timer", "for children", "for shared kitchens", "with a dial",
                                       "for travel", "for small flats", "with a counterweight", "for rentals"};
  SolutionSet set{"Human " + std::to_string(count), problem.id, {}};
  std::mt19937_64 rng(seed);
  std::set<std::string> seen;
  while (static_cast<int>(set.size()) < count) {
    const auto pick = [&](const auto& arr) { return arr[uniform_below(rng, std::size(arr))]; };
    std::string text = std::string("A ") + pick(materials) + " " + pick(forms) + " that " + pick(actions) + " " +
                       pick(extras) + ", aimed at " + problem.prompt_phrase();
    if (!seen.insert(text).second) continue;
    SolutionRecord r;
    r.id = problem.id + "-h" + std::to_string(set.size() + 1);
    r.topic = problem.id;
    r.source = Source::human;
    r.strategy = "crowdsourced";
    r.text = std::move(text);
    r.created_at = "2023-01-01T00:00:00Z";
    set.records.push_back(std::move(r));
  }
  return set;
}

inline SolutionSet obtain_human_corpus(const RunConfig& c, const std::string& topic) {
  if (auto it = c.human_corpus.find(topic); it != c.human_corpus.end()) return load_human_corpus(it->second, topic);
  if (c.synthetic_human)
    return synthetic_human_corpus(find_problem(topic), c.human_corpus_size,
                                  derive_seed(c.seed_for("synthetic_human"), topic));
  throw Error(Errc::MissingFile, "no human corpus configured for '" + topic + "'");
}

inline void persist_human_set(const std::filesystem::path& dir, const SolutionSet& set) {
  write_solutions(dir / "solutions.jsonl", set.records);
  nlohmann::ordered_json cell;
  cell["topic"] = set.topic;
  cell["cell"] = dir.filename().string();
  cell["label"] = set.label;
  cell["solutions"] = set.size();
  cell["complete"] = true;
  write_text(dir / "cell.json", cell.dump(2) + "\n");
}

// --------------------------------------------------------------- generate

namespace detail {

class CountingProvider final : public ChatProvider {
 public:
  explicit CountingProvider(ChatProvider& inner) : inner_(inner) {}
  std::string complete(const ChatRequest& r) override {
    ++calls_;
    return inner_.complete(r);
  }
  std::string model() const override { return inner_.model(); }
  std::size_t calls() const { return calls_.load(); }

 private:
  ChatProvider& inner_;
  std::atomic<std::size_t> calls_{0};
};

inline void tally(StageResult& res, const std::string& topic, const SweepResult& s) {
  res.cells_done += s.transcripts.size();
  res.cells_skipped += s.skipped.size();
  for (const auto& f : s.failures) res.fail(topic + "/" + f.cell + ": " + f.message);
}

}  // namespace detail

/// Generates every selected cell. Complete cells on disk are skipped unless
/// --force; under --verify nothing is generated and every persisted
/// transcript is re-parsed instead.
inline StageResult cmd_generate(const RunConfig& config, const PipelineOptions& opt) {
  const RunConfig c = effective_config(config, opt);
  StageResult res{"generate"};
  if (opt.verify) {
    for (const auto& topic : c.topics)
      for (const auto& spec : sweep_specs(c))
        for (const auto& cell : spec.cells) {
          const auto file = topic_dir(c, topic) / cell.dir / "transcript.jsonl";
          if (!std::filesystem::exists(file)) {
            res.diffs.push_back(file.string() + ": missing");
            continue;
          }
          for (auto round : replay_transcript(file))
            res.diffs.push_back(file.string() + ": round " + std::to_string(round) + " does not re-parse");
        }
    return res;
  }

  // Provider first: a missing API key must fail before any work happens.
  std::unique_ptr<ChatProvider> base;
  std::unique_ptr<ReliableChatProvider> reliable;
  SystemClock clock;
  ChatProvider* provider = opt.provider;
  if (!provider) {
    if (opt.mock) {
      base = std::make_unique<MockChatProvider>(c.seed_for("mock"));
      provider = base.get();
    } else {
      base = std::make_unique<HttpChatProvider>(c.provider, c.provider.resolve_api_key());
      reliable = std::make_unique<ReliableChatProvider>(*base, c.provider.max_retries,
                                                        c.provider.requests_per_minute, clock, c.seed_for("jitter"));
      provider = reliable.get();
    }
  }
  detail::CountingProvider counting(*provider);
  CampaignContext ctx{counting};
  ctx.timestamp = opt.timestamp;

  std::filesystem::create_directories(c.run_dir());
  write_manifest(c, opt.mock);

  for (const auto& topic : c.topics) {
    const auto& problem = find_problem(topic);
    const auto dir = topic_dir(c, topic);

    std::optional<SolutionSet> corpus;
    try {
      corpus = obtain_human_corpus(c, topic);
      const auto halves = human_sets(c);
      if (opt.force || !cell_complete(dir / halves[0].dir, corpus->size() / 2) ||
          !cell_complete(dir / halves[1].dir, corpus->size() / 2)) {
        auto [v1, v2] = split_halves(*corpus, derive_seed(c.seed_for("halves"), topic));
        persist_human_set(dir / halves[0].dir, v1);
        persist_human_set(dir / halves[1].dir, v2);
      }
    } catch (const Error& e) {
      res.fail(topic + "/human: " + e.what());
    }

    SweepOptions so;
    so.out_dir = dir;
    so.force = opt.force;
    so.max_in_flight = c.provider.max_in_flight;
    so.seed = c.seed_for("generate");
    so.strategy_params = c.strategy_params;
    so.critique_params = c.critique_params;
    so.critique_critique = c.critique_critique;
    so.exemplar_count = c.exemplar_count;
    if (c.wants_params()) detail::tally(res, topic, run_parameter_sweep(problem, ctx, so));
    if (c.wants_strategies()) detail::tally(res, topic, run_strategy_sweep(problem, corpus, ctx, so));
    if (opt.log)
      *opt.log << "[generate] " << topic << ": " << res.cells_done << " generated, " << res.cells_skipped
               << " skipped, " << res.errors << " errors so far\n";
  }
  res.provider_calls = counting.calls();
  return res;
}

// ------------------------------------------------------------------ embed

inline StageResult cmd_embed(const RunConfig& config, const PipelineOptions& opt) {
  const RunConfig c = effective_config(config, opt);
  StageResult res{"embed"};
  if (opt.verify) return res;  // embeddings are inputs, not emitted tables
  for (const auto& topic : c.topics) {
    std::vector<SetRef> sets = human_sets(c);
    for (const auto& spec : sweep_specs(c)) sets.insert(sets.end(), spec.cells.begin(), spec.cells.end());
    for (const auto& s : sets) {
      const auto dir = topic_dir(c, topic) / s.dir;
      const auto out = dir / "embeddings.jsonl";
      if (!opt.force && std::filesystem::exists(out)) {
        ++res.cells_skipped;
        continue;
      }
      try {
        if (!std::filesystem::exists(dir / "solutions.jsonl"))
          throw Error(Errc::MissingCell, topic + "/" + s.label);
        SolutionSet set{s.label, topic, read_solutions(dir / "solutions.jsonl")};
        write_embeddings(out, embed_set(set, c.embedding));
        ++res.cells_done;
      } catch (const Error& e) {
        res.fail(topic + "/" + s.dir + ": " + e.what());
      }
    }
  }
  if (opt.log) *opt.log << "[embed] " << res.cells_done << " embedded, " << res.cells_skipped << " skipped\n";
  return res;
}

// ------------------------------------------------------------------ score

inline EmbeddingMatrix load_cell_embeddings(const RunConfig& c, const std::string& topic, const SetRef& s) {
  const auto file = topic_dir(c, topic) / s.dir / "embeddings.jsonl";
  if (!std::filesystem::exists(file)) throw Error(Errc::MissingCell, topic + "/" + s.label);
  auto m = read_embeddings(file);
  if (m.dim() != c.embedding.dim)
    throw Error(Errc::DimensionMismatch, file.string() + " has dim " + std::to_string(m.dim()) + ", config says " +
                                             std::to_string(c.embedding.dim));
  return m;
}

inline std::vector<SetRef> heatmap_columns(const RunConfig& c, const SweepSpec& spec) {
  auto cols = spec.cells;
  const auto humans = human_sets(c);
  cols.insert(cols.end(), humans.begin(), humans.end());
  return cols;
}

inline std::vector<std::string> labels_of(const std::vector<SetRef>& sets) {
  std::vector<std::string> out;
  for (const auto& s : sets) out.push_back(s.label);
  return out;
}

inline std::filesystem::path scores_file(const RunConfig& c, const std::string& topic, const std::string& sweep) {
  return topic_dir(c, topic) / ("scores_" + sweep + ".json");
}

/// Loads every persisted scorecard of one sweep. Missing files are skipped;
/// the affected table cells then report MissingCell.
inline ScorecardIndex load_scorecards(const RunConfig& c, const std::string& sweep) {
  ScorecardIndex idx;
  for (const auto& topic : c.topics) {
    const auto file = scores_file(c, topic, sweep);
    if (!std::filesystem::exists(file)) continue;
    const auto j = read_json(file);
    for (const auto& card : j.at("cards")) {
      auto sc = scorecard_from_json(card);
      idx[{sc.topic, sc.set_label}] = std::move(sc);
    }
  }
  return idx;
}

namespace detail {

inline void emit_heatmaps(const RunConfig& c, const SweepSpec& spec, const ScorecardIndex& cards, Emitter& emit,
                          bool svg, std::set<std::string>* failing) {
  const auto cols = labels_of(heatmap_columns(c, spec));
  for (auto m : kAllMetrics) {
    const auto table = build_heatmap(cards, m, spec.name, c.topics, cols, c.baseline_label);
    if (failing)
      for (const auto& row : table.cells)
        for (const auto& cell : row)
          if (!cell.ok()) failing->insert(cell.topic + "/" + cell.label + ": " + cell.error);
    const auto stem = tables_dir(c) / (spec.name + "_" + to_string(m));
    emit(stem.string() + ".csv", heatmap_csv(table));
    emit(stem.string() + ".json", to_json(table).dump(2) + "\n");
    if (svg) emit(stem.string() + ".svg", heatmap_svg(table));
  }
}

}  // namespace detail

/// Scores every set of every selected sweep and emits the four heatmaps per
/// sweep. PCA bases are fitted per topic on the pooled sets of the sweep.
inline StageResult cmd_score(const RunConfig& config, const PipelineOptions& opt) {
  const RunConfig c = effective_config(config, opt);
  StageResult res{"score"};
  Emitter emit(opt.verify, res);
  for (const auto& spec : sweep_specs(c)) {
    if (!opt.verify) {
      for (const auto& topic : c.topics) {
        try {
          const auto cols = heatmap_columns(c, spec);
          std::vector<EmbeddingMatrix> sets;
          for (const auto& s : cols) sets.push_back(load_cell_embeddings(c, topic, s));
          std::vector<const EmbeddingMatrix*> parts;
          for (const auto& m : sets) parts.push_back(&m);
          const auto pooled = concat(parts);
          const auto basis_hull = pca_fit(pooled, c.k_hull, topic + "/" + spec.name);
          const auto basis_centroid = pca_fit(pooled, c.k_centroid, topic + "/" + spec.name);
          ScorecardOptions so;
          so.hull.facet_budget = c.facet_budget;

          nlohmann::ordered_json j;
          j["topic"] = topic;
          j["sweep"] = spec.name;
          j["pooled_rows"] = pooled.size();
          j["pca"] = {{"k_hull", c.k_hull},
                      {"k_centroid", c.k_centroid},
                      {"hull_explained_variance_ratio", basis_hull.explained_variance_ratio().sum()},
                      {"centroid_explained_variance_ratio", basis_centroid.explained_variance_ratio().sum()}};
          j["cards"] = nlohmann::ordered_json::array();
          for (std::size_t i = 0; i < cols.size(); ++i) {
            const auto card = scorecard(cols[i].label, topic, sets[i], basis_hull, basis_centroid, so);
            for (auto m : kAllMetrics)
              if (card.get(m).degenerate && opt.log)
                *opt.log << "[score] " << topic << "/" << cols[i].label << " " << to_string(m)
                         << " degenerate: " << card.get(m).note << "\n";
            j["cards"].push_back(to_json(card));
          }
          write_text(scores_file(c, topic, spec.name), j.dump(2) + "\n");
          res.cells_done += cols.size();
        } catch (const Error& e) {
          res.fail(topic + "/" + spec.name + ": " + e.what());
          std::filesystem::remove(scores_file(c, topic, spec.name));
        }
      }
    }
    const auto cards = load_scorecards(c, spec.name);
    std::set<std::string> failing;
    detail::emit_heatmaps(c, spec, cards, emit, false, opt.verify ? nullptr : &failing);
    // Topics that failed above already count once; add cell-level failures of
    // topics that did score (e.g. a zero baseline).
    for (const auto& f : failing) {
      const auto topic = f.substr(0, f.find('/'));
      if (std::filesystem::exists(scores_file(c, topic, spec.name))) res.fail(f);
    }
  }
  if (opt.log) *opt.log << "[score] " << res.cells_done << " sets scored, " << res.errors << " errors\n";
  return res;
}

// -------------------------------------------------------------- correlate

inline StageResult cmd_correlate(const RunConfig& config, const PipelineOptions& opt) {
  const RunConfig c = effective_config(config, opt);
  StageResult res{"correlate"};
  Emitter emit(opt.verify, res);
  for (const auto& spec : sweep_specs(c)) {
    const auto cards = load_scorecards(c, spec.name);
    const auto table = build_correlations(cards, spec.name, c.topics, labels_of(spec.cells));
    if (!opt.verify)
      for (std::size_t p = 0; p < table.pairs.size(); ++p)
        for (std::size_t k = 0; k < c.topics.size(); ++k)
          if (!table.entries[p][k].ok())
            res.fail(spec.name + "/" + c.topics[k] + "/" + pair_label(table.pairs[p]) + ": " +
                     table.entries[p][k].error);
    const auto stem = tables_dir(c) / ("spearman_" + spec.name);
    emit(stem.string() + ".csv", correlation_csv(table));
    emit(stem.string() + ".json", to_json(table).dump(2) + "\n");
  }
  return res;
}

// --------------------------------------------------------------- classify

/// Labelled rows for one topic: every strategy-sweep cell (llm) plus both
/// human halves.
inline LabeledDataset classification_dataset(const RunConfig& c, const std::string& topic) {
  std::vector<EmbeddingMatrix> parts;
  std::vector<char> labels;
  for (const auto& spec : sweep_specs(c)) {
    if (spec.name != "strategies") continue;
    for (const auto& s : spec.cells) {
      parts.push_back(load_cell_embeddings(c, topic, s));
      labels.insert(labels.end(), static_cast<std::size_t>(parts.back().size()), 1);
    }
  }
  if (parts.empty()) throw Error(Errc::ClassTooSmall, topic + ": no strategy-sweep solutions selected");
  for (const auto& s : human_sets(c)) {
    parts.push_back(load_cell_embeddings(c, topic, s));
    labels.insert(labels.end(), static_cast<std::size_t>(parts.back().size()), 0);
  }
  std::vector<const EmbeddingMatrix*> ptrs;
  for (const auto& p : parts) ptrs.push_back(&p);
  LabeledDataset ds;
  ds.rows = concat(ptrs).rows;
  ds.labels = std::move(labels);
  ds.topic = topic;
  return ds;
}

inline std::filesystem::path classifier_file(const RunConfig& c, const std::string& topic) {
  return topic_dir(c, topic) / "classifier.json";
}

inline std::vector<ClassifierReport> load_reports(const RunConfig& c) {
  std::vector<ClassifierReport> out;
  for (const auto& topic : c.topics)
    if (std::filesystem::exists(classifier_file(c, topic)))
      out.push_back(report_from_json(read_json(classifier_file(c, topic))));
  return out;
}

inline StageResult cmd_classify(const RunConfig& config, const PipelineOptions& opt) {
  const RunConfig c = effective_config(config, opt);
  StageResult res{"classify"};
  Emitter emit(opt.verify, res);
  if (!opt.verify) {
    for (const auto& topic : c.topics) {
      try {
        const auto ds = classification_dataset(c, topic);
        const auto seed = derive_seed(c.seed_for("split"), topic);
        const auto split = split_train_test(ds, 1.0 - c.test_fraction, seed);
        LogisticOptions lo;
        lo.l2_strength = c.l2;
        lo.standardize = c.standardize;
        const auto model = train_logistic(split.train, lo);
        const auto report = evaluate(model, split.test);
        write_text(classifier_file(c, topic), to_json(report).dump(2) + "\n");
        ++res.cells_done;
        if (opt.log)
          *opt.log << "[classify] " << topic << ": accuracy " << fixed(report.accuracy(), 2) << ", human recall "
                   << fixed(report.human.recall, 2) << (report.low_signal ? " (low signal)" : "")
                   << (model.converged ? "" : " (not converged)") << "\n";
      } catch (const Error& e) {
        res.fail(topic + "/classify: " + e.what());
        std::filesystem::remove(classifier_file(c, topic));
      }
    }
  }
  emit(tables_dir(c) / "classifier.csv", classifier_csv(load_reports(c)));
  return res;
}

// ----------------------------------------------------------------- report

/// Re-emits every table (heatmaps with SVG, correlations, classifier summary)
/// from persisted scorecards and reports. Under --verify, diffs instead.
inline StageResult cmd_report(const RunConfig& config, const PipelineOptions& opt) {
  const RunConfig c = effective_config(config, opt);
  StageResult res{"report"};
  Emitter emit(opt.verify, res);
  for (const auto& spec : sweep_specs(c)) {
    const auto cards = load_scorecards(c, spec.name);
    detail::emit_heatmaps(c, spec, cards, emit, true, nullptr);
    const auto corr = build_correlations(cards, spec.name, c.topics, labels_of(spec.cells));
    const auto stem = tables_dir(c) / ("spearman_" + spec.name);
    emit(stem.string() + ".csv", correlation_csv(corr));
    emit(stem.string() + ".json", to_json(corr).dump(2) + "\n");
  }
  const auto reports = load_reports(c);
  if (!reports.empty() || std::filesystem::exists(tables_dir(c) / "classifier.csv"))
    emit(tables_dir(c) / "classifier.csv", classifier_csv(reports));
  if (opt.verify) {
    const auto manifest = c.run_dir() / "manifest.json";
    if (!std::filesystem::exists(manifest))
      res.diffs.push_back(manifest.string() + ": missing");
    else if (read_json(manifest).value("config_hash", std::string{}) != config_hash(c))
      res.diffs.push_back(manifest.string() + ": config hash differs from the current configuration");
  }
  return res;
}

}  // namespace divbench
