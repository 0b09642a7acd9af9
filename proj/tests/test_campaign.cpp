#include <set>

#include "divbench/campaign.hpp"
#include "divbench/pipeline.hpp"
#include "support.hpp"

using namespace divbench;

namespace {

const DesignProblem& froth() { return find_problem("froth"); }

std::string fixed_time() { return "2024-01-01T00:00:00Z"; }

// Replies with a short list `short_replies` times, then defers to the mock.
class FlakyProvider final : public ChatProvider {
 public:
  explicit FlakyProvider(int short_replies) : short_(short_replies) {}
  std::string complete(const ChatRequest& r) override {
    if (short_-- > 0) return "1. only one\n2. and two";
    return mock_.complete(r);
  }
  std::string model() const override { return "flaky"; }

 private:
  int short_;
  MockChatProvider mock_{1};
};

// Fails hard after `budget` calls, like a dropped connection mid-cell.
class DyingProvider final : public ChatProvider {
 public:
  explicit DyingProvider(int budget) : budget_(budget) {}
  std::string complete(const ChatRequest& r) override {
    if (budget_-- <= 0) throw ProviderError(0, "connection reset");
    return mock_.complete(r);
  }
  std::string model() const override { return "dying"; }

 private:
  int budget_;
  MockChatProvider mock_{1};
};

}  // namespace

TEST(Baseline, TenRoundsOfFive) {
  MockChatProvider mock(1);
  CampaignContext ctx{mock, 2, fixed_time};
  const auto t = run_baseline_iterative(froth(), PromptStrategy::of(StrategyKind::baseline), {1, 1}, ctx);
  ASSERT_EQ(t.rounds.size(), 10u);
  ASSERT_EQ(t.solutions.size(), 50u);
  EXPECT_EQ(mock.calls(), 10u);
  for (std::size_t r = 0; r < t.rounds.size(); ++r) {
    EXPECT_EQ(t.rounds[r].solutions.size(), 5u);
    // Each follow-up carries the whole conversation so far.
    EXPECT_EQ(t.rounds[r].messages.size(), 2 * r + 1);
    if (r > 0) EXPECT_EQ(t.rounds[r].messages[2 * r - 1].content, t.rounds[r - 1].reply);
  }
  std::set<std::string> ids, texts;
  for (const auto& s : t.solutions) {
    EXPECT_NO_THROW(s.validate());
    EXPECT_EQ(s.source, Source::llm);
    ids.insert(s.id);
    texts.insert(s.text);
  }
  EXPECT_EQ(ids.size(), 50u);
  EXPECT_EQ(t.solutions[7].round, 1);
}

TEST(Baseline, RecoversFromShortReplies) {
  FlakyProvider flaky(2);
  CampaignContext ctx{flaky, 2, fixed_time};
  EXPECT_EQ(run_baseline_iterative(froth(), PromptStrategy::of(StrategyKind::baseline), {1, 1}, ctx).solutions.size(),
            50u);
  FlakyProvider hopeless(100);
  CampaignContext ctx2{hopeless, 2, fixed_time};
  EXPECT_ERRC(run_baseline_iterative(froth(), PromptStrategy::of(StrategyKind::baseline), {1, 1}, ctx2),
              Errc::ParseFailure);
}

TEST(Critique, FiftyExpandedSolutions) {
  MockChatProvider mock(2);
  CampaignContext ctx{mock, 2, fixed_time};
  const auto t = run_critique(froth(), {1, 1}, ctx);
  ASSERT_EQ(t.solutions.size(), 50u);
  ASSERT_EQ(t.rounds.size(), 51u);
  EXPECT_EQ(mock.calls(), 51u);
  const auto& originals = t.rounds[0].solutions;
  ASSERT_EQ(originals.size(), 50u);
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_GT(t.solutions[i].text.size(), originals[i].size());
    EXPECT_EQ(t.solutions[i].text.rfind(originals[i], 0), 0u);
    EXPECT_EQ(t.solutions[i].strategy, "critique");
  }
}

TEST(Critique, SecondPassExpandsTheExpansions) {
  MockChatProvider mock(2);
  CampaignContext ctx{mock, 2, fixed_time};
  const auto once = run_critique(froth(), {1, 1}, ctx);
  const auto twice = run_critique(froth(), {1, 1}, ctx, true);
  ASSERT_EQ(twice.rounds.size(), 101u);
  ASSERT_EQ(twice.solutions.size(), 50u);
  EXPECT_EQ(twice.cell, "critique_critique");
  for (std::size_t i = 0; i < 50; ++i) {
    EXPECT_EQ(twice.rounds[51 + i].messages[0].content.find(once.solutions[i].text) != std::string::npos, true);
    EXPECT_GT(twice.solutions[i].text.size(), once.solutions[i].text.size());
  }
}

TEST(ParameterSweep, EightCellsAndExcludedPair) {
  MockChatProvider mock(3);
  CampaignContext ctx{mock, 2, fixed_time};
  const auto res = run_parameter_sweep(froth(), ctx);
  ASSERT_TRUE(res.ok());
  ASSERT_EQ(res.transcripts.size(), 8u);
  std::vector<std::string> cells;
  for (const auto& t : res.transcripts) {
    cells.push_back(t.cell);
    EXPECT_EQ(t.solutions.size(), 50u);
  }
  EXPECT_EQ(cells, (std::vector<std::string>{"temp0_topp0", "temp0_topp0.5", "temp0_topp1", "temp1_topp0",
                                             "temp1_topp0.5", "temp1_topp1", "temp2_topp0", "temp2_topp0.5"}));
  EXPECT_ERRC(run_parameter_sweep(froth(), ctx, {}, {{2, 1}}), Errc::InvalidParams);
}

TEST(StrategySweep, MissingCorpusFailsOnlyFewShot) {
  MockChatProvider mock(4);
  CampaignContext ctx{mock, 2, fixed_time};
  const auto res = run_strategy_sweep(froth(), std::nullopt, ctx);
  ASSERT_EQ(res.failures.size(), 1u);
  EXPECT_EQ(res.failures[0].cell, "few_shot");
  EXPECT_EQ(res.failures[0].code, Errc::MissingExemplars);
  EXPECT_EQ(res.transcripts.size(), 7u);
}

TEST(StrategySweep, FewShotDrawsSeededExemplars) {
  const auto corpus = synthetic_human_corpus(froth(), 100, 9);
  MockChatProvider mock(4);
  CampaignContext ctx{mock, 2, fixed_time};
  SweepOptions opt;
  opt.seed = 77;
  const auto a = run_strategy_sweep(froth(), corpus, ctx, opt);
  const auto b = run_strategy_sweep(froth(), corpus, ctx, opt);
  ASSERT_TRUE(a.ok());
  ASSERT_EQ(a.transcripts.size(), 8u);
  const auto few = [](const SweepResult& r) {
    for (const auto& t : r.transcripts)
      if (t.cell == "few_shot") return t;
    throw std::runtime_error("no few_shot cell");
  };
  EXPECT_EQ(few(a).exemplar_ids.size(), 3u);
  EXPECT_EQ(few(a).exemplar_ids, few(b).exemplar_ids);
  EXPECT_EQ(sample_exemplars(corpus, 3, 5).front().id, sample_exemplars(corpus, 3, 5).front().id);
  EXPECT_ERRC(sample_exemplars(corpus, 101, 5), Errc::MissingExemplars);
}

TEST(Persistence, CompleteCellsAreSkipped) {
  TempDir dir;
  MockChatProvider mock(5);
  CampaignContext ctx{mock, 2, fixed_time};
  SweepOptions opt;
  opt.out_dir = dir.path();
  ASSERT_TRUE(run_parameter_sweep(froth(), ctx, opt).ok());
  const auto first_calls = mock.calls();
  EXPECT_EQ(first_calls, 80u);
  const auto before = slurp(dir / "temp1_topp1" / "solutions.jsonl");

  const auto again = run_parameter_sweep(froth(), ctx, opt);
  EXPECT_EQ(again.skipped.size(), 8u);
  EXPECT_TRUE(again.transcripts.empty());
  EXPECT_EQ(mock.calls(), first_calls);

  opt.force = true;
  EXPECT_EQ(run_parameter_sweep(froth(), ctx, opt).transcripts.size(), 8u);
  EXPECT_EQ(mock.calls(), 2 * first_calls);
  EXPECT_EQ(slurp(dir / "temp1_topp1" / "solutions.jsonl"), before);
}

TEST(Persistence, InterruptedCellLeavesNoMarker) {
  TempDir dir;
  DyingProvider dying(4);
  CampaignContext ctx{dying, 2, fixed_time};
  EXPECT_THROW(run_baseline_iterative(froth(), PromptStrategy::of(StrategyKind::baseline), {1, 1}, ctx, {}, 1,
                                      "temp1_topp1", dir / "temp1_topp1"),
               ProviderError);
  EXPECT_FALSE(cell_complete(dir / "temp1_topp1"));
}

TEST(Persistence, TranscriptReplays) {
  TempDir dir;
  MockChatProvider mock(6);
  CampaignContext ctx{mock, 2, fixed_time};
  run_critique(froth(), {1, 1}, ctx, false, 1, dir / "critique");
  EXPECT_TRUE(cell_complete(dir / "critique"));
  EXPECT_TRUE(replay_transcript(dir / "critique" / "transcript.jsonl").empty());
  EXPECT_EQ(read_solutions(dir / "critique" / "solutions.jsonl").size(), 50u);

  // Corrupt the stored solutions of the first round; replay must flag it.
  auto text = slurp(dir / "critique" / "transcript.jsonl");
  const auto at = text.find("\"solutions\":[\"") + 14;
  text.insert(at, "tampered ");
  write_file(dir / "critique" / "transcript.jsonl", text);
  EXPECT_EQ(replay_transcript(dir / "critique" / "transcript.jsonl"), (std::vector<std::size_t>{0}));
}

TEST(BoundedParallel, VisitsEachIndexOnce) {
  std::vector<std::atomic<int>> hits(37);
  bounded_parallel_for(hits.size(), 4, [&](std::size_t i) { ++hits[i]; });
  for (const auto& h : hits) EXPECT_EQ(h.load(), 1);
}
