#include <set>

#include "divbench/corpus.hpp"
#include "support.hpp"

using namespace divbench;

namespace {

SolutionRecord human(const std::string& topic, int i, std::string text = "") {
  SolutionRecord r;
  r.id = topic + "-h" + std::to_string(i);
  r.topic = topic;
  r.source = Source::human;
  r.strategy = "crowdsourced";
  r.text = text.empty() ? "solution number " + std::to_string(i) : text;
  r.created_at = "2023-01-01T00:00:00Z";
  return r;
}

SolutionSet human_set(int n, const std::string& topic = "froth") {
  SolutionSet s{"Human " + std::to_string(n), topic, {}};
  for (int i = 0; i < n; ++i) s.records.push_back(human(topic, i));
  return s;
}

std::set<std::string> ids(const SolutionSet& s) {
  std::set<std::string> out;
  for (const auto& r : s.records) out.insert(r.id);
  return out;
}

}  // namespace

TEST(Problems, BuiltinsMatchTheHistoricalTable) {
  const auto& p = builtin_problems();
  ASSERT_EQ(p.size(), 5u);
  EXPECT_EQ(p[0].statement, "A lightweight exercise device that can be used while traveling");
  EXPECT_EQ(p[1].statement, "A device that disperses a light coating of powdered substance over a surface");
  EXPECT_EQ(p[2].statement, "A new way to measure the passage of time");
  EXPECT_EQ(p[3].statement, "An innovative product to froth milk");
  EXPECT_EQ(p[4].statement, "A device to fold washcloths, hand towels, and small bath towels");
  EXPECT_EQ(find_problem("froth").statement, p[3].statement);
  std::set<std::string> slugs;
  for (const auto& x : p) slugs.insert(x.id);
  EXPECT_EQ(slugs.size(), 5u);
  EXPECT_THROW(find_problem("kettle"), Error);
}

TEST(SamplingParams, LabelsAndRanges) {
  EXPECT_EQ((SamplingParams{1.0, 0.5}).label(), "Temp 1 / TopP 0.5");
  EXPECT_EQ((SamplingParams{0.0, 1.0}).slug(), "temp0_topp1");
  EXPECT_THROW((SamplingParams{2.5, 0.5}).validate(), Error);
  EXPECT_THROW((SamplingParams{1.0, -0.1}).validate(), Error);
  EXPECT_NO_THROW((SamplingParams{2.0, 1.0}).validate());  // legal pair; only sweeps reject it
}

TEST(SolutionRecord, Invariants) {
  auto r = human("froth", 1);
  EXPECT_NO_THROW(r.validate());
  r.text = "  \t ";
  EXPECT_ERRC(r.validate(), Errc::MalformedRecord);
  r = human("froth", 1);
  r.params = SamplingParams{1, 1};
  EXPECT_ERRC(r.validate(), Errc::MalformedRecord);
  r = human("froth", 1);
  r.round = 2;
  EXPECT_ERRC(r.validate(), Errc::MalformedRecord);
}

TEST(LoadHumanCorpus, HundredRecords) {
  TempDir dir;
  std::vector<SolutionRecord> recs;
  for (int i = 0; i < 100; ++i) recs.push_back(human("froth", i));
  write_solutions(dir / "froth.jsonl", recs);
  const auto set = load_human_corpus(dir / "froth.jsonl", "froth");
  EXPECT_EQ(set.size(), 100u);
  EXPECT_EQ(set.label, "Human 100");
  EXPECT_EQ(set.records.front().id, "froth-h0");
  EXPECT_EQ(set.records.back().id, "froth-h99");
}

TEST(LoadHumanCorpus, Errors) {
  TempDir dir;
  EXPECT_ERRC(load_human_corpus(dir / "absent.jsonl", "froth"), Errc::MissingFile);

  write_file(dir / "empty.jsonl", "");
  EXPECT_ERRC(load_human_corpus(dir / "empty.jsonl", "froth"), Errc::EmptyCorpus);

  write_file(dir / "blank.jsonl", "{\"topic\":\"froth\",\"text\":\"\"}\n");
  try {
    load_human_corpus(dir / "blank.jsonl", "froth");
    FAIL();
  } catch (const MalformedRecordError& e) {
    EXPECT_EQ(e.line(), 1u);
  }

  write_file(dir / "garbage.jsonl", "{\"topic\":\"froth\",\"text\":\"ok\"}\nnot json\n");
  try {
    load_human_corpus(dir / "garbage.jsonl", "froth");
    FAIL();
  } catch (const MalformedRecordError& e) {
    EXPECT_EQ(e.line(), 2u);
  }

  write_file(dir / "other.jsonl", "{\"topic\":\"time\",\"text\":\"a sundial\"}\n");
  EXPECT_ERRC(load_human_corpus(dir / "other.jsonl", "froth"), Errc::TopicMismatch);
}

TEST(LoadHumanCorpus, MinimalRecordsNeedOnlyTopicAndText) {
  TempDir dir;
  write_file(dir / "min.jsonl", "{\"topic\":\"froth\",\"text\":\"a whisk\"}\r\n\n{\"topic\":\"froth\",\"text\":\"a pump\"}\n");
  const auto set = load_human_corpus(dir / "min.jsonl", "froth");
  ASSERT_EQ(set.size(), 2u);
  EXPECT_EQ(set.records[0].source, Source::human);
  EXPECT_EQ(set.records[0].strategy, "crowdsourced");
  EXPECT_NE(set.records[0].id, set.records[1].id);
}

TEST(LoadHumanCorpus, DuplicateTextsAreKept) {
  TempDir dir;
  write_solutions(dir / "dup.jsonl", {human("froth", 1, "same"), human("froth", 2, "same")});
  EXPECT_EQ(load_human_corpus(dir / "dup.jsonl", "froth").size(), 2u);
}

TEST(Interchange, RoundTripIsByteIdentical) {
  TempDir dir;
  std::vector<SolutionRecord> recs{human("froth", 1, "Ünïcode — text \"quoted\"")};
  SolutionRecord llm;
  llm.id = "froth-temp1_topp1-r3-2";
  llm.topic = "froth";
  llm.source = Source::llm;
  llm.strategy = "baseline";
  llm.params = SamplingParams{1.0, 0.5};
  llm.round = 3;
  llm.text = "A frother";
  llm.created_at = "2024-05-01T12:00:00Z";
  recs.push_back(llm);
  write_solutions(dir / "a.jsonl", recs);
  write_solutions(dir / "b.jsonl", read_solutions(dir / "a.jsonl"));
  EXPECT_EQ(slurp(dir / "a.jsonl"), slurp(dir / "b.jsonl"));
  const auto back = read_solutions(dir / "a.jsonl");
  ASSERT_TRUE(back[1].params.has_value());
  EXPECT_EQ(back[1].params->top_p, 0.5);
  EXPECT_EQ(back[1].round, 3);
  EXPECT_NE(slurp(dir / "a.jsonl").find("\"params\":null"), std::string::npos);
}

TEST(SplitHalves, StableOrderWithoutSeed) {
  const auto set = human_set(100);
  const auto [v1, v2] = split_halves(set, std::nullopt);
  EXPECT_EQ(v1.label, "Human 50 v1");
  EXPECT_EQ(v2.label, "Human 50 v2");
  ASSERT_EQ(v1.size(), 50u);
  ASSERT_EQ(v2.size(), 50u);
  for (int i = 0; i < 50; ++i) {
    EXPECT_EQ(v1.records[i].id, set.records[i].id);
    EXPECT_EQ(v2.records[i].id, set.records[50 + i].id);
  }
}

TEST(SplitHalves, SmallestEvenCase) {
  const auto set = human_set(2);
  const auto [v1, v2] = split_halves(set, std::nullopt);
  EXPECT_EQ(v1.size(), 1u);
  EXPECT_EQ(v2.size(), 1u);
  auto all = ids(v1);
  all.merge(ids(v2));
  EXPECT_EQ(all, ids(set));
}

TEST(SplitHalves, SeededIsDeterministicPartition) {
  const auto set = human_set(100);
  const auto a = split_halves(set, 7);
  const auto b = split_halves(set, 7);
  EXPECT_EQ(ids(a.first), ids(b.first));
  EXPECT_EQ(ids(a.second), ids(b.second));
  for (const auto& id : ids(a.first)) EXPECT_EQ(ids(a.second).count(id), 0u);
  auto all = ids(a.first);
  all.merge(ids(a.second));
  EXPECT_EQ(all, ids(set));
  EXPECT_NE(ids(a.first), ids(split_halves(set, std::nullopt).first));
}

TEST(SplitHalves, OddOrTooSmall) {
  EXPECT_ERRC(split_halves(human_set(99), std::nullopt), Errc::OddCardinality);
  EXPECT_ERRC(split_halves(human_set(0), std::nullopt), Errc::OddCardinality);
}

TEST(SolutionSet, RejectsMixedTopicsAndDuplicateIds) {
  auto s = human_set(3);
  s.records[1].topic = "time";
  EXPECT_ERRC(s.validate(), Errc::TopicMismatch);
  s = human_set(3);
  s.records[2].id = s.records[0].id;
  EXPECT_ERRC(s.validate(), Errc::MalformedRecord);
}
