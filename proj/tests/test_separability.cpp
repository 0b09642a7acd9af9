#include <random>
#include <set>

#include "divbench/separability.hpp"
#include "support.hpp"

using namespace divbench;

namespace {

// n_llm rows around +mu and n_human rows around -mu along the first axis.
LabeledDataset clusters(std::size_t n_llm, std::size_t n_human, Eigen::Index dim, double mu, double sigma,
                        std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  LabeledDataset ds;
  ds.topic = "froth";
  ds.rows.resize(static_cast<Eigen::Index>(n_llm + n_human), dim);
  for (std::size_t i = 0; i < n_llm + n_human; ++i) {
    const bool llm = i < n_llm;
    ds.labels.push_back(llm ? 1 : 0);
    for (Eigen::Index k = 0; k < dim; ++k) ds.rows(static_cast<Eigen::Index>(i), k) = sigma * standard_normal(rng);
    ds.rows(static_cast<Eigen::Index>(i), 0) += llm ? mu : -mu;
  }
  return ds;
}

double accuracy(const LogisticModel& m, const LabeledDataset& ds) {
  const auto p = m.predict(ds.rows);
  std::size_t ok = 0;
  for (std::size_t i = 0; i < p.size(); ++i) ok += p[i] == ds.labels[i];
  return static_cast<double>(ok) / static_cast<double>(p.size());
}

}  // namespace

TEST(Split, StratifiedCounts) {
  const auto ds = clusters(400, 100, 4, 1, 1, 1);
  const auto s = split_train_test(ds, 0.8, 42);
  EXPECT_EQ(s.train.count(true), 320u);
  EXPECT_EQ(s.train.count(false), 80u);
  EXPECT_EQ(s.test.count(true), 80u);
  EXPECT_EQ(s.test.count(false), 20u);
  std::set<std::size_t> all(s.train_index.begin(), s.train_index.end());
  all.insert(s.test_index.begin(), s.test_index.end());
  EXPECT_EQ(all.size(), 500u);
}

TEST(Split, DeterministicAndSeeded) {
  const auto ds = clusters(400, 100, 4, 1, 1, 1);
  EXPECT_EQ(split_train_test(ds, 0.8, 42).test_index, split_train_test(ds, 0.8, 42).test_index);
  EXPECT_NE(split_train_test(ds, 0.8, 42).test_index, split_train_test(ds, 0.8, 43).test_index);
}

TEST(Split, Errors) {
  EXPECT_ERRC(split_train_test(clusters(10, 1, 2, 1, 1, 1), 0.8, 1), Errc::ClassTooSmall);
  EXPECT_ERRC(split_train_test(clusters(10, 0, 2, 1, 1, 1), 0.8, 1), Errc::ClassTooSmall);
  EXPECT_ANY_THROW(split_train_test(clusters(10, 10, 2, 1, 1, 1), 1.0, 1));
  EXPECT_ANY_THROW(split_train_test(clusters(10, 10, 2, 1, 1, 1), 0.0, 1));
}

TEST(Logistic, WellSeparatedClusters) {
  // Means 6 sigma apart on each side of the boundary.
  const auto ds = clusters(400, 100, 384, 6.0, 1.0, 7);
  const auto s = split_train_test(ds, 0.8, 3);
  const auto model = train_logistic(s.train);
  EXPECT_EQ(accuracy(model, s.train), 1.0);
  const auto rep = evaluate(model, s.test);
  EXPECT_GE(rep.accuracy(), 0.98);
  EXPECT_GE(rep.human.recall, 0.95);
  EXPECT_FALSE(rep.low_signal);
}

TEST(Logistic, ConvergedMeansSmallGradientAndMonotoneLoss) {
  const auto ds = clusters(80, 40, 16, 1.0, 1.0, 11);
  LogisticOptions opt;
  const auto model = train_logistic(ds, opt);
  ASSERT_TRUE(model.converged);
  EXPECT_LE(model.gradient_norm, opt.tol);
  EXPECT_LE(logistic_gradient_norm(model, ds, opt.l2_strength), opt.tol * 1.0001);
  ASSERT_FALSE(model.loss_trace.empty());
  EXPECT_EQ(model.iterations, static_cast<int>(model.loss_trace.size()));
  for (std::size_t i = 1; i < model.loss_trace.size(); ++i) EXPECT_LE(model.loss_trace[i], model.loss_trace[i - 1]);
}

TEST(Logistic, MaxIterStopsUnconverged) {
  LogisticOptions opt;
  opt.max_iter = 2;
  opt.tol = 1e-14;
  const auto model = train_logistic(clusters(50, 50, 8, 1.0, 1.0, 2), opt);
  EXPECT_FALSE(model.converged);
  EXPECT_LE(model.iterations, 2);
}

TEST(Logistic, NoSignalGivesMajorityRate) {
  LabeledDataset ds;
  ds.topic = "froth";
  ds.rows = Eigen::MatrixXd::Constant(50, 5, 0.3);
  for (int i = 0; i < 50; ++i) ds.labels.push_back(i < 40 ? 1 : 0);
  const auto model = train_logistic(ds);
  EXPECT_TRUE(model.converged);
  EXPECT_LT(model.weights.norm(), 1.0);
  EXPECT_NEAR(accuracy(model, ds), 0.8, 1e-12);
}

TEST(Logistic, ScalingKeepsAccuracy) {
  const auto ds = clusters(100, 100, 10, 3.0, 1.0, 12);
  auto scaled = ds;
  scaled.rows *= 4.0;
  const auto a = split_train_test(ds, 0.8, 1), b = split_train_test(scaled, 0.8, 1);
  EXPECT_EQ(evaluate(train_logistic(a.train), a.test).accuracy(), evaluate(train_logistic(b.train), b.test).accuracy());
}

TEST(Logistic, StandardizeOption) {
  const auto ds = clusters(60, 60, 6, 2.0, 1.0, 13);
  LogisticOptions opt;
  opt.standardize = true;
  const auto model = train_logistic(ds, opt);
  EXPECT_EQ(model.feature_mean.size(), 6);
  EXPECT_GE(accuracy(model, ds), 0.95);
  auto bad = ds;
  bad.rows(0, 0) = NAN;
  EXPECT_ERRC(train_logistic(bad), Errc::NonFiniteLoss);
}

TEST(Logistic, IdenticalDistributionsTrackThePrior) {
  // Same distribution for both classes: human recall should sit near the
  // share of human records in the test set.
  const auto ds = clusters(400, 100, 384, 0.0, 1.0, 21);
  const auto s = split_train_test(ds, 0.8, 5);
  const auto rep = evaluate(train_logistic(s.train), s.test);
  EXPECT_NEAR(rep.human.recall, rep.human_prior(), 0.15);
  EXPECT_TRUE(rep.low_signal);
}

TEST(Report, FrothRowFromCounts) {
  const auto r = report_from_counts(80, 0, 4, 16);
  EXPECT_EQ(r.test_size, 100u);
  EXPECT_NEAR(r.llm.precision, 80.0 / 84.0, 1e-15);
  EXPECT_EQ(r.llm.recall, 1.0);
  EXPECT_NEAR(r.llm.f1, 160.0 / 164.0, 1e-15);
  EXPECT_EQ(r.human.precision, 1.0);
  EXPECT_EQ(r.human.recall, 0.8);
  EXPECT_NEAR(r.human.f1, 1.6 / 1.8, 1e-15);
  const auto two = [](double v) { return std::round(v * 100) / 100; };
  EXPECT_EQ(two(r.llm.precision), 0.95);
  EXPECT_EQ(two(r.llm.f1), 0.98);
  EXPECT_EQ(two(r.human.f1), 0.89);
}

TEST(Report, PerfectAndDegenerate) {
  const auto perfect = report_from_counts(80, 0, 0, 20);
  for (const auto* s : {&perfect.llm, &perfect.human}) {
    EXPECT_EQ(s->precision, 1.0);
    EXPECT_EQ(s->recall, 1.0);
    EXPECT_EQ(s->f1, 1.0);
  }
  const auto all_llm = report_from_counts(80, 0, 20, 0);
  EXPECT_EQ(all_llm.human.recall, 0.0);
  EXPECT_TRUE(all_llm.human.precision_undefined);
  EXPECT_EQ(all_llm.human.precision, 0.0);
  EXPECT_TRUE(all_llm.human.f1_undefined);
  EXPECT_FALSE(all_llm.llm.precision_undefined);
}

TEST(Report, JsonRoundTripRecomputesStatistics) {
  auto r = report_from_counts(70, 10, 6, 14);
  r.topic = "time";
  r.seed = 99;
  r.converged = true;
  r.iterations = 31;
  const auto back = report_from_json(nlohmann::json::parse(to_json(r).dump()));
  EXPECT_EQ(to_json(back).dump(), to_json(r).dump());
}

TEST(Evaluate, CountsFollowPositiveIsLlm) {
  LabeledDataset test;
  test.rows.resize(4, 1);
  test.rows << 1, -1, 1, -1;
  test.labels = {1, 1, 0, 0};
  LogisticModel m;
  m.weights = Eigen::VectorXd::Ones(1);
  const auto r = evaluate(m, test);
  EXPECT_EQ(r.tp, 1u);
  EXPECT_EQ(r.fn, 1u);
  EXPECT_EQ(r.fp, 1u);
  EXPECT_EQ(r.tn, 1u);
  EXPECT_ERRC(evaluate(m, LabeledDataset{}), Errc::InvalidArgument);
}
