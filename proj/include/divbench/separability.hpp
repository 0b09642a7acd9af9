#pragma once

// Human-vs-LLM separability: stratified split, L2-regularized logistic
// regression, and confusion statistics with the LLM class as positive.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "divbench/error.hpp"
#include "divbench/random.hpp"

namespace divbench {

struct LabeledDataset {
  Eigen::MatrixXd rows;
  std::vector<char> labels;  // 1 = llm, 0 = human
  std::string topic;
  std::uint64_t split_seed = 0;

  Eigen::Index size() const noexcept { return rows.rows(); }

  std::size_t count(bool llm) const {
    return static_cast<std::size_t>(std::count(labels.begin(), labels.end(), llm ? 1 : 0));
  }

  void validate() const {
    if (static_cast<Eigen::Index>(labels.size()) != rows.rows())
      throw Error(Errc::InvalidArgument, "label count does not match row count");
    if (count(true) == 0 || count(false) == 0)
      throw Error(Errc::ClassTooSmall, "dataset for '" + topic + "' lacks one of the classes");
  }

  LabeledDataset subset(const std::vector<std::size_t>& idx) const {
    LabeledDataset out;
    out.topic = topic;
    out.split_seed = split_seed;
    out.rows.resize(static_cast<Eigen::Index>(idx.size()), rows.cols());
    for (std::size_t i = 0; i < idx.size(); ++i) {
      out.rows.row(static_cast<Eigen::Index>(i)) = rows.row(static_cast<Eigen::Index>(idx[i]));
      out.labels.push_back(labels[idx[i]]);
    }
    return out;
  }
};

struct TrainTestSplit {
  LabeledDataset train;
  LabeledDataset test;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> test_index;
};

/// Stratified split: each class is shuffled with its own seeded permutation
/// and round(fraction * class size) of it goes to training. Both sides keep
/// the original row order.
inline TrainTestSplit split_train_test(const LabeledDataset& ds, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0))
    throw Error(Errc::InvalidArgument, "train fraction must be in (0, 1)");
  if (static_cast<Eigen::Index>(ds.labels.size()) != ds.rows.rows())
    throw Error(Errc::InvalidArgument, "label count does not match row count");

  TrainTestSplit out;
  for (int cls : {1, 0}) {
    std::vector<std::size_t> members;
    for (std::size_t i = 0; i < ds.labels.size(); ++i)
      if (ds.labels[i] == cls) members.push_back(i);
    const auto n_train = static_cast<std::size_t>(std::llround(train_fraction * static_cast<double>(members.size())));
    const char* name = cls ? "llm" : "human";
    if (members.size() < 2 || n_train == 0 || n_train == members.size())
      throw Error(Errc::ClassTooSmall, std::string(name) + " class has " + std::to_string(members.size()) +
                                           " records; cannot place it on both sides of the split");
    const auto perm = seeded_permutation(members.size(), derive_seed(seed, name));
    for (std::size_t k = 0; k < members.size(); ++k)
      (k < n_train ? out.train_index : out.test_index).push_back(members[perm[k]]);
  }
  std::sort(out.train_index.begin(), out.train_index.end());
  std::sort(out.test_index.begin(), out.test_index.end());
  out.train = ds.subset(out.train_index);
  out.test = ds.subset(out.test_index);
  out.train.split_seed = out.test.split_seed = seed;
  return out;
}

struct LogisticModel {
  Eigen::VectorXd weights;
  double bias = 0.0;
  // Optional standardization applied before the linear map.
  Eigen::RowVectorXd feature_mean;
  Eigen::RowVectorXd feature_scale;

  bool converged = false;
  int iterations = 0;
  double loss = 0.0;
  double gradient_norm = 0.0;
  std::vector<double> loss_trace;  // objective after every accepted step

  Eigen::MatrixXd prepare(const Eigen::MatrixXd& x) const {
    if (feature_mean.size() == 0) return x;
    return ((x.rowwise() - feature_mean).array().rowwise() / feature_scale.array()).matrix();
  }

  Eigen::VectorXd decision(const Eigen::MatrixXd& x) const {
    return (prepare(x) * weights).array() + bias;
  }

  std::vector<char> predict(const Eigen::MatrixXd& x) const {
    const Eigen::VectorXd z = decision(x);
    std::vector<char> out(static_cast<std::size_t>(z.size()));
    for (Eigen::Index i = 0; i < z.size(); ++i) out[static_cast<std::size_t>(i)] = z(i) > 0.0 ? 1 : 0;
    return out;
  }
};

struct LogisticOptions {
  double l2_strength = 1.0;
  double tol = 1e-6;
  int max_iter = 10'000;
  bool standardize = false;
};

namespace detail {

// log(1 + exp(-t)) without overflow.
inline double log1p_exp_neg(double t) {
  return t > 0 ? std::log1p(std::exp(-t)) : -t + std::log1p(std::exp(t));
}

struct LogisticObjective {
  const Eigen::MatrixXd& x;
  Eigen::VectorXd y;  // +1 llm, -1 human
  double lambda;

  // Sum of log-losses plus lambda/2 |w|^2; the bias is not penalized.
  double value(const Eigen::VectorXd& w, double b) const {
    const Eigen::VectorXd margin = y.array() * ((x * w).array() + b);
    double s = 0.0;
    for (Eigen::Index i = 0; i < margin.size(); ++i) s += log1p_exp_neg(margin(i));
    return s + 0.5 * lambda * w.squaredNorm();
  }

  void gradient(const Eigen::VectorXd& w, double b, Eigen::VectorXd& gw, double& gb) const {
    const Eigen::VectorXd margin = y.array() * ((x * w).array() + b);
    Eigen::VectorXd coeff(margin.size());
    for (Eigen::Index i = 0; i < margin.size(); ++i) coeff(i) = -y(i) / (1.0 + std::exp(margin(i)));
    gw = x.transpose() * coeff + lambda * w;
    gb = coeff.sum();
  }
};

}  // namespace detail

/// Full-batch gradient descent from zero weights. Each step starts from a
/// Barzilai-Borwein length and backtracks until the Armijo condition holds,
/// so the objective never increases. Stops when the gradient norm is at most
/// `tol` (converged) or after `max_iter` steps.
inline LogisticModel train_logistic(const LabeledDataset& train, const LogisticOptions& opt = {}) {
  train.validate();
  LogisticModel model;
  Eigen::MatrixXd x = train.rows;
  if (opt.standardize) {
    model.feature_mean = x.colwise().mean();
    const Eigen::MatrixXd c = x.rowwise() - model.feature_mean;
    model.feature_scale = (c.colwise().squaredNorm() / static_cast<double>(x.rows())).array().sqrt();
    for (Eigen::Index k = 0; k < model.feature_scale.size(); ++k)
      if (!(model.feature_scale(k) > 0.0)) model.feature_scale(k) = 1.0;
    x = model.prepare(train.rows);
  }
  if (!x.allFinite()) throw Error(Errc::NonFiniteLoss, "training features are not finite");

  detail::LogisticObjective obj{x, Eigen::VectorXd(x.rows()), opt.l2_strength};
  for (Eigen::Index i = 0; i < x.rows(); ++i) obj.y(i) = train.labels[static_cast<std::size_t>(i)] ? 1.0 : -1.0;

  Eigen::VectorXd w = Eigen::VectorXd::Zero(x.cols());
  double b = 0.0;
  double f = obj.value(w, b);
  Eigen::VectorXd gw;
  double gb = 0.0;
  obj.gradient(w, b, gw, gb);
  double step = 1.0 / (1.0 + 0.25 * x.squaredNorm() / std::max<Eigen::Index>(1, x.rows()) + opt.l2_strength);

  int it = 0;
  for (; it < opt.max_iter; ++it) {
    const double gnorm2 = gw.squaredNorm() + gb * gb;
    if (std::sqrt(gnorm2) <= opt.tol) break;
    double t = step;
    Eigen::VectorXd w_new;
    double b_new = 0.0, f_new = 0.0;
    for (int shrink = 0;; ++shrink) {
      w_new = w - t * gw;
      b_new = b - t * gb;
      f_new = obj.value(w_new, b_new);
      if (!std::isfinite(f_new)) throw Error(Errc::NonFiniteLoss, "objective became non-finite");
      if (f_new <= f - 1e-4 * t * gnorm2) break;
      t *= 0.5;
      if (shrink > 60) {
        // No representable decrease left; the iterate is as good as it gets.
        it = opt.max_iter;
        break;
      }
    }
    if (it >= opt.max_iter) break;
    Eigen::VectorXd gw_new;
    double gb_new = 0.0;
    obj.gradient(w_new, b_new, gw_new, gb_new);
    // Barzilai-Borwein guess for the next trial step.
    const double sy = (w_new - w).dot(gw_new - gw) + (b_new - b) * (gb_new - gb);
    const double ss = (w_new - w).squaredNorm() + (b_new - b) * (b_new - b);
    step = sy > 0.0 ? ss / sy : 2.0 * t;
    w = std::move(w_new);
    b = b_new;
    f = f_new;
    gw = std::move(gw_new);
    gb = gb_new;
    model.loss_trace.push_back(f);
  }
  model.weights = std::move(w);
  model.bias = b;
  model.loss = f;
  model.gradient_norm = std::sqrt(gw.squaredNorm() + gb * gb);
  model.converged = model.gradient_norm <= opt.tol;
  model.iterations = static_cast<int>(model.loss_trace.size());
  return model;
}

/// Gradient of the training objective at the model's parameters.
inline double logistic_gradient_norm(const LogisticModel& model, const LabeledDataset& train, double l2_strength) {
  const Eigen::MatrixXd x = model.prepare(train.rows);
  detail::LogisticObjective obj{x, Eigen::VectorXd(x.rows()), l2_strength};
  for (Eigen::Index i = 0; i < x.rows(); ++i) obj.y(i) = train.labels[static_cast<std::size_t>(i)] ? 1.0 : -1.0;
  Eigen::VectorXd gw;
  double gb = 0.0;
  obj.gradient(model.weights, model.bias, gw, gb);
  return std::sqrt(gw.squaredNorm() + gb * gb);
}

struct ClassStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  bool precision_undefined = false;
  bool recall_undefined = false;
  bool f1_undefined = false;
};

struct ClassifierReport {
  std::string topic;
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;  // positive = llm
  ClassStats llm;
  ClassStats human;
  std::size_t test_size = 0;
  std::uint64_t seed = 0;
  bool converged = false;
  int iterations = 0;
  bool low_signal = false;

  double accuracy() const {
    return test_size ? static_cast<double>(tp + tn) / static_cast<double>(test_size) : 0.0;
  }
  /// Share of human records in the test set.
  double human_prior() const {
    return test_size ? static_cast<double>(fp + tn) / static_cast<double>(test_size) : 0.0;
  }
};

namespace detail {

inline ClassStats class_stats(std::size_t hit, std::size_t false_alarm, std::size_t miss) {
  ClassStats s;
  if (hit + false_alarm == 0) {
    s.precision_undefined = true;
  } else {
    s.precision = static_cast<double>(hit) / static_cast<double>(hit + false_alarm);
  }
  if (hit + miss == 0) {
    s.recall_undefined = true;
  } else {
    s.recall = static_cast<double>(hit) / static_cast<double>(hit + miss);
  }
  if (s.precision + s.recall == 0.0) {
    s.f1_undefined = true;
  } else {
    s.f1 = 2.0 * s.precision * s.recall / (s.precision + s.recall);
  }
  return s;
}

}  // namespace detail

/// Statistics are pure functions of the four counts. TP: llm predicted llm;
/// FN: llm predicted human; FP: human predicted llm; TN: human predicted human.
inline ClassifierReport report_from_counts(std::size_t tp, std::size_t fn, std::size_t fp, std::size_t tn) {
  ClassifierReport r;
  r.tp = tp;
  r.fn = fn;
  r.fp = fp;
  r.tn = tn;
  r.test_size = tp + fn + fp + tn;
  r.llm = detail::class_stats(tp, fp, fn);
  r.human = detail::class_stats(tn, fn, fp);
  r.low_signal = std::abs(r.human.recall - r.human_prior()) <= 0.15;
  return r;
}

inline ClassifierReport evaluate(const LogisticModel& model, const LabeledDataset& test) {
  if (test.size() == 0) throw Error(Errc::InvalidArgument, "empty test set");
  const auto pred = model.predict(test.rows);
  std::size_t tp = 0, fn = 0, fp = 0, tn = 0;
  for (std::size_t i = 0; i < pred.size(); ++i) {
    if (test.labels[i]) {
      (pred[i] ? tp : fn)++;
    } else {
      (pred[i] ? fp : tn)++;
    }
  }
  auto r = report_from_counts(tp, fn, fp, tn);
  r.topic = test.topic;
  r.seed = test.split_seed;
  r.converged = model.converged;
  r.iterations = model.iterations;
  return r;
}

inline nlohmann::ordered_json to_json(const ClassStats& s) {
  nlohmann::ordered_json j;
  j["precision"] = s.precision;
  j["recall"] = s.recall;
  j["f1"] = s.f1;
  j["precision_undefined"] = s.precision_undefined;
  j["recall_undefined"] = s.recall_undefined;
  j["f1_undefined"] = s.f1_undefined;
  return j;
}

inline nlohmann::ordered_json to_json(const ClassifierReport& r) {
  nlohmann::ordered_json j;
  j["topic"] = r.topic;
  j["counts"] = {{"tp", r.tp}, {"fn", r.fn}, {"fp", r.fp}, {"tn", r.tn}};
  j["llm"] = to_json(r.llm);
  j["human"] = to_json(r.human);
  j["accuracy"] = r.accuracy();
  j["test_size"] = r.test_size;
  j["seed"] = r.seed;
  j["converged"] = r.converged;
  j["iterations"] = r.iterations;
  j["low_signal"] = r.low_signal;
  return j;
}

/// Rebuilds a report from its persisted counts; the statistics are recomputed.
inline ClassifierReport report_from_json(const nlohmann::json& j) {
  const auto& c = j.at("counts");
  auto r = report_from_counts(c.at("tp").get<std::size_t>(), c.at("fn").get<std::size_t>(),
                              c.at("fp").get<std::size_t>(), c.at("tn").get<std::size_t>());
  r.topic = j.at("topic").get<std::string>();
  r.seed = j.value("seed", std::uint64_t{0});
  r.converged = j.value("converged", false);
  r.iterations = j.value("iterations", 0);
  return r;
}

}  // namespace divbench
