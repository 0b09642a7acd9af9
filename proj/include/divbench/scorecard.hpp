#pragma once

// Per-set diversity scorecards. Each metric either yields a value or a
// flagged sentinel, so one degenerate set never aborts a whole sweep.

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <string_view>

#include "json.hpp"

#include "divbench/embedding.hpp"
#include "divbench/error.hpp"
#include "divbench/hull.hpp"
#include "divbench/metrics.hpp"
#include "divbench/pca.hpp"

namespace divbench {

enum class Metric { dpp, nearest_sample, hull_volume, centroid_distance };

inline constexpr std::array<Metric, 4> kAllMetrics = {Metric::dpp, Metric::nearest_sample, Metric::hull_volume,
                                                     Metric::centroid_distance};

inline std::string to_string(Metric m) {
  switch (m) {
    case Metric::dpp: return "dpp";
    case Metric::nearest_sample: return "nearest_sample";
    case Metric::hull_volume: return "hull_volume";
    case Metric::centroid_distance: return "centroid_distance";
  }
  return "unknown";
}

/// Short names used in correlation tables.
inline std::string display_name(Metric m) {
  switch (m) {
    case Metric::dpp: return "DPP";
    case Metric::nearest_sample: return "NGS";
    case Metric::hull_volume: return "Convex Hull";
    case Metric::centroid_distance: return "Centroid Distance";
  }
  return "Unknown";
}

struct MetricValue {
  double value = std::numeric_limits<double>::quiet_NaN();
  bool degenerate = false;
  std::string note;

  bool usable() const noexcept { return std::isfinite(value); }
};

struct DiversityScorecard {
  std::string set_label;
  std::string topic;
  std::size_t set_size = 0;
  std::string model_tag;
  MetricValue dpp_log_det;
  MetricValue nearest_sample;
  MetricValue hull_volume;
  MetricValue centroid_distance;
  int k_hull = 13;
  int k_centroid = 20;
  // Which representation each metric saw.
  bool dpp_on_normalized = true;
  bool distances_on_raw = true;

  const MetricValue& get(Metric m) const {
    switch (m) {
      case Metric::dpp: return dpp_log_det;
      case Metric::nearest_sample: return nearest_sample;
      case Metric::hull_volume: return hull_volume;
      case Metric::centroid_distance: return centroid_distance;
    }
    return dpp_log_det;
  }
  MetricValue& get(Metric m) { return const_cast<MetricValue&>(std::as_const(*this).get(m)); }
};

struct ScorecardOptions {
  HullOptions hull;
};

/// Scores one set. `raw` holds the set's full-dimension embeddings; the bases
/// are fitted on the pooled sets being compared, so every card of a sweep
/// shares the same reduced spaces.
inline DiversityScorecard scorecard(const std::string& label, const std::string& topic, const EmbeddingMatrix& raw,
                                    const PcaBasis& basis_hull, const PcaBasis& basis_centroid,
                                    const ScorecardOptions& opt = {}) {
  DiversityScorecard card;
  card.set_label = label;
  card.topic = topic;
  card.set_size = static_cast<std::size_t>(raw.size());
  card.model_tag = raw.model_tag;
  card.k_hull = static_cast<int>(basis_hull.k());
  card.k_centroid = static_cast<int>(basis_centroid.k());

  try {
    card.dpp_log_det.value = dpp_score(l2_normalize(raw));
  } catch (const Error& e) {
    card.dpp_log_det.degenerate = true;
    card.dpp_log_det.note = e.what();
    if (e.code() == Errc::DegenerateKernel) card.dpp_log_det.value = kDppLogDetFloor;
  }

  try {
    card.nearest_sample.value = nearest_sample_score(raw);
  } catch (const Error& e) {
    card.nearest_sample.degenerate = true;
    card.nearest_sample.note = e.what();
  }

  try {
    const auto reduced = pca_project(basis_hull, raw);
    if (reduced.size() < reduced.dim() + 1)
      throw Error(Errc::DegenerateHull, std::to_string(reduced.size()) + " points cannot span " +
                                            std::to_string(reduced.dim()) + " dimensions");
    card.hull_volume.value = hull_volume(reduced, opt.hull);
  } catch (const Error& e) {
    card.hull_volume.degenerate = true;
    card.hull_volume.note = e.what();
    if (e.code() == Errc::DegenerateHull) card.hull_volume.value = 0.0;
  }

  try {
    card.centroid_distance.value = centroid_distance_score(pca_project(basis_centroid, raw));
  } catch (const Error& e) {
    card.centroid_distance.degenerate = true;
    card.centroid_distance.note = e.what();
  }
  return card;
}

inline nlohmann::ordered_json to_json(const MetricValue& v) {
  nlohmann::ordered_json j;
  j["value"] = std::isfinite(v.value) ? nlohmann::ordered_json(v.value) : nlohmann::ordered_json(nullptr);
  j["degenerate"] = v.degenerate;
  if (!v.note.empty()) j["note"] = v.note;
  return j;
}

inline MetricValue metric_value_from_json(const nlohmann::json& j) {
  MetricValue v;
  if (!j.at("value").is_null()) v.value = j.at("value").get<double>();
  v.degenerate = j.at("degenerate").get<bool>();
  v.note = j.value("note", std::string{});
  return v;
}

inline nlohmann::ordered_json to_json(const DiversityScorecard& c) {
  nlohmann::ordered_json j;
  j["set_label"] = c.set_label;
  j["topic"] = c.topic;
  j["set_size"] = c.set_size;
  j["model_tag"] = c.model_tag;
  for (auto m : kAllMetrics) j[to_string(m)] = to_json(c.get(m));
  j["k_hull"] = c.k_hull;
  j["k_centroid"] = c.k_centroid;
  j["dpp_on_normalized"] = c.dpp_on_normalized;
  j["distances_on_raw"] = c.distances_on_raw;
  return j;
}

inline DiversityScorecard scorecard_from_json(const nlohmann::json& j) {
  DiversityScorecard c;
  c.set_label = j.at("set_label").get<std::string>();
  c.topic = j.at("topic").get<std::string>();
  c.set_size = j.at("set_size").get<std::size_t>();
  c.model_tag = j.value("model_tag", std::string{});
  for (auto m : kAllMetrics) c.get(m) = metric_value_from_json(j.at(to_string(m)));
  c.k_hull = j.at("k_hull").get<int>();
  c.k_centroid = j.at("k_centroid").get<int>();
  c.dpp_on_normalized = j.value("dpp_on_normalized", true);
  c.distances_on_raw = j.value("distances_on_raw", true);
  return c;
}

}  // namespace divbench
