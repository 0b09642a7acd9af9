#pragma once

// Emitted tables: percent-change heatmaps, metric rank correlations and the
// classifier summary. Every renderer is a pure function of its table, so
// --verify can rebuild the bytes from persisted scorecards and compare.

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "divbench/error.hpp"
#include "divbench/metrics.hpp"
#include "divbench/scorecard.hpp"
#include "divbench/separability.hpp"
#include "divbench/spearman.hpp"

namespace divbench {

inline std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

inline std::string csv_row(const std::vector<std::string>& fields) {
  std::string out;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i) out += ',';
    out += csv_field(fields[i]);
  }
  return out + '\n';
}

inline std::string fixed(double v, int digits) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.*f", digits, v);
  std::string s = buf;
  // "-0.00" and friends print as zero.
  if (s[0] == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
  return s;
}

/// Whole-percent display value, rounded half away from zero.
inline std::string whole_percent(double v) {
  const double r = std::round(v);
  if (std::abs(r) < 9e18) return std::to_string(static_cast<long long>(r));
  return fixed(r, 0);
}

// ---------------------------------------------------------------- heatmaps

/// One heatmap cell, with the two raw metric values it came from.
struct PercentChangeCell {
  std::string topic;
  std::string label;
  double value = std::numeric_limits<double>::quiet_NaN();  // set metric
  double baseline = std::numeric_limits<double>::quiet_NaN();
  double percent = std::numeric_limits<double>::quiet_NaN();
  bool degenerate = false;
  std::string error;

  bool ok() const { return error.empty(); }
};

struct HeatmapTable {
  Metric metric = Metric::dpp;
  std::string sweep;
  std::string baseline_label;
  std::vector<std::string> rows;     // topics
  std::vector<std::string> columns;  // set labels
  std::vector<std::vector<PercentChangeCell>> cells;

  void validate() const {
    if (cells.size() != rows.size()) throw Error(Errc::InvalidArgument, "heatmap row count mismatch");
    for (const auto& r : cells)
      if (r.size() != columns.size()) throw Error(Errc::InvalidArgument, "heatmap is not rectangular");
  }
  std::size_t error_count() const {
    std::size_t n = 0;
    for (const auto& r : cells)
      for (const auto& c : r) n += !c.ok();
    return n;
  }
};

/// Scorecards keyed by (topic, set label).
using ScorecardIndex = std::map<std::pair<std::string, std::string>, DiversityScorecard>;

inline PercentChangeCell percent_change_cell(const ScorecardIndex& cards, Metric m, const std::string& topic,
                                             const std::string& label, const std::string& baseline_label) {
  PercentChangeCell cell;
  cell.topic = topic;
  cell.label = label;
  const auto set_it = cards.find({topic, label});
  const auto base_it = cards.find({topic, baseline_label});
  if (set_it == cards.end()) {
    cell.error = Error(Errc::MissingCell, topic + "/" + label).what();
    return cell;
  }
  if (base_it == cards.end()) {
    cell.error = Error(Errc::MissingCell, topic + "/" + baseline_label).what();
    return cell;
  }
  const MetricValue& x = set_it->second.get(m);
  const MetricValue& b = base_it->second.get(m);
  cell.value = x.value;
  cell.baseline = b.value;
  cell.degenerate = x.degenerate || b.degenerate;
  if (!x.usable() || !b.usable()) {
    cell.error = "no value: " + (x.usable() ? b.note : x.note);
    return cell;
  }
  try {
    cell.percent = percent_change(x.value, b.value);
  } catch (const Error& e) {
    cell.error = e.what();
  }
  return cell;
}

inline HeatmapTable build_heatmap(const ScorecardIndex& cards, Metric m, const std::string& sweep,
                                  const std::vector<std::string>& topics, const std::vector<std::string>& columns,
                                  const std::string& baseline_label) {
  HeatmapTable t;
  t.metric = m;
  t.sweep = sweep;
  t.baseline_label = baseline_label;
  t.rows = topics;
  t.columns = columns;
  for (const auto& topic : topics) {
    auto& row = t.cells.emplace_back();
    for (const auto& label : columns) row.push_back(percent_change_cell(cards, m, topic, label, baseline_label));
  }
  return t;
}

/// Integers for display; "*" marks a degenerate cell, "NA" a failed one.
inline std::string heatmap_csv(const HeatmapTable& t) {
  t.validate();
  std::vector<std::string> header{"topic"};
  header.insert(header.end(), t.columns.begin(), t.columns.end());
  std::string out = csv_row(header);
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    std::vector<std::string> fields{t.rows[r]};
    for (const auto& c : t.cells[r]) {
      if (!c.ok()) fields.push_back("NA");
      else fields.push_back(whole_percent(c.percent) + (c.degenerate ? "*" : ""));
    }
    out += csv_row(fields);
  }
  return out;
}

inline nlohmann::ordered_json to_json(const HeatmapTable& t) {
  t.validate();
  auto num = [](double v) { return std::isfinite(v) ? nlohmann::ordered_json(v) : nlohmann::ordered_json(nullptr); };
  nlohmann::ordered_json j;
  j["metric"] = to_string(t.metric);
  j["sweep"] = t.sweep;
  j["baseline_label"] = t.baseline_label;
  j["columns"] = t.columns;
  j["rows"] = nlohmann::ordered_json::array();
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    nlohmann::ordered_json row;
    row["topic"] = t.rows[r];
    row["cells"] = nlohmann::ordered_json::array();
    for (const auto& c : t.cells[r]) {
      nlohmann::ordered_json cell;
      cell["label"] = c.label;
      cell["percent_change"] = num(c.percent);
      cell["value"] = num(c.value);
      cell["baseline"] = num(c.baseline);
      cell["degenerate"] = c.degenerate;
      if (!c.ok()) cell["error"] = c.error;
      row["cells"].push_back(std::move(cell));
    }
    j["rows"].push_back(std::move(row));
  }
  return j;
}

namespace detail {

inline std::string xml_escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      default: out += c;
    }
  }
  return out;
}

/// Diverging blue-white-red ramp; t in [-1, 1].
inline std::string diverging_color(double t) {
  t = std::clamp(t, -1.0, 1.0);
  const int lo[3] = {33, 102, 172};  // negative end
  const int hi[3] = {178, 24, 43};   // positive end
  const int* end = t < 0 ? lo : hi;
  const double a = std::abs(t);
  char buf[8];
  int rgb[3];
  for (int i = 0; i < 3; ++i) rgb[i] = static_cast<int>(std::lround(255.0 + (end[i] - 255.0) * a));
  std::snprintf(buf, sizeof buf, "#%02x%02x%02x", rgb[0], rgb[1], rgb[2]);
  return buf;
}

}  // namespace detail

/// Static SVG rendering. The color scale is symmetric around zero and spans
/// the largest finite magnitude in the table.
inline std::string heatmap_svg(const HeatmapTable& t) {
  t.validate();
  constexpr int cw = 96, ch = 30, left = 110, top = 130;
  double span = 0.0;
  for (const auto& r : t.cells)
    for (const auto& c : r)
      if (c.ok() && std::isfinite(c.percent)) span = std::max(span, std::abs(c.percent));
  if (span == 0.0) span = 1.0;

  const int width = left + cw * static_cast<int>(t.columns.size()) + 10;
  const int height = top + ch * static_cast<int>(t.rows.size()) + 10;
  std::string s;
  s += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" + std::to_string(width) + "\" height=\"" +
       std::to_string(height) + "\" font-family=\"sans-serif\" font-size=\"11\">\n";
  s += "<text x=\"10\" y=\"20\" font-size=\"14\">" +
       detail::xml_escape(display_name(t.metric) + " (% change vs " + t.baseline_label + ", " + t.sweep + ")") +
       "</text>\n";
  for (std::size_t c = 0; c < t.columns.size(); ++c) {
    const int x = left + cw * static_cast<int>(c) + cw / 2;
    s += "<text transform=\"translate(" + std::to_string(x) + "," + std::to_string(top - 6) +
         ") rotate(-40)\">" + detail::xml_escape(t.columns[c]) + "</text>\n";
  }
  for (std::size_t r = 0; r < t.rows.size(); ++r) {
    const int y = top + ch * static_cast<int>(r);
    s += "<text x=\"" + std::to_string(left - 8) + "\" y=\"" + std::to_string(y + ch / 2 + 4) +
         "\" text-anchor=\"end\">" + detail::xml_escape(t.rows[r]) + "</text>\n";
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      const auto& cell = t.cells[r][c];
      const int x = left + cw * static_cast<int>(c);
      const std::string fill = cell.ok() ? detail::diverging_color(cell.percent / span) : "#bdbdbd";
      const std::string text = cell.ok() ? whole_percent(cell.percent) + (cell.degenerate ? "*" : "") : "NA";
      s += "<rect x=\"" + std::to_string(x) + "\" y=\"" + std::to_string(y) + "\" width=\"" + std::to_string(cw) +
           "\" height=\"" + std::to_string(ch) + "\" fill=\"" + fill + "\" stroke=\"#ffffff\"/>\n";
      s += "<text x=\"" + std::to_string(x + cw / 2) + "\" y=\"" + std::to_string(y + ch / 2 + 4) +
           "\" text-anchor=\"middle\">" + text + "</text>\n";
    }
  }
  s += "</svg>\n";
  return s;
}

// ------------------------------------------------------------ correlations

inline std::vector<std::pair<Metric, Metric>> metric_pairs() {
  std::vector<std::pair<Metric, Metric>> out;
  for (std::size_t i = 0; i < kAllMetrics.size(); ++i)
    for (std::size_t j = i + 1; j < kAllMetrics.size(); ++j) out.emplace_back(kAllMetrics[i], kAllMetrics[j]);
  return out;
}

struct CorrelationEntry {
  double rho = std::numeric_limits<double>::quiet_NaN();
  std::string error;
  bool ok() const { return error.empty(); }
};

struct CorrelationTable {
  std::string sweep;
  std::vector<std::string> topics;
  std::vector<std::pair<Metric, Metric>> pairs = metric_pairs();
  std::vector<std::vector<CorrelationEntry>> entries;  // [pair][topic]

  std::size_t error_count() const {
    std::size_t n = 0;
    for (const auto& r : entries)
      for (const auto& e : r) n += !e.ok();
    return n;
  }
};

/// For each topic, ranks the raw metric values of the sweep's generated cells
/// (`labels`) and correlates every metric pair.
inline CorrelationTable build_correlations(const ScorecardIndex& cards, const std::string& sweep,
                                           const std::vector<std::string>& topics,
                                           const std::vector<std::string>& labels) {
  CorrelationTable t;
  t.sweep = sweep;
  t.topics = topics;
  t.entries.assign(t.pairs.size(), std::vector<CorrelationEntry>(topics.size()));
  for (std::size_t k = 0; k < topics.size(); ++k) {
    std::map<Metric, std::vector<double>> series;
    std::string missing;
    for (const auto& label : labels) {
      auto it = cards.find({topics[k], label});
      if (it == cards.end()) {
        missing = Error(Errc::MissingCell, topics[k] + "/" + label).what();
        break;
      }
      for (auto m : kAllMetrics) series[m].push_back(it->second.get(m).value);
    }
    for (std::size_t p = 0; p < t.pairs.size(); ++p) {
      auto& e = t.entries[p][k];
      if (!missing.empty()) {
        e.error = missing;
        continue;
      }
      try {
        e.rho = spearman(series[t.pairs[p].first], series[t.pairs[p].second]);
      } catch (const Error& err) {
        e.error = err.what();
      }
    }
  }
  return t;
}

inline std::string pair_label(const std::pair<Metric, Metric>& p) {
  return display_name(p.first) + "/" + display_name(p.second);
}

inline std::string correlation_csv(const CorrelationTable& t) {
  std::vector<std::string> header{"combination"};
  header.insert(header.end(), t.topics.begin(), t.topics.end());
  std::string out = csv_row(header);
  for (std::size_t p = 0; p < t.pairs.size(); ++p) {
    std::vector<std::string> fields{pair_label(t.pairs[p])};
    for (const auto& e : t.entries[p]) fields.push_back(e.ok() ? fixed(e.rho, 3) : "NA");
    out += csv_row(fields);
  }
  return out;
}

inline nlohmann::ordered_json to_json(const CorrelationTable& t) {
  nlohmann::ordered_json j;
  j["sweep"] = t.sweep;
  j["topics"] = t.topics;
  j["combinations"] = nlohmann::ordered_json::array();
  for (std::size_t p = 0; p < t.pairs.size(); ++p) {
    nlohmann::ordered_json row;
    row["combination"] = pair_label(t.pairs[p]);
    row["values"] = nlohmann::ordered_json::array();
    for (const auto& e : t.entries[p]) {
      if (e.ok()) row["values"].push_back(e.rho);
      else row["values"].push_back({{"error", e.error}});
    }
    j["combinations"].push_back(std::move(row));
  }
  return j;
}

// -------------------------------------------------------------- classifier

/// Two rows per topic, mirroring the confusion-matrix layout: actual llm,
/// then actual human, each with predicted-llm / predicted-human counts.
inline std::string classifier_csv(const std::vector<ClassifierReport>& reports) {
  std::string out =
      csv_row({"topic", "class", "predicted_llm", "predicted_human", "precision", "recall", "f1", "flags"});
  auto flags = [](const ClassStats& s, bool low_signal) {
    std::string f;
    auto add = [&](const char* x) { f += (f.empty() ? "" : ";") + std::string(x); };
    if (s.precision_undefined) add("undefined_precision");
    if (s.recall_undefined) add("undefined_recall");
    if (s.f1_undefined) add("undefined_f1");
    if (low_signal) add("low_signal");
    return f;
  };
  for (const auto& r : reports) {
    out += csv_row({r.topic, "llm", std::to_string(r.tp), std::to_string(r.fn), fixed(r.llm.precision, 2),
                    fixed(r.llm.recall, 2), fixed(r.llm.f1, 2), flags(r.llm, false)});
    out += csv_row({r.topic, "human", std::to_string(r.fp), std::to_string(r.tn), fixed(r.human.precision, 2),
                    fixed(r.human.recall, 2), fixed(r.human.f1, 2), flags(r.human, r.low_signal)});
  }
  return out;
}

}  // namespace divbench
