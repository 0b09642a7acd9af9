#pragma once

// Embedding matrices aligned to solution sets, the embeddings interchange
// format, and the file / remote / stub providers.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include <Eigen/Dense>

#include "json.hpp"

#include "divbench/corpus.hpp"
#include "divbench/error.hpp"
#include "divbench/provider.hpp"
#include "divbench/random.hpp"

namespace divbench {

inline constexpr int kDefaultEmbeddingDim = 384;

struct EmbeddingMatrix {
  std::vector<std::string> ids;
  Eigen::MatrixXd rows;  // one embedding per row
  std::string model_tag;

  Eigen::Index size() const noexcept { return rows.rows(); }
  Eigen::Index dim() const noexcept { return rows.cols(); }

  void validate() const {
    if (static_cast<Eigen::Index>(ids.size()) != rows.rows())
      throw Error(Errc::DimensionMismatch, std::to_string(ids.size()) + " ids for " +
                                               std::to_string(rows.rows()) + " rows");
    if (!rows.allFinite()) throw Error(Errc::InvalidArgument, "embedding matrix has non-finite entries");
  }

  /// Row subset in the given order.
  EmbeddingMatrix select(const std::vector<Eigen::Index>& which) const {
    EmbeddingMatrix out;
    out.model_tag = model_tag;
    out.rows.resize(static_cast<Eigen::Index>(which.size()), dim());
    for (std::size_t i = 0; i < which.size(); ++i) {
      out.rows.row(static_cast<Eigen::Index>(i)) = rows.row(which[i]);
      out.ids.push_back(ids[static_cast<std::size_t>(which[i])]);
    }
    return out;
  }
};

/// Stacks matrices vertically; dims and model tags must agree.
inline EmbeddingMatrix concat(const std::vector<const EmbeddingMatrix*>& parts) {
  EmbeddingMatrix out;
  if (parts.empty()) return out;
  Eigen::Index n = 0;
  const Eigen::Index d = parts.front()->dim();
  for (const auto* p : parts) {
    if (p->dim() != d) throw Error(Errc::DimensionMismatch, "cannot stack matrices of different dims");
    if (p->model_tag != parts.front()->model_tag)
      throw Error(Errc::InvalidArgument, "refusing to mix embedding models '" + p->model_tag + "' and '" +
                                             parts.front()->model_tag + "'");
    n += p->size();
  }
  out.model_tag = parts.front()->model_tag;
  out.rows.resize(n, d);
  Eigen::Index at = 0;
  for (const auto* p : parts) {
    out.rows.middleRows(at, p->size()) = p->rows;
    out.ids.insert(out.ids.end(), p->ids.begin(), p->ids.end());
    at += p->size();
  }
  return out;
}

enum class EmbeddingKind { file, remote, stub };

inline std::string to_string(EmbeddingKind k) {
  switch (k) {
    case EmbeddingKind::file: return "file";
    case EmbeddingKind::remote: return "remote";
    case EmbeddingKind::stub: return "stub";
  }
  return "stub";
}

inline EmbeddingKind embedding_kind_from_string(const std::string& s) {
  if (s == "file") return EmbeddingKind::file;
  if (s == "remote") return EmbeddingKind::remote;
  if (s == "stub") return EmbeddingKind::stub;
  throw Error(Errc::Config, "unknown embedding kind '" + s + "'");
}

struct EmbeddingProviderSpec {
  EmbeddingKind kind = EmbeddingKind::stub;
  std::string location;  // file path or endpoint URL
  std::string model_tag = "stub-hash-v1";
  int dim = kDefaultEmbeddingDim;
  std::string api_key_env;  // remote only; empty means no auth header
  int batch_size = 64;
};

// ---------------------------------------------------------------------------
// Interchange format: {"id", "dim", "model", "vector"} per line.

inline std::string format_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

inline std::string embedding_line(const std::string& id, const std::string& model, const Eigen::Ref<const Eigen::RowVectorXd>& v) {
  std::string line = "{\"id\":" + nlohmann::json(id).dump() + ",\"dim\":" + std::to_string(v.size()) +
                     ",\"model\":" + nlohmann::json(model).dump() + ",\"vector\":[";
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) line += ',';
    line += format_real(v(i));
  }
  return line + "]}";
}

inline void write_embeddings(const std::filesystem::path& path, const EmbeddingMatrix& m) {
  m.validate();
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw Error(Errc::Io, "cannot write " + path.string());
  for (Eigen::Index i = 0; i < m.size(); ++i)
    out << embedding_line(m.ids[static_cast<std::size_t>(i)], m.model_tag, m.rows.row(i)) << '\n';
}

/// Reads an embeddings file in file order. Every line must declare the same
/// dim and model.
inline EmbeddingMatrix read_embeddings(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(Errc::MissingFile, path.string());
  EmbeddingMatrix m;
  std::vector<std::vector<double>> rows;
  std::string line;
  std::size_t lineno = 0;
  long dim = -1;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::exception& e) {
      throw MalformedRecordError(lineno, e.what());
    }
    if (!j.is_object() || !j.contains("id") || !j.contains("vector") || !j["id"].is_string() ||
        !j["vector"].is_array())
      throw MalformedRecordError(lineno, "expected {id, dim, model, vector}");
    auto vec = j["vector"].get<std::vector<double>>();
    const long declared = j.value("dim", static_cast<long>(vec.size()));
    if (declared != static_cast<long>(vec.size()))
      throw Error(Errc::DimensionMismatch, "line " + std::to_string(lineno) + ": dim " + std::to_string(declared) +
                                               " but vector has " + std::to_string(vec.size()) + " entries");
    if (dim < 0) dim = declared;
    if (declared != dim)
      throw Error(Errc::DimensionMismatch, "line " + std::to_string(lineno) + ": dim " + std::to_string(declared) +
                                               " differs from " + std::to_string(dim));
    const std::string model = j.value("model", std::string{});
    if (lineno == 1 || m.ids.empty()) {
      m.model_tag = model;
    } else if (model != m.model_tag) {
      throw Error(Errc::InvalidArgument, "line " + std::to_string(lineno) + ": mixed embedding models");
    }
    m.ids.push_back(j["id"].get<std::string>());
    rows.push_back(std::move(vec));
  }
  m.rows.resize(static_cast<Eigen::Index>(rows.size()), dim < 0 ? 0 : dim);
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t k = 0; k < rows[i].size(); ++k) m.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k)) = rows[i][k];
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Providers

/// Deterministic pseudo-embedding: a unit vector seeded by the text's hash.
/// Equal texts give equal rows; the value is meaningless semantically.
inline Eigen::RowVectorXd stub_embedding(std::string_view text, int dim) {
  std::mt19937_64 rng(mix64(fnv1a(text)));
  Eigen::RowVectorXd v(dim);
  for (int i = 0; i < dim; ++i) v(i) = standard_normal(rng);
  return v / v.norm();
}

namespace detail {

inline EmbeddingMatrix embed_remote(const SolutionSet& set, const EmbeddingProviderSpec& spec) {
  std::string key;
  if (!spec.api_key_env.empty()) {
    const char* v = std::getenv(spec.api_key_env.c_str());
    if (v == nullptr || *v == '\0')
      throw Error(Errc::Config, "environment variable " + spec.api_key_env + " is not set");
    key = v;
  }
  EmbeddingMatrix m;
  m.model_tag = spec.model_tag;
  m.rows.resize(static_cast<Eigen::Index>(set.size()), spec.dim);
  const std::size_t batch = static_cast<std::size_t>(std::max(1, spec.batch_size));
  for (std::size_t start = 0; start < set.size(); start += batch) {
    const std::size_t end = std::min(set.size(), start + batch);
    nlohmann::json input = nlohmann::json::array();
    for (std::size_t i = start; i < end; ++i) input.push_back(set.records[i].text);
    const auto res = post_json(spec.location, {{"model", spec.model_tag}, {"input", input}}, key);
    if (!res.contains("data") || !res["data"].is_array() || res["data"].size() != end - start)
      throw ProviderError(200, "embedding response has wrong number of rows");
    for (std::size_t k = 0; k < end - start; ++k) {
      const auto& item = res["data"][k];
      const std::size_t idx = item.value("index", k);
      const auto vec = item.at("embedding").get<std::vector<double>>();
      if (static_cast<int>(vec.size()) != spec.dim)
        throw Error(Errc::DimensionMismatch, "remote returned dim " + std::to_string(vec.size()) +
                                                 ", expected " + std::to_string(spec.dim));
      if (idx >= end - start) throw ProviderError(200, "embedding index out of range");
      for (int c = 0; c < spec.dim; ++c) m.rows(static_cast<Eigen::Index>(start + idx), c) = vec[static_cast<std::size_t>(c)];
    }
  }
  for (const auto& r : set.records) m.ids.push_back(r.id);
  return m;
}

inline EmbeddingMatrix embed_from_file(const SolutionSet& set, const EmbeddingProviderSpec& spec) {
  if (!std::filesystem::exists(spec.location)) throw Error(Errc::MissingFile, spec.location);
  const EmbeddingMatrix all = read_embeddings(spec.location);
  if (all.dim() != spec.dim)
    throw Error(Errc::DimensionMismatch, spec.location + " has dim " + std::to_string(all.dim()) + ", expected " +
                                             std::to_string(spec.dim));
  if (!spec.model_tag.empty() && all.model_tag != spec.model_tag)
    throw Error(Errc::InvalidArgument, spec.location + " was embedded with '" + all.model_tag + "', expected '" +
                                           spec.model_tag + "'");
  std::unordered_map<std::string, Eigen::Index> index;
  for (std::size_t i = 0; i < all.ids.size(); ++i) index.emplace(all.ids[i], static_cast<Eigen::Index>(i));
  std::vector<Eigen::Index> which;
  for (const auto& r : set.records) {
    auto it = index.find(r.id);
    if (it == index.end()) throw Error(Errc::MissingEmbedding, r.id);
    which.push_back(it->second);
  }
  return all.select(which);
}

}  // namespace detail

/// One row per record, in record order.
inline EmbeddingMatrix embed_set(const SolutionSet& set, const EmbeddingProviderSpec& spec) {
  if (set.records.empty()) throw Error(Errc::InvalidArgument, "cannot embed an empty set");
  if (spec.dim < 1) throw Error(Errc::DimensionMismatch, "embedding dim must be positive");
  EmbeddingMatrix m;
  switch (spec.kind) {
    case EmbeddingKind::stub:
      m.model_tag = spec.model_tag;
      m.rows.resize(static_cast<Eigen::Index>(set.size()), spec.dim);
      for (std::size_t i = 0; i < set.size(); ++i) {
        m.rows.row(static_cast<Eigen::Index>(i)) = stub_embedding(set.records[i].text, spec.dim);
        m.ids.push_back(set.records[i].id);
      }
      break;
    case EmbeddingKind::remote:
      m = detail::embed_remote(set, spec);
      break;
    case EmbeddingKind::file:
      m = detail::embed_from_file(set, spec);
      break;
  }
  m.validate();
  return m;
}

/// Scales every row to unit Euclidean norm.
inline EmbeddingMatrix l2_normalize(const EmbeddingMatrix& m) {
  EmbeddingMatrix out = m;
  for (Eigen::Index i = 0; i < out.size(); ++i) {
    const double n = out.rows.row(i).norm();
    if (!(n > 0.0)) throw Error(Errc::ZeroVector, m.ids[static_cast<std::size_t>(i)]);
    out.rows.row(i) /= n;
  }
  return out;
}

}  // namespace divbench
