#pragma once

// Set-level diversity scores over embedding rows.

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>

#include "divbench/embedding.hpp"
#include "divbench/error.hpp"

namespace divbench {

/// Log of the smallest determinant still treated as non-singular.
inline const double kDppLogDetFloor = std::log(1e-300);

/// Log-determinant of the cosine-similarity kernel L = V V^T of unit rows.
///
/// Factorizes L by Cholesky; a pivot at rounding level (a row inside the span
/// of earlier rows, e.g. a duplicate) or a determinant below 1e-300 throws
/// DegenerateKernel. Rows must have unit norm (within 1e-6).
inline double dpp_score(const EmbeddingMatrix& m) {
  const Eigen::Index n = m.size();
  if (n < 2) throw Error(Errc::InvalidArgument, "DPP score needs at least two rows");
  for (Eigen::Index i = 0; i < n; ++i) {
    if (std::abs(m.rows.row(i).norm() - 1.0) > 1e-6)
      throw Error(Errc::NotNormalized, "row " + m.ids[static_cast<std::size_t>(i)] + " is not unit length");
  }
  Eigen::MatrixXd L = m.rows * m.rows.transpose();
  const double tiny = 64.0 * std::numeric_limits<double>::epsilon();
  double logdet = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    double pivot = L(j, j) - L.row(j).head(j).squaredNorm();
    if (!(pivot > tiny))
      throw Error(Errc::DegenerateKernel, "kernel is singular at row " + m.ids[static_cast<std::size_t>(j)]);
    const double root = std::sqrt(pivot);
    L(j, j) = root;
    for (Eigen::Index i = j + 1; i < n; ++i)
      L(i, j) = (L(i, j) - L.row(i).head(j).dot(L.row(j).head(j))) / root;
    logdet += std::log(pivot);
  }
  if (logdet <= kDppLogDetFloor) throw Error(Errc::DegenerateKernel, "determinant below 1e-300");
  return logdet;
}

/// Mean Euclidean distance from each row to its nearest other row.
inline double nearest_sample_score(const EmbeddingMatrix& m) {
  const Eigen::Index n = m.size();
  if (n < 2) throw Error(Errc::InvalidArgument, "nearest-sample score needs at least two rows");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    double best = std::numeric_limits<double>::infinity();
    for (Eigen::Index j = 0; j < n; ++j) {
      if (i == j) continue;
      best = std::min(best, (m.rows.row(i) - m.rows.row(j)).squaredNorm());
    }
    sum += std::sqrt(best);
  }
  return sum / static_cast<double>(n);
}

/// Mean Euclidean distance from the rows to their arithmetic centroid.
inline double centroid_distance_score(const EmbeddingMatrix& m) {
  const Eigen::Index n = m.size();
  if (n < 1) throw Error(Errc::InvalidArgument, "centroid distance needs at least one row");
  const Eigen::RowVectorXd c = m.rows.colwise().mean();
  return (m.rows.rowwise() - c).rowwise().norm().mean();
}

/// Relative change of x1 against the baseline x2, in percent. The absolute
/// value in the denominator keeps the sign meaningful for negative baselines.
inline double percent_change(double x1, double x2) {
  if (x2 == 0.0) throw Error(Errc::ZeroBaseline, "baseline value is zero");
  return (x1 - x2) / std::abs(x2) * 100.0;
}

}  // namespace divbench
