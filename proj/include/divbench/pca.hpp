#pragma once

#include <cmath>
#include <limits>
#include <string>

#include <Eigen/Dense>
#include <Eigen/SVD>

#include "divbench/embedding.hpp"
#include "divbench/error.hpp"

namespace divbench {

struct PcaBasis {
  Eigen::RowVectorXd mean;
  Eigen::MatrixXd components;          // k x dim, orthonormal rows
  Eigen::VectorXd explained_variance;  // k, non-increasing
  double total_variance = 0.0;         // trace of the sample covariance
  std::string fitted_on;

  Eigen::Index k() const noexcept { return components.rows(); }
  Eigen::Index dim() const noexcept { return components.cols(); }

  Eigen::VectorXd explained_variance_ratio() const {
    return total_variance > 0.0 ? Eigen::VectorXd(explained_variance / total_variance)
                                : Eigen::VectorXd::Zero(explained_variance.size());
  }
};

/// Top-k principal directions of the mean-centred rows, from the thin SVD.
/// explained_variance holds squared singular values over (n - 1).
///
/// Throws RankDeficient when fewer than k singular values are numerically
/// non-zero; the caller may retry with a smaller k.
inline PcaBasis pca_fit(const EmbeddingMatrix& pooled, Eigen::Index k, std::string label = {}) {
  const Eigen::Index n = pooled.size();
  const Eigen::Index d = pooled.dim();
  if (n < 2) throw Error(Errc::InvalidArgument, "PCA needs at least two rows");
  if (k < 1 || k > std::min(n - 1, d))
    throw Error(Errc::RankDeficient, "k=" + std::to_string(k) + " exceeds min(n-1, dim)=" +
                                         std::to_string(std::min(n - 1, d)));

  PcaBasis basis;
  basis.fitted_on = std::move(label);
  basis.mean = pooled.rows.colwise().mean();
  const Eigen::MatrixXd centered = pooled.rows.rowwise() - basis.mean;

  Eigen::BDCSVD<Eigen::MatrixXd> svd(centered, Eigen::ComputeThinV);
  const Eigen::VectorXd& s = svd.singularValues();
  const double tol = (s.size() ? s(0) : 0.0) * static_cast<double>(std::max(n, d)) *
                     std::numeric_limits<double>::epsilon();
  Eigen::Index available = 0;
  while (available < s.size() && s(available) > tol) ++available;
  if (available < k)
    throw Error(Errc::RankDeficient, "requested k=" + std::to_string(k) + " but only " +
                                         std::to_string(available) + " non-zero singular values");

  basis.components = svd.matrixV().leftCols(k).transpose();
  basis.explained_variance = s.head(k).array().square() / static_cast<double>(n - 1);
  basis.total_variance = s.squaredNorm() / static_cast<double>(n - 1);
  return basis;
}

/// Maps rows to (row - mean) * components^T.
inline EmbeddingMatrix pca_project(const PcaBasis& basis, const EmbeddingMatrix& m) {
  if (m.dim() != basis.dim())
    throw Error(Errc::DimensionMismatch, "matrix dim " + std::to_string(m.dim()) + " vs basis dim " +
                                             std::to_string(basis.dim()));
  EmbeddingMatrix out;
  out.ids = m.ids;
  out.model_tag = m.model_tag;
  out.rows = (m.rows.rowwise() - basis.mean) * basis.components.transpose();
  return out;
}

}  // namespace divbench
