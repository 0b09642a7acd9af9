#pragma once

#include <algorithm>
#include <cmath>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "divbench/error.hpp"

namespace divbench {

/// 1-based ranks; tied values share the average of the ranks they span.
inline std::vector<double> average_ranks(std::span<const double> v) {
  const std::size_t n = v.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return v[a] < v[b]; });
  std::vector<double> ranks(n);
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j + 1 < n && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = r;
    i = j + 1;
  }
  return ranks;
}

/// Spearman's rho as the Pearson correlation of average ranks.
inline double spearman(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw Error(Errc::InvalidArgument, "spearman inputs differ in length");
  if (x.size() < 2) throw Error(Errc::InvalidArgument, "spearman needs at least two observations");
  for (double v : x)
    if (!std::isfinite(v)) throw Error(Errc::InvalidArgument, "spearman input is not finite");
  for (double v : y)
    if (!std::isfinite(v)) throw Error(Errc::InvalidArgument, "spearman input is not finite");

  const auto rx = average_ranks(x);
  const auto ry = average_ranks(y);
  const double n = static_cast<double>(x.size());
  const double mean = (n + 1.0) / 2.0;  // ranks always average to (n+1)/2
  double sxy = 0.0, sxx = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < rx.size(); ++i) {
    sxy += (rx[i] - mean) * (ry[i] - mean);
    sxx += (rx[i] - mean) * (rx[i] - mean);
    syy += (ry[i] - mean) * (ry[i] - mean);
  }
  if (sxx == 0.0 || syy == 0.0) throw Error(Errc::ConstantInput, "spearman input is constant");
  return sxy / std::sqrt(sxx * syy);
}

}  // namespace divbench
