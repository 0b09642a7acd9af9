#pragma once

// Exact convex-hull volume in d dimensions by incremental (beneath-beyond)
// construction.
//
// Facets are (d-1)-simplices stored with an outward unit normal, their offset,
// and `measure` = (d-1)! times their (d-1)-volume. When a point p is inserted,
// the region it adds to the hull is the union of the cones from p over the
// facets it sees, so the volume grows by sum(dist(p, F) * measure(F)) / d!
// over visible facets F. No final triangulation pass is needed.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <span>
#include <string>
#include <vector>

#include "divbench/embedding.hpp"
#include "divbench/error.hpp"

namespace divbench {

struct HullOptions {
  /// Abort once this many facets are alive at once.
  std::size_t facet_budget = 5'000'000;
  /// Visibility tolerance relative to the bounding-box diagonal.
  double relative_eps = 1e-11;
};

struct HullResult {
  double volume = 0.0;
  std::size_t facets = 0;         // live facets of the final hull
  std::size_t facets_created = 0;
};

namespace detail {

class BeneathBeyond {
 public:
  BeneathBeyond(std::span<const double> pts, std::size_t n, std::size_t d, const HullOptions& opt)
      : pts_(pts), n_(n), d_(d), opt_(opt) {}

  HullResult run() {
    factorial_ = 1.0;
    for (std::size_t k = 2; k <= d_; ++k) factorial_ *= static_cast<double>(k);
    const auto simplex = initial_simplex();
    // Interior reference point: centroid of the starting simplex.
    interior_.assign(d_, 0.0);
    for (auto v : simplex)
      for (std::size_t k = 0; k < d_; ++k) interior_[k] += pt(v)[k] / static_cast<double>(d_ + 1);

    double volume = simplex_volume(simplex);
    build_initial_facets(simplex);

    std::vector<char> used(n_, 0);
    for (auto v : simplex) used[v] = 1;
    for (std::size_t p = 0; p < n_; ++p) {
      if (used[p]) continue;
      volume += insert(static_cast<std::uint32_t>(p));
    }
    HullResult r;
    r.volume = volume;
    r.facets = live_;
    r.facets_created = created_;
    return r;
  }

 private:
  const double* pt(std::size_t i) const { return pts_.data() + i * d_; }
  double* normal(std::uint32_t f) { return normals_.data() + static_cast<std::size_t>(f) * d_; }
  std::uint32_t* verts(std::uint32_t f) { return verts_.data() + static_cast<std::size_t>(f) * d_; }
  std::uint32_t* nbrs(std::uint32_t f) { return nbrs_.data() + static_cast<std::size_t>(f) * d_; }

  double dist(std::uint32_t f, const double* p) {
    const double* nrm = normal(f);
    double s = 0.0;
    for (std::size_t k = 0; k < d_; ++k) s += nrm[k] * p[k];
    return s - offsets_[f];
  }

  // Greedy choice of d+1 affinely independent points, each maximizing its
  // distance from the affine span of those already chosen.
  std::vector<std::uint32_t> initial_simplex() {
    std::vector<double> lo(d_, std::numeric_limits<double>::infinity());
    std::vector<double> hi(d_, -std::numeric_limits<double>::infinity());
    for (std::size_t i = 0; i < n_; ++i)
      for (std::size_t k = 0; k < d_; ++k) {
        lo[k] = std::min(lo[k], pt(i)[k]);
        hi[k] = std::max(hi[k], pt(i)[k]);
      }
    double diag2 = 0.0;
    for (std::size_t k = 0; k < d_; ++k) diag2 += (hi[k] - lo[k]) * (hi[k] - lo[k]);
    scale_ = std::sqrt(diag2);
    eps_ = opt_.relative_eps * scale_;
    if (!(scale_ > 0.0)) throw Error(Errc::DegenerateHull, "all points coincide");

    std::vector<std::uint32_t> chosen;
    std::size_t first = 0;
    for (std::size_t i = 1; i < n_; ++i)
      if (pt(i)[0] < pt(first)[0]) first = i;
    chosen.push_back(static_cast<std::uint32_t>(first));

    std::vector<std::vector<double>> basis;  // orthonormal span of chosen - chosen[0]
    std::vector<double> r(d_);
    while (chosen.size() < d_ + 1) {
      double best = -1.0;
      std::size_t best_i = 0;
      std::vector<double> best_r;
      for (std::size_t i = 0; i < n_; ++i) {
        for (std::size_t k = 0; k < d_; ++k) r[k] = pt(i)[k] - pt(first)[k];
        for (int pass = 0; pass < 2; ++pass)
          for (const auto& q : basis) {
            double c = 0.0;
            for (std::size_t k = 0; k < d_; ++k) c += q[k] * r[k];
            for (std::size_t k = 0; k < d_; ++k) r[k] -= c * q[k];
          }
        double nn = 0.0;
        for (double x : r) nn += x * x;
        if (nn > best) {
          best = nn;
          best_i = i;
          best_r = r;
        }
      }
      const double len = std::sqrt(best);
      if (!(len > 1e3 * eps_))
        throw Error(Errc::DegenerateHull, "points are affinely dependent (span has dimension " +
                                              std::to_string(chosen.size() - 1) + " < " + std::to_string(d_) + ")");
      for (double& x : best_r) x /= len;
      basis.push_back(std::move(best_r));
      chosen.push_back(static_cast<std::uint32_t>(best_i));
    }
    return chosen;
  }

  double simplex_volume(const std::vector<std::uint32_t>& s) const {
    // |det(v_k - v_0)| / d! by Gaussian elimination with partial pivoting.
    std::vector<double> a(d_ * d_);
    for (std::size_t r = 0; r < d_; ++r)
      for (std::size_t c = 0; c < d_; ++c) a[r * d_ + c] = pt(s[r + 1])[c] - pt(s[0])[c];
    double det = 1.0;
    for (std::size_t c = 0; c < d_; ++c) {
      std::size_t piv = c;
      for (std::size_t r = c + 1; r < d_; ++r)
        if (std::abs(a[r * d_ + c]) > std::abs(a[piv * d_ + c])) piv = r;
      if (a[piv * d_ + c] == 0.0) return 0.0;
      if (piv != c)
        for (std::size_t k = 0; k < d_; ++k) std::swap(a[c * d_ + k], a[piv * d_ + k]);
      det *= a[c * d_ + c];
      for (std::size_t r = c + 1; r < d_; ++r) {
        const double f = a[r * d_ + c] / a[c * d_ + c];
        for (std::size_t k = c; k < d_; ++k) a[r * d_ + k] -= f * a[c * d_ + k];
      }
    }
    return std::abs(det) / factorial_;
  }

  std::uint32_t allocate() {
    ++created_;
    ++live_;
    if (live_ > opt_.facet_budget)
      throw Error(Errc::FacetBudgetExceeded, "more than " + std::to_string(opt_.facet_budget) +
                                                 " live facets; lower the hull dimension");
    if (!free_.empty()) {
      const auto f = free_.back();
      free_.pop_back();
      alive_[f] = 1;
      return f;
    }
    const auto f = static_cast<std::uint32_t>(offsets_.size());
    offsets_.push_back(0.0);
    measures_.push_back(0.0);
    alive_.push_back(1);
    marks_.push_back(0);
    verts_.resize(verts_.size() + d_);
    nbrs_.resize(nbrs_.size() + d_);
    normals_.resize(normals_.size() + d_);
    return f;
  }

  void release(std::uint32_t f) {
    alive_[f] = 0;
    free_.push_back(f);
    --live_;
  }

  // Outward unit normal by Gram-Schmidt: orthogonalize the facet's edges, then
  // the direction towards the interior point; the residual of the latter is
  // the inward normal. The product of edge residual norms is the facet measure.
  void compute_plane(std::uint32_t f) {
    const std::uint32_t* v = verts(f);
    const double* o = pt(v[0]);
    q_.resize((d_ - 1) * d_);
    double measure = 1.0;
    for (std::size_t e = 0; e + 1 < d_; ++e) {
      double* qe = q_.data() + e * d_;
      for (std::size_t k = 0; k < d_; ++k) qe[k] = pt(v[e + 1])[k] - o[k];
      for (int pass = 0; pass < 2; ++pass)
        for (std::size_t j = 0; j < e; ++j) {
          const double* qj = q_.data() + j * d_;
          double c = 0.0;
          for (std::size_t k = 0; k < d_; ++k) c += qj[k] * qe[k];
          for (std::size_t k = 0; k < d_; ++k) qe[k] -= c * qj[k];
        }
      double nn = 0.0;
      for (std::size_t k = 0; k < d_; ++k) nn += qe[k] * qe[k];
      const double len = std::sqrt(nn);
      measure *= len;
      if (len > 0.0)
        for (std::size_t k = 0; k < d_; ++k) qe[k] /= len;
    }
    double* w = normal(f);
    for (std::size_t k = 0; k < d_; ++k) w[k] = interior_[k] - o[k];
    for (int pass = 0; pass < 2; ++pass)
      for (std::size_t j = 0; j + 1 < d_; ++j) {
        const double* qj = q_.data() + j * d_;
        double c = 0.0;
        for (std::size_t k = 0; k < d_; ++k) c += qj[k] * w[k];
        for (std::size_t k = 0; k < d_; ++k) w[k] -= c * qj[k];
      }
    double nn = 0.0;
    for (std::size_t k = 0; k < d_; ++k) nn += w[k] * w[k];
    const double len = std::sqrt(nn);
    if (!(len > 0.0)) throw Error(Errc::DegenerateHull, "facet plane passes through the interior point");
    double off = 0.0;
    for (std::size_t k = 0; k < d_; ++k) {
      w[k] = -w[k] / len;
      off += w[k] * o[k];
    }
    offsets_[f] = off;
    measures_[f] = measure;
  }

  void build_initial_facets(const std::vector<std::uint32_t>& s) {
    // Facet i omits simplex vertex i.
    std::vector<std::uint32_t> ids(d_ + 1);
    for (std::size_t i = 0; i <= d_; ++i) ids[i] = allocate();
    for (std::size_t i = 0; i <= d_; ++i) {
      std::size_t slot = 0;
      for (std::size_t j = 0; j <= d_; ++j) {
        if (j == i) continue;
        verts(ids[i])[slot] = s[j];
        nbrs(ids[i])[slot] = ids[j];  // across vertex j lies the facet omitting j
        ++slot;
      }
      compute_plane(ids[i]);
    }
  }

  struct RidgeKey {
    std::uint64_t hash;
    std::uint32_t facet;
    std::uint32_t slot;
  };

  // Inserts point p; returns the volume it adds.
  double insert(std::uint32_t p) {
    const double* x = pt(p);
    ++epoch_;
    visible_.clear();
    double added = 0.0;
    for (std::uint32_t f = 0; f < offsets_.size(); ++f) {
      if (!alive_[f]) continue;
      const double h = dist(f, x);
      if (h > eps_) {
        marks_[f] = epoch_;
        visible_.push_back(f);
        added += h * measures_[f];
      }
    }
    if (visible_.empty()) return 0.0;

    // Horizon ridges: (visible facet, slot) pairs whose neighbor is not visible.
    fresh_.clear();
    for (auto vf : visible_) {
      for (std::size_t j = 0; j < d_; ++j) {
        const std::uint32_t u = nbrs(vf)[j];
        if (marks_[u] == epoch_) continue;
        const std::uint32_t nf = allocate();
        std::copy_n(verts(vf), d_, verts(nf));
        std::copy_n(nbrs(vf), d_, nbrs(nf));
        verts(nf)[j] = p;
        nbrs(nf)[j] = u;
        for (std::size_t k = 0; k < d_; ++k)
          if (nbrs(u)[k] == vf) {
            nbrs(u)[k] = nf;
            break;
          }
        apex_slot_.resize(std::max<std::size_t>(apex_slot_.size(), nf + 1));
        apex_slot_[nf] = static_cast<std::uint32_t>(j);
        fresh_.push_back(nf);
      }
    }

    // Link the new facets to each other: a ridge through p is identified by
    // the other d-2 vertices it contains.
    keys_.clear();
    key_verts_.clear();
    const std::size_t klen = d_ - 2;
    for (auto nf : fresh_) {
      const std::uint32_t apex = apex_slot_[nf];
      for (std::size_t k = 0; k < d_; ++k) {
        if (k == apex) continue;
        const std::size_t at = key_verts_.size();
        for (std::size_t m = 0; m < d_; ++m)
          if (m != k && m != apex) key_verts_.push_back(verts(nf)[m]);
        std::sort(key_verts_.begin() + static_cast<std::ptrdiff_t>(at), key_verts_.end());
        std::uint64_t h = 0xcbf29ce484222325ULL;
        for (std::size_t m = at; m < key_verts_.size(); ++m) {
          h ^= key_verts_[m];
          h *= 0x100000001b3ULL;
          h ^= h >> 29;
        }
        keys_.push_back({h, nf, static_cast<std::uint32_t>(k)});
      }
    }
    order_.resize(keys_.size());
    std::iota(order_.begin(), order_.end(), std::size_t{0});
    auto key_less = [&](std::size_t a, std::size_t b) {
      if (keys_[a].hash != keys_[b].hash) return keys_[a].hash < keys_[b].hash;
      return std::lexicographical_compare(key_verts_.begin() + static_cast<std::ptrdiff_t>(a * klen),
                                          key_verts_.begin() + static_cast<std::ptrdiff_t>((a + 1) * klen),
                                          key_verts_.begin() + static_cast<std::ptrdiff_t>(b * klen),
                                          key_verts_.begin() + static_cast<std::ptrdiff_t>((b + 1) * klen));
    };
    std::sort(order_.begin(), order_.end(), key_less);
    for (std::size_t i = 0; i < order_.size(); i += 2) {
      if (i + 1 >= order_.size() || key_less(order_[i], order_[i + 1]))
        throw Error(Errc::DegenerateHull, "inconsistent horizon (numerically degenerate input)");
      const auto& a = keys_[order_[i]];
      const auto& b = keys_[order_[i + 1]];
      nbrs(a.facet)[a.slot] = b.facet;
      nbrs(b.facet)[b.slot] = a.facet;
    }

    for (auto nf : fresh_) compute_plane(nf);
    for (auto vf : visible_) release(vf);
    return added / factorial_;
  }

  std::span<const double> pts_;
  std::size_t n_;
  std::size_t d_;
  HullOptions opt_;
  double scale_ = 0.0;
  double eps_ = 0.0;
  double factorial_ = 1.0;
  std::vector<double> interior_;

  std::vector<std::uint32_t> verts_, nbrs_;
  std::vector<double> normals_, offsets_, measures_;
  std::vector<char> alive_;
  std::vector<std::uint32_t> marks_;
  std::vector<std::uint32_t> free_;
  std::uint32_t epoch_ = 0;
  std::size_t live_ = 0;
  std::size_t created_ = 0;

  std::vector<double> q_;
  std::vector<std::uint32_t> visible_, fresh_, apex_slot_, key_verts_;
  std::vector<RidgeKey> keys_;
  std::vector<std::size_t> order_;
};

}  // namespace detail

/// Volume of the convex hull of n points in d dimensions (row-major).
///
/// Throws DegenerateHull when the points do not span d dimensions and
/// FacetBudgetExceeded when the hull outgrows the facet budget.
inline HullResult convex_hull_volume(std::span<const double> points, std::size_t n, std::size_t d,
                                     const HullOptions& opt = {}) {
  if (d == 0 || points.size() != n * d) throw Error(Errc::InvalidArgument, "point buffer does not match n x d");
  for (double v : points)
    if (!std::isfinite(v)) throw Error(Errc::InvalidArgument, "non-finite coordinate");
  if (n < d + 1)
    throw Error(Errc::DegenerateHull, std::to_string(n) + " points cannot span " + std::to_string(d) + " dimensions");

  // Work relative to the centroid; volume is translation invariant.
  std::vector<double> centered(points.begin(), points.end());
  for (std::size_t k = 0; k < d; ++k) {
    double mean = 0.0;
    for (std::size_t i = 0; i < n; ++i) mean += points[i * d + k];
    mean /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) centered[i * d + k] -= mean;
  }

  if (d == 1) {
    const auto [lo, hi] = std::minmax_element(centered.begin(), centered.end());
    if (!(*hi > *lo)) throw Error(Errc::DegenerateHull, "all points coincide");
    return {*hi - *lo, 2, 2};
  }
  return detail::BeneathBeyond(centered, n, d, opt).run();
}

inline double hull_volume(const EmbeddingMatrix& m, const HullOptions& opt = {}) {
  const auto n = static_cast<std::size_t>(m.size());
  const auto d = static_cast<std::size_t>(m.dim());
  std::vector<double> flat(n * d);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k)
      flat[i * d + k] = m.rows(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(k));
  return convex_hull_volume(flat, n, d, opt).volume;
}

}  // namespace divbench
