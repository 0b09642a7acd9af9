#include <chrono>
#include <random>

#include "divbench/hull.hpp"
#include "divbench/pca.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace divbench;

namespace {

std::vector<double> cube(std::size_t d) {
  std::vector<double> out;
  for (std::size_t mask = 0; mask < (std::size_t{1} << d); ++mask)
    for (std::size_t k = 0; k < d; ++k) out.push_back((mask >> k) & 1 ? 1.0 : 0.0);
  return out;
}

std::vector<double> simplex(std::size_t d) {
  std::vector<double> out(d, 0.0);
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t k = 0; k < d; ++k) out.push_back(i == k ? 1.0 : 0.0);
  return out;
}

std::vector<double> gaussian(std::size_t n, std::size_t d, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> out(n * d);
  for (auto& v : out) v = standard_normal(rng);
  return out;
}

double factorial(std::size_t d) {
  double f = 1;
  for (std::size_t i = 2; i <= d; ++i) f *= static_cast<double>(i);
  return f;
}

oracle::Matrix rows(const std::vector<double>& flat, std::size_t d) {
  oracle::Matrix out;
  for (std::size_t i = 0; i < flat.size(); i += d) out.emplace_back(flat.begin() + static_cast<long>(i), flat.begin() + static_cast<long>(i + d));
  return out;
}

// Shoelace area of the 2-D hull by gift wrapping.
double area_2d(const std::vector<double>& p) {
  const std::size_t n = p.size() / 2;
  std::size_t start = 0;
  for (std::size_t i = 1; i < n; ++i)
    if (p[2 * i] < p[2 * start]) start = i;
  std::vector<std::size_t> hull;
  std::size_t cur = start;
  do {
    hull.push_back(cur);
    std::size_t next = (cur + 1) % n;
    for (std::size_t i = 0; i < n; ++i) {
      const double cross = (p[2 * next] - p[2 * cur]) * (p[2 * i + 1] - p[2 * cur + 1]) -
                           (p[2 * next + 1] - p[2 * cur + 1]) * (p[2 * i] - p[2 * cur]);
      if (cross < 0) next = i;
    }
    cur = next;
  } while (cur != start && hull.size() <= n);
  double a = 0;
  for (std::size_t i = 0; i < hull.size(); ++i) {
    const auto u = hull[i], v = hull[(i + 1) % hull.size()];
    a += p[2 * u] * p[2 * v + 1] - p[2 * v] * p[2 * u + 1];
  }
  return std::abs(a) / 2;
}

}  // namespace

TEST(Hull, UnitHypercube) {
  for (std::size_t d = 2; d <= 6; ++d) {
    const auto pts = cube(d);
    EXPECT_NEAR(convex_hull_volume(pts, pts.size() / d, d).volume, 1.0, 1e-9) << "d=" << d;
  }
}

TEST(Hull, StandardSimplex) {
  for (std::size_t d = 2; d <= 6; ++d) {
    const auto pts = simplex(d);
    EXPECT_NEAR(convex_hull_volume(pts, d + 1, d).volume, 1.0 / factorial(d), 1e-9) << "d=" << d;
  }
  EXPECT_NEAR(convex_hull_volume(simplex(3), 4, 3).volume, 1.0 / 6.0, 1e-15);
}

TEST(Hull, InteriorPointsDoNotChangeVolume) {
  auto pts = cube(3);
  for (double v : {0.5, 0.5, 0.5, 0.1, 0.9, 0.3, 0.2, 0.2, 0.8}) pts.push_back(v);
  EXPECT_NEAR(convex_hull_volume(pts, 11, 3).volume, 1.0, 1e-12);
}

TEST(Hull, MatchesShoelaceIn2D) {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const auto pts = gaussian(40, 2, seed);
    EXPECT_NEAR(convex_hull_volume(pts, 40, 2).volume, area_2d(pts), 1e-10) << seed;
  }
}

TEST(Hull, MatchesMonteCarloIn4D) {
  const auto pts = gaussian(30, 4, 2024);
  const double exact = convex_hull_volume(pts, 30, 4).volume;
  const double mc = oracle::monte_carlo_hull_volume(rows(pts, 4), 1'000'000, 99);
  EXPECT_NEAR(mc / exact, 1.0, 0.02) << "exact " << exact << " mc " << mc;
}

TEST(Hull, TranslationRotationScale) {
  const std::size_t n = 25, d = 4;
  const auto pts = gaussian(n, d, 5);
  const double v = convex_hull_volume(pts, n, d).volume;

  auto shifted = pts;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < d; ++k) shifted[i * d + k] += 100.0 + static_cast<double>(k);
  EXPECT_NEAR(convex_hull_volume(shifted, n, d).volume, v, 1e-9 * v);

  // Random orthogonal matrix from a QR factorization.
  std::mt19937_64 rng(6);
  Eigen::MatrixXd a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = standard_normal(rng);
  const Eigen::MatrixXd q = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ();
  std::vector<double> rotated(pts.size());
  for (std::size_t i = 0; i < n; ++i) {
    const Eigen::Map<const Eigen::VectorXd> x(&pts[i * d], static_cast<Eigen::Index>(d));
    Eigen::Map<Eigen::VectorXd>(&rotated[i * d], static_cast<Eigen::Index>(d)) = q * x;
  }
  EXPECT_NEAR(convex_hull_volume(rotated, n, d).volume, v, 1e-9 * v);

  auto scaled = pts;
  for (auto& x : scaled) x *= 1.7;
  EXPECT_NEAR(convex_hull_volume(scaled, n, d).volume, std::pow(1.7, 4) * v, 1e-9 * v);
}

TEST(Hull, Degenerate) {
  // Points on a plane in 3-D.
  std::vector<double> flat{0, 0, 0, 1, 0, 0, 0, 1, 0, 1, 1, 0, 0.5, 0.2, 0};
  EXPECT_ERRC(convex_hull_volume(flat, 5, 3), Errc::DegenerateHull);
  EXPECT_ERRC(convex_hull_volume(simplex(3), 3, 3), Errc::InvalidArgument);
  EXPECT_ERRC(convex_hull_volume(std::vector<double>(9, 0.0), 3, 3), Errc::DegenerateHull);
  std::vector<double> nan{0, 0, 1, NAN, 0, 1};
  EXPECT_ERRC(convex_hull_volume(nan, 3, 2), Errc::InvalidArgument);
  std::vector<double> line{1, 3, -2};
  EXPECT_DOUBLE_EQ(convex_hull_volume(line, 3, 1).volume, 5.0);
}

TEST(Hull, FacetBudget) {
  const auto pts = gaussian(50, 6, 1);
  HullOptions opt;
  opt.facet_budget = 100;
  EXPECT_ERRC(convex_hull_volume(pts, 50, 6, opt), Errc::FacetBudgetExceeded);
}

TEST(Hull, FiftyPointsAtThirteenDimensions) {
  // The default reduced dimension for hull volumes; slow but exact.
  std::mt19937_64 rng(13);
  EmbeddingMatrix m;
  m.rows.resize(50, 384);
  for (Eigen::Index i = 0; i < 50; ++i) {
    m.ids.push_back(std::to_string(i));
    for (Eigen::Index k = 0; k < 384; ++k) m.rows(i, k) = standard_normal(rng);
  }
  const auto reduced = pca_project(pca_fit(m, 13), m);
  const auto t0 = std::chrono::steady_clock::now();
  std::vector<double> flat(50 * 13);
  for (Eigen::Index i = 0; i < 50; ++i)
    for (Eigen::Index k = 0; k < 13; ++k) flat[static_cast<std::size_t>(i * 13 + k)] = reduced.rows(i, k);
  const auto res = convex_hull_volume(flat, 50, 13);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  EXPECT_GT(res.volume, 0.0);
  EXPECT_TRUE(std::isfinite(res.volume));
  EXPECT_EQ(hull_volume(reduced), res.volume);
  std::cout << "k=13 hull: " << res.facets << " facets, " << res.facets_created << " created, " << secs << " s\n";
}
