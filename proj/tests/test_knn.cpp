#include <gtest/gtest.h>

#include <algorithm>
#include <random>
#include <vector>

#include "support.hpp"
#include "tpvd/error.hpp"
#include "tpvd/knn.hpp"

namespace tpvd {
namespace {

// All-pairs reference ordered by (squared distance, index).
std::vector<std::size_t> brute_knn(const std::vector<Vec3>& pts, const Vec3& q, std::size_t k) {
  std::vector<std::pair<double, std::size_t>> d;
  for (std::size_t i = 0; i < pts.size(); ++i) {
    const double dx = pts[i].x - q.x, dy = pts[i].y - q.y, dz = pts[i].z - q.z;
    d.emplace_back(dx * dx + dy * dy + dz * dz, i);
  }
  std::sort(d.begin(), d.end());
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < k; ++i) out.push_back(d[i].second);
  return out;
}

std::vector<Vec3> random_cloud(std::mt19937_64& rng, std::size_t n, bool lattice) {
  std::vector<Vec3> pts;
  for (std::size_t i = 0; i < n; ++i) {
    if (lattice) {
      // Integer coordinates give many exact distance ties and duplicates.
      pts.push_back({double(test::uniform_int(rng, 0, 6)), double(test::uniform_int(rng, 0, 6)),
                     double(test::uniform_int(rng, 0, 6))});
    } else {
      pts.push_back({test::uniform(rng, -20, 20), test::uniform(rng, -5, 5), test::uniform(rng, 0, 60)});
    }
  }
  return pts;
}

TEST(Knn, PointIsItsOwnFirstNeighbour) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}, {10, 0, 0}};
  const KnnIndex index(pts);
  EXPECT_EQ(index.query_all(2), (std::vector<std::size_t>{0, 1, 1, 0, 2, 1}));
}

TEST(Knn, TiesGoToLowerIndex) {
  const std::vector<Vec3> pts{{2, 0, 0}, {-1, 0, 0}, {1, 0, 0}, {0, 1, 0}};
  for (auto method : {KnnIndex::Method::brute_force, KnnIndex::Method::kd_tree}) {
    const KnnIndex index(pts, method);
    EXPECT_EQ(index.query({0, 0, 0}, 3), (std::vector<std::size_t>{1, 2, 3}));
  }
}

TEST(Knn, DuplicatePointsOrderByIndex) {
  const std::vector<Vec3> pts{{1, 1, 1}, {1, 1, 1}, {1, 1, 1}};
  const KnnIndex index(pts, KnnIndex::Method::kd_tree);
  EXPECT_EQ(index.query_all(1), (std::vector<std::size_t>{0, 0, 0}));
}

TEST(Knn, KLargerThanSetThrows) {
  const std::vector<Vec3> pts{{0, 0, 0}, {1, 0, 0}};
  const KnnIndex index(pts);
  EXPECT_THROW(index.query({0, 0, 0}, 3), DomainError);
  EXPECT_EQ(index.query({0, 0, 0}, 2).size(), 2u);
}

TEST(Knn, MatchesBruteForceOracle) {
  std::mt19937_64 rng(41);
  for (bool lattice : {false, true}) {
    for (std::size_t n : {1u, 2u, 17u, 300u, 3000u}) {
      const auto pts = random_cloud(rng, n, lattice);
      const std::size_t k = std::min<std::size_t>(n, 9);
      for (auto method : {KnnIndex::Method::brute_force, KnnIndex::Method::kd_tree, KnnIndex::Method::automatic}) {
        const KnnIndex index(pts, method);
        for (int q = 0; q < 50; ++q) {
          const Vec3 query = q % 2 ? pts[test::uniform_int(rng, 0, int(n) - 1)]
                                   : Vec3{test::uniform(rng, -25, 25), test::uniform(rng, -8, 8), test::uniform(rng, -5, 65)};
          ASSERT_EQ(index.query(query, k), brute_knn(pts, query, k)) << "n=" << n << " lattice=" << lattice;
        }
      }
    }
  }
}

TEST(Knn, QueryAllMatchesIndividualQueries) {
  std::mt19937_64 rng(42);
  const auto pts = random_cloud(rng, 2000, true);
  const KnnIndex index(pts, KnnIndex::Method::kd_tree);
  const auto all = index.query_all(5);
  for (std::size_t i = 0; i < pts.size(); i += 37) {
    const auto one = brute_knn(pts, pts[i], 5);
    EXPECT_TRUE(std::equal(one.begin(), one.end(), all.begin() + i * 5));
  }
}

TEST(Knn, EmptyIndex) {
  const KnnIndex index(std::vector<Vec3>{});
  EXPECT_EQ(index.size(), 0u);
  EXPECT_THROW(index.query({0, 0, 0}, 1), DomainError);
}

}  // namespace
}  // namespace tpvd
