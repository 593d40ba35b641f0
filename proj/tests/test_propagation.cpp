#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "oracles.hpp"
#include "support.hpp"
#include "tpvd/error.hpp"
#include "tpvd/io.hpp"
#include "tpvd/propagation.hpp"
#include "tpvd/simd/kernels.hpp"

namespace tpvd {
namespace {

// Random field over a fixed neighbourhood with |w| summing to at most
// `budget` per pixel; fractional offsets when `fractional` is set.
AffinityField random_field(std::mt19937_64& rng, int h, int w, int slots, double budget, bool fractional,
                           bool signed_weights = false) {
  AffinityField f = AffinityField::empty(h, w, slots);
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      double total = 0.0;
      std::vector<double> ws(slots);
      for (int s = 0; s < slots; ++s) {
        ws[s] = test::uniform(rng, 0.0, 1.0);
        total += ws[s];
      }
      for (int s = 0; s < slots; ++s) {
        const auto i = f.at(s, r, c);
        double tr, tc;
        do {
          tr = fractional ? test::uniform(rng, 0.0, h - 1) : test::uniform_int(rng, 0, h - 1);
          tc = fractional ? test::uniform(rng, 0.0, w - 1) : test::uniform_int(rng, 0, w - 1);
        } while (tr == r && tc == c);
        f.dv[i] = tr - r;
        f.du[i] = tc - c;
        f.active[i] = 1;
        f.weight[i] = ws[s] / total * budget * (signed_weights && s % 2 ? -1.0 : 1.0);
      }
    }
  }
  return f;
}

void expect_close(const MaskedGrid& a, const MaskedGrid& b, double tol) {
  ASSERT_TRUE(a.same_shape(b));
  for (int r = 0; r < a.rows(); ++r) {
    for (int c = 0; c < a.cols(); ++c) {
      ASSERT_EQ(a.valid(r, c), b.valid(r, c)) << r << "," << c;
      EXPECT_NEAR(a.value(r, c), b.value(r, c), tol * (1 + std::abs(b.value(r, c)))) << r << "," << c;
    }
  }
}

TEST(SpnStep, ZeroWeightsAreIdentity) {
  std::mt19937_64 rng(61);
  const auto g = test::random_dense(rng, 7, 9);
  auto f = random_field(rng, 7, 9, 5, 0.8, true);
  std::fill(f.weight.begin(), f.weight.end(), 0.0);
  EXPECT_TRUE(spn_step(g, f) == g);
}

TEST(SpnStep, ConstantFieldIsFixed) {
  std::mt19937_64 rng(62);
  MaskedGrid g(6, 6);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) g.set(r, c, 4.0);
  }
  const auto out = spn_step(g, random_field(rng, 6, 6, 8, 0.95, true));
  for (double v : out.values()) EXPECT_NEAR(v, 4.0, 1e-13);
}

// Fully valid 5x5 grid: the step is a 25x25 matrix product.
TEST(SpnStep, MatchesDenseMatrixOracle) {
  std::mt19937_64 rng(63);
  for (int trial = 0; trial < 10; ++trial) {
    const auto g = test::random_dense(rng, 5, 5);
    const auto f = random_field(rng, 5, 5, 4, 0.9, trial % 2 == 1);
    const auto a = oracle::spn_matrix(f);
    const auto out = spn_step(g, f);
    for (int p = 0; p < 25; ++p) {
      double want = 0;
      for (int q = 0; q < 25; ++q) want += a[p * 25 + q] * g.values()[q];
      EXPECT_NEAR(out.values()[p], want, 1e-12);
    }
  }
}

TEST(SpnStep, MatchesRuleOracleWithHoles) {
  std::mt19937_64 rng(64);
  for (int trial = 0; trial < 30; ++trial) {
    const int h = test::uniform_int(rng, 2, 12), w = test::uniform_int(rng, 2, 12);
    const auto g = test::random_sparse(rng, h, w, test::uniform(rng, 0.05, 0.9));
    const auto f = random_field(rng, h, w, test::uniform_int(rng, 1, 9), test::uniform(rng, 0, 1), trial % 2 == 0,
                                trial % 3 == 0);
    expect_close(spn_step(g, f), oracle::spn(g, f), 1e-12);
  }
}

TEST(SpnStep, IsLinearOnValidGrids) {
  std::mt19937_64 rng(65);
  const auto x = test::random_dense(rng, 8, 8), y = test::random_dense(rng, 8, 8);
  const auto f = random_field(rng, 8, 8, 6, 0.9, true, true);
  MaskedGrid z(8, 8);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) z.set(r, c, 2.0 * x.value(r, c) - 3.0 * y.value(r, c));
  }
  const auto sx = spn_step(x, f), sy = spn_step(y, f), sz = spn_step(z, f);
  for (int r = 0; r < 8; ++r) {
    for (int c = 0; c < 8; ++c) EXPECT_NEAR(sz.value(r, c), 2.0 * sx.value(r, c) - 3.0 * sy.value(r, c), 1e-12);
  }
}

TEST(SpnStep, NonNegativeWeightsStayInRange) {
  std::mt19937_64 rng(66);
  for (int trial = 0; trial < 20; ++trial) {
    const auto g = test::random_sparse(rng, 10, 10, 0.5, 2.0, 9.0);
    const auto out = spn_step(g, random_field(rng, 10, 10, 8, 1.0, true));
    for (int r = 0; r < 10; ++r) {
      for (int c = 0; c < 10; ++c) {
        if (!out.valid(r, c)) continue;
        EXPECT_GE(out.value(r, c), 2.0 - 1e-12);
        EXPECT_LE(out.value(r, c), 9.0 + 1e-12);
      }
    }
  }
}

TEST(SpnStep, ValidSetOnlyGrows) {
  std::mt19937_64 rng(67);
  const auto g = test::random_sparse(rng, 10, 10, 0.2);
  const auto out = spn_step(g, random_field(rng, 10, 10, 3, 0.5, false));
  for (int r = 0; r < 10; ++r) {
    for (int c = 0; c < 10; ++c) {
      if (g.valid(r, c)) {
        EXPECT_TRUE(out.valid(r, c));
      }
    }
  }
}

TEST(SpnStep, SameResultOnEveryIsa) {
  std::mt19937_64 rng(68);
  const auto g = test::random_sparse(rng, 20, 30, 0.4);
  const auto f = random_field(rng, 20, 30, 9, 0.9, true, true);
  const auto before = simd::set_active_isa(simd::Isa::scalar);
  const auto ref = spn_step(g, f);
  for (auto isa : simd::available_isas()) {
    simd::set_active_isa(isa);
    EXPECT_TRUE(spn_step(g, f) == ref) << simd::isa_name(isa);
  }
  simd::set_active_isa(before);
}

TEST(SpnStep, RejectsBadFields) {
  MaskedGrid g(3, 3);
  EXPECT_THROW(spn_step(g, AffinityField::empty(3, 4, 1)), DimensionError);
  auto f = cspn_neighbors(3, 3);
  for (int s = 0; s < 8; ++s) f.weight[f.at(s, 1, 1)] = 0.2;
  EXPECT_THROW(spn_step(g, f), DomainError);
  f = cspn_neighbors(3, 3);
  f.weight[0] = NAN;
  EXPECT_THROW(spn_step(g, f), FormatError);
}

TEST(Cspn, NeighbourCounts) {
  const auto f = cspn_neighbors(4, 5);
  EXPECT_EQ(f.slots, 8);
  EXPECT_EQ(f.neighbour_count(1, 1), 8);
  EXPECT_EQ(f.neighbour_count(0, 2), 5);
  EXPECT_EQ(f.neighbour_count(0, 0), 3);
  EXPECT_EQ(cspn_neighbors(1, 1).neighbour_count(0, 0), 0);
}

TEST(Cspn, UniformWeightsOracle) {
  std::mt19937_64 rng(69);
  const auto g = test::random_dense(rng, 6, 6);
  auto f = cspn_neighbors(6, 6);
  for (std::size_t i = 0; i < f.weight.size(); ++i) f.weight[i] = f.active[i] ? 0.125 : 0.0;
  const auto out = spn_step(g, f);
  for (int r = 0; r < 6; ++r) {
    for (int c = 0; c < 6; ++c) {
      double sum = 0;
      int n = 0;
      for (int dr = -1; dr <= 1; ++dr) {
        for (int dc = -1; dc <= 1; ++dc) {
          if ((dr || dc) && g.in_bounds(r + dr, c + dc)) {
            sum += g.value(r + dr, c + dc);
            ++n;
          }
        }
      }
      EXPECT_NEAR(out.value(r, c), (1 - n / 8.0) * g.value(r, c) + sum / 8.0, 1e-14);
    }
  }
}

TEST(Nlspn, ZeroOffsetsAreInactive) {
  OffsetTable t{4, 4, 3, std::vector<double>(4 * 4 * 3 * 2, 0.0)};
  const auto f = nlspn_neighbors(4, 4, t);
  EXPECT_TRUE(std::all_of(f.active.begin(), f.active.end(), [](auto a) { return a == 0; }));
}

TEST(Nlspn, ReplicatingCspnOffsetsGivesSameField) {
  const int h = 5, w = 7;
  const auto cspn = cspn_neighbors(h, w);
  OffsetTable t{h, w, cspn.slots, {}};
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      for (int s = 0; s < cspn.slots; ++s) {
        t.data.push_back(cspn.du[cspn.at(s, r, c)]);
        t.data.push_back(cspn.dv[cspn.at(s, r, c)]);
      }
    }
  }
  EXPECT_TRUE(nlspn_neighbors(h, w, t) == cspn);
}

TEST(Nlspn, ClampsTargetsOntoBorder) {
  OffsetTable t{3, 3, 1, std::vector<double>(3 * 3 * 2, 0.0)};
  t.data[0] = -5.0;  // (0,0) pointing left of the grid: clamps onto itself
  t.data[2] = 10.0;  // (0,1) pointing right
  t.data[3] = 0.5;
  const auto f = nlspn_neighbors(3, 3, t);
  EXPECT_FALSE(f.active[f.at(0, 0, 0)]);
  EXPECT_TRUE(f.active[f.at(0, 0, 1)]);
  EXPECT_EQ(f.du[f.at(0, 0, 1)], 1.0);
  EXPECT_EQ(f.dv[f.at(0, 0, 1)], 0.5);
}

TEST(Nlspn, MalformedTableThrows) {
  EXPECT_THROW(nlspn_neighbors(3, 3, OffsetTable{3, 3, 2, std::vector<double>(5)}), FormatError);
  EXPECT_THROW(nlspn_neighbors(3, 3, OffsetTable{3, 4, 1, std::vector<double>(24)}), FormatError);
  OffsetTable t{1, 2, 1, {NAN, 0.0, 0.0, 0.0}};
  EXPECT_THROW(nlspn_neighbors(1, 2, t), FormatError);
}

TEST(Nlspn, OffsetsSurviveWeightFileRoundTrip) {
  std::mt19937_64 rng(70);
  const int h = 6, w = 5, n = 4;
  OffsetTable t{h, w, n, {}};
  for (int i = 0; i < h * w * n * 2; ++i) t.data.push_back(test::uniform_int(rng, -16, 16) / 8.0);
  auto field = nlspn_neighbors(h, w, t);
  for (std::size_t i = 0; i < field.weight.size(); ++i) {
    field.weight[i] = field.active[i] ? test::uniform_int(rng, 0, 8) / 64.0 : 0.0;
  }
  io::WeightFile file;
  io::add_affinity(file, field);
  const auto back = io::interpret_weights(io::parse_weights(io::serialize_weights(file)));
  ASSERT_TRUE(back.affinity);
  EXPECT_TRUE(*back.affinity == field);
}

TEST(NearestValidOffsets, FindsNearestFirstWithIndexTies) {
  MaskedGrid g(3, 3);
  g.set(0, 1, 1.0);
  g.set(1, 0, 1.0);
  g.set(2, 2, 1.0);
  const auto t = nearest_valid_offsets(g, 3);
  // From (1,1): (0,1) and (1,0) are both at distance 1, (0,1) has the lower index.
  const auto base = (1 * 3 + 1) * 3 * 2;
  EXPECT_EQ(t.data[base + 0], 0.0);
  EXPECT_EQ(t.data[base + 1], -1.0);
  EXPECT_EQ(t.data[base + 2], -1.0);
  EXPECT_EQ(t.data[base + 3], 0.0);
  EXPECT_EQ(t.data[base + 4], 1.0);
  EXPECT_EQ(t.data[base + 5], 1.0);
}

TEST(NearestValidOffsets, ExcludesSelfAndPads) {
  MaskedGrid g(2, 2);
  g.set(0, 0, 1.0);
  const auto t = nearest_valid_offsets(g, 2);
  EXPECT_EQ(std::vector<double>(t.data.begin(), t.data.begin() + 4), (std::vector<double>{0, 0, 0, 0}));
  EXPECT_EQ(std::vector<double>(t.data.begin() + 4, t.data.begin() + 8), (std::vector<double>{-1, 0, 0, 0}));
}

// Brute-force and ring search agree; sizes straddle the switch-over.
TEST(NearestValidOffsets, MatchesBruteForce) {
  std::mt19937_64 rng(71);
  for (double density : {0.05, 0.3, 0.9}) {
    const auto g = test::random_sparse(rng, 40, 50, density);
    const int n = 6;
    const auto t = nearest_valid_offsets(g, n);
    for (int r = 0; r < 40; r += 3) {
      for (int c = 0; c < 50; c += 7) {
        std::vector<std::pair<long, int>> cand;
        for (int rr = 0; rr < 40; ++rr) {
          for (int cc = 0; cc < 50; ++cc) {
            if (g.valid(rr, cc) && !(rr == r && cc == c)) {
              cand.push_back({long(rr - r) * (rr - r) + long(cc - c) * (cc - c), rr * 50 + cc});
            }
          }
        }
        std::sort(cand.begin(), cand.end());
        for (int s = 0; s < n; ++s) {
          const auto k = ((r * 50 + c) * n + s) * 2;
          ASSERT_EQ(t.data[k], cand[s].second % 50 - c);
          ASSERT_EQ(t.data[k + 1], cand[s].second / 50 - r);
        }
      }
    }
  }
}

TEST(Bilateral, WeightsSumToLambda) {
  std::mt19937_64 rng(72);
  const auto g = test::random_sparse(rng, 12, 12, 0.3);
  const auto guide = test::random_dense(rng, 12, 12, 0, 1);
  const BilateralParams p{0.2, 1.5, 0.7};
  for (const MaskedGrid* gd : {static_cast<const MaskedGrid*>(nullptr), &guide}) {
    const auto f = bilateral_affinity(nlspn_neighbors(12, 12, nearest_valid_offsets(g, 5)), gd, p);
    for (int r = 0; r < 12; ++r) {
      for (int c = 0; c < 12; ++c) {
        double s = 0;
        for (int k = 0; k < f.slots; ++k) s += f.weight[f.at(k, r, c)];
        if (f.neighbour_count(r, c) > 0) {
          EXPECT_NEAR(s, 0.7, 1e-12);
        }
      }
    }
    EXPECT_NO_THROW(f.validate());
  }
  EXPECT_THROW(bilateral_affinity(cspn_neighbors(2, 2), nullptr, {0.1, 2.0, 1.5}), DomainError);
}

TEST(Bilateral, DistantNeighboursDoNotUnderflow) {
  OffsetTable t{1, 600, 1, std::vector<double>(1200, 0.0)};
  t.data[0] = 599.0;
  const auto f = bilateral_affinity(nlspn_neighbors(1, 600, t), nullptr, {});
  EXPECT_EQ(f.weight[f.at(0, 0, 0)], 0.9);
  EXPECT_NO_THROW(f.validate());
}

TEST(Bilateral, CloserNeighboursWeighMore) {
  auto f = cspn_neighbors(3, 3);
  f = bilateral_affinity(f, nullptr, {});
  EXPECT_GT(f.weight[f.at(1, 1, 1)], f.weight[f.at(0, 1, 1)]);  // (dv, du) = (-1, 0) beats (-1, -1)
}

// ---------------------------------------------------------------------------

struct Coarse {
  CameraIntrinsics cam = CameraIntrinsics::for_image(8, 8);
  TpvViews views;
};

Coarse random_coarse(std::mt19937_64& rng, double density) {
  Coarse c;
  const auto s = test::random_sparse(rng, 8, 8, density, 2.0, 60.0);
  c.views = project_tpv(depth_to_points(s, c.cam), c.cam, DepthBinning::outdoor()).views;
  return c;
}

std::array<AffinityField, 3> zero_affinities(const TpvViews& v) {
  return {AffinityField::empty(v.front.rows(), v.front.cols(), 1), AffinityField::empty(v.top.rows(), v.top.cols(), 1),
          AffinityField::empty(v.side.rows(), v.side.cols(), 1)};
}

TEST(Gspn, ZeroAffinitiesOneIterationIsRetraction) {
  std::mt19937_64 rng(73);
  const auto c = random_coarse(rng, 0.3);
  GspnConfig cfg;
  cfg.iterations = 1;
  const auto res = gspn_refine(c.views, zero_affinities(c.views), c.cam, cfg);
  const auto want = fill_merge(c.views, project_tpv(unproject_tpv(c.views, c.cam), c.cam, cfg.binning).views);
  EXPECT_TRUE(res.views == want);
  // A decomposed cloud is already a fixed point.
  EXPECT_TRUE(res.views == c.views);
}

TEST(Gspn, MatchesCompositionOracle) {
  std::mt19937_64 rng(74);
  for (int trial = 0; trial < 5; ++trial) {
    const auto c = random_coarse(rng, 0.2);
    const auto aff = default_affinities(c.views, 4, nullptr, {});
    GspnConfig cfg;
    cfg.iterations = 3;
    cfg.point_map = PointwiseMap::linear({1, 0, 0, 0, 1, 0, 0, 0, 1.05}, {0.1, 0, 0}, 3, 3);
    const auto want = oracle::gspn(c.views, aff, c.cam, cfg);
    const auto got = gspn_refine(c.views, aff, c.cam, cfg);
    EXPECT_TRUE(got.views.front == want.back().front) << trial;
    EXPECT_TRUE(got.views.top == want.back().top) << trial;
    EXPECT_TRUE(got.views.side == want.back().side) << trial;
    for (int it = 0; it < 3; ++it) EXPECT_EQ(got.valid_counts[it][0], want[it].front.valid_count());
  }
}

TEST(Gspn, ValidCountsNeverShrink) {
  std::mt19937_64 rng(75);
  for (int trial = 0; trial < 5; ++trial) {
    const auto c = random_coarse(rng, 0.1);
    GspnConfig cfg;
    cfg.iterations = 5;
    const auto res = gspn_refine(c.views, default_affinities(c.views, 9, nullptr, {}), c.cam, cfg);
    ASSERT_EQ(res.valid_counts.size(), 5u);
    std::array<std::size_t, 3> prev{c.views.front.valid_count(), c.views.top.valid_count(),
                                    c.views.side.valid_count()};
    for (const auto& v : res.valid_counts) {
      for (int i = 0; i < 3; ++i) EXPECT_GE(v[i], prev[i]);
      prev = v;
    }
    EXPECT_EQ(res.views.front.valid_count(), 64u);
  }
}

TEST(Gspn, RejectsMismatches) {
  std::mt19937_64 rng(76);
  const auto c = random_coarse(rng, 0.3);
  GspnConfig cfg;
  cfg.binning = DepthBinning(0, 80, 128);
  EXPECT_THROW(gspn_refine(c.views, zero_affinities(c.views), c.cam, cfg), DimensionError);
  cfg = GspnConfig{};
  cfg.point_map = PointwiseMap::mean_pool();
  EXPECT_THROW(gspn_refine(c.views, zero_affinities(c.views), c.cam, cfg), DimensionError);
  cfg = GspnConfig{};
  auto aff = zero_affinities(c.views);
  aff[1] = AffinityField::empty(3, 3, 1);
  EXPECT_THROW(gspn_refine(c.views, aff, c.cam, cfg), DimensionError);
}

}  // namespace
}  // namespace tpvd
