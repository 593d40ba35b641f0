#include "tpvd/propagation.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "tpvd/error.hpp"
#include "tpvd/simd/kernels.hpp"

namespace tpvd {
namespace {

struct Sample {
  double value = 0.0;
  bool valid = false;
};

// Bilinear read at fractional (row, col), clamped to the grid. Only corners
// with a positive interpolation weight take part; invalid corners are
// dropped and the remaining weights renormalised.
Sample sample(const MaskedGrid& g, double row, double col) {
  const double y = std::clamp(row, 0.0, static_cast<double>(g.rows() - 1));
  const double x = std::clamp(col, 0.0, static_cast<double>(g.cols() - 1));
  const double y0f = std::floor(y);
  const double x0f = std::floor(x);
  const int y0 = static_cast<int>(y0f);
  const int x0 = static_cast<int>(x0f);
  const double fy = y - y0f;
  const double fx = x - x0f;
  if (fy == 0.0 && fx == 0.0) return {g.value(y0, x0), g.valid(y0, x0)};

  const int y1 = std::min(y0 + 1, g.rows() - 1);
  const int x1 = std::min(x0 + 1, g.cols() - 1);
  const int rows[4] = {y0, y0, y1, y1};
  const int cols[4] = {x0, x1, x0, x1};
  const double w[4] = {(1.0 - fy) * (1.0 - fx), (1.0 - fy) * fx, fy * (1.0 - fx), fy * fx};
  double all = 0.0;
  double part = 0.0;
  double part_w = 0.0;
  bool complete = true;
  for (int i = 0; i < 4; ++i) {
    if (w[i] <= 0.0) continue;
    const double v = g.value(rows[i], cols[i]);
    all += w[i] * v;
    if (g.valid(rows[i], cols[i])) {
      part += w[i] * v;
      part_w += w[i];
    } else {
      complete = false;
    }
  }
  if (complete) return {all, true};
  if (part_w > 0.0) return {part / part_w, true};
  return {};
}

void check_shape(const AffinityField& aff, const MaskedGrid& g, const char* what) {
  if (!aff.same_shape(g)) {
    throw DimensionError(std::string(what) + ": affinity field is " + std::to_string(aff.height) + "x" +
                         std::to_string(aff.width) + " but the grid is " + std::to_string(g.rows()) + "x" +
                         std::to_string(g.cols()));
  }
}

}  // namespace

AffinityField AffinityField::empty(int height, int width, int slots) {
  if (height < 0 || width < 0 || slots < 0) throw DimensionError("affinity field dimensions must be non-negative");
  AffinityField f;
  f.height = height;
  f.width = width;
  f.slots = slots;
  const auto n = f.pixels() * static_cast<std::size_t>(slots);
  f.du.assign(n, 0.0);
  f.dv.assign(n, 0.0);
  f.weight.assign(n, 0.0);
  f.active.assign(n, 0);
  return f;
}

int AffinityField::neighbour_count(int r, int c) const {
  int n = 0;
  for (int s = 0; s < slots; ++s) n += active[at(s, r, c)] ? 1 : 0;
  return n;
}

void AffinityField::validate() const {
  const auto n = pixels() * static_cast<std::size_t>(slots);
  if (du.size() != n || dv.size() != n || weight.size() != n || active.size() != n) {
    throw FormatError("affinity field tables do not match height x width x slots");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(du[i]) || !std::isfinite(dv[i]) || !std::isfinite(weight[i])) {
      throw FormatError("affinity field holds a non-finite entry");
    }
  }
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      double total = 0.0;
      for (int s = 0; s < slots; ++s) {
        const auto i = at(s, r, c);
        if (!active[i]) continue;
        total += std::abs(weight[i]);
        const double tr = r + dv[i];
        const double tc = c + du[i];
        if (tr < 0.0 || tr > height - 1 || tc < 0.0 || tc > width - 1) {
          throw DomainError("affinity offset points outside the grid");
        }
      }
      if (total > 1.0 + 1e-12) {
        throw DomainError("affinity weights at (" + std::to_string(r) + ", " + std::to_string(c) +
                          ") have absolute sum " + std::to_string(total) + " > 1");
      }
    }
  }
}

MaskedGrid spn_step(const MaskedGrid& o, const AffinityField& aff) {
  check_shape(aff, o, "spn_step");
  aff.validate();
  const auto n = o.size();
  const auto& kern = simd::kernels();

  std::vector<double> acc(n, 0.0);
  std::vector<double> acc_abs(n, 0.0);
  std::vector<double> sum_valid(n, 0.0);
  std::vector<double> sum_valid_abs(n, 0.0);
  std::vector<double> sum_all_abs(n, 0.0);
  std::vector<std::uint8_t> missing(n, 0);
  std::vector<double> gathered(n);
  std::vector<double> eff(n);
  std::vector<double> eff_abs(n);
  bool any_invalid_center = false;
  for (std::size_t p = 0; p < n; ++p) any_invalid_center = any_invalid_center || o.mask()[p] == 0;

  for (int s = 0; s < aff.slots; ++s) {
    for (int r = 0; r < aff.height; ++r) {
      for (int c = 0; c < aff.width; ++c) {
        const auto i = aff.at(s, r, c);
        const auto p = o.index(r, c);
        gathered[p] = 0.0;
        eff[p] = 0.0;
        eff_abs[p] = 0.0;
        if (!aff.active[i]) continue;
        const double w = aff.weight[i];
        sum_all_abs[p] += std::abs(w);
        const Sample smp = sample(o, r + aff.dv[i], c + aff.du[i]);
        if (!smp.valid) {
          missing[p] = 1;
          continue;
        }
        gathered[p] = smp.value;
        eff[p] = w;
        eff_abs[p] = std::abs(w);
        sum_valid[p] += w;
        sum_valid_abs[p] += std::abs(w);
      }
    }
    kern.mul_acc(acc.data(), eff.data(), gathered.data(), n);
    if (any_invalid_center) kern.mul_acc(acc_abs.data(), eff_abs.data(), gathered.data(), n);
  }

  MaskedGrid out(o.rows(), o.cols());
  auto values = out.mutable_values();
  auto mask = out.mutable_mask();
  const auto in = o.values();
  for (std::size_t p = 0; p < n; ++p) {
    if (o.mask()[p]) {
      double v = in[p];
      if (!missing[p]) {
        v = (1.0 - sum_valid[p]) * in[p] + acc[p];
      } else if (sum_valid_abs[p] > 0.0) {
        const double scale = sum_all_abs[p] / sum_valid_abs[p];
        v = (1.0 - scale * sum_valid[p]) * in[p] + scale * acc[p];
      }
      values[p] = v;
      mask[p] = 1;
    } else if (sum_valid_abs[p] > 0.0) {
      values[p] = acc_abs[p] / sum_valid_abs[p];
      mask[p] = 1;
    }
  }
  return out;
}

AffinityField cspn_neighbors(int height, int width) {
  AffinityField f = AffinityField::empty(height, width, 8);
  int s = 0;
  for (int dv = -1; dv <= 1; ++dv) {
    for (int du = -1; du <= 1; ++du) {
      if (du == 0 && dv == 0) continue;
      for (int r = 0; r < height; ++r) {
        for (int c = 0; c < width; ++c) {
          if (r + dv < 0 || r + dv >= height || c + du < 0 || c + du >= width) continue;
          const auto i = f.at(s, r, c);
          f.du[i] = du;
          f.dv[i] = dv;
          f.active[i] = 1;
        }
      }
      ++s;
    }
  }
  return f;
}

AffinityField nlspn_neighbors(int height, int width, const OffsetTable& offsets) {
  if (offsets.height != height || offsets.width != width) {
    throw FormatError("offset table is " + std::to_string(offsets.height) + "x" + std::to_string(offsets.width) +
                      ", expected " + std::to_string(height) + "x" + std::to_string(width));
  }
  if (offsets.neighbours < 0 ||
      offsets.data.size() != static_cast<std::size_t>(height) * width * offsets.neighbours * 2) {
    throw FormatError("offset table length does not match height x width x neighbours x 2");
  }
  AffinityField f = AffinityField::empty(height, width, offsets.neighbours);
  for (int r = 0; r < height; ++r) {
    for (int c = 0; c < width; ++c) {
      for (int s = 0; s < offsets.neighbours; ++s) {
        const auto t = ((static_cast<std::size_t>(r) * width + c) * offsets.neighbours + s) * 2;
        const double du = offsets.data[t];
        const double dv = offsets.data[t + 1];
        if (!std::isfinite(du) || !std::isfinite(dv)) throw FormatError("offset table holds a non-finite entry");
        const double tc = std::clamp(c + du, 0.0, static_cast<double>(width - 1));
        const double tr = std::clamp(r + dv, 0.0, static_cast<double>(height - 1));
        if (tc == c && tr == r) continue;  // self reference: inactive
        const auto i = f.at(s, r, c);
        f.du[i] = tc - c;
        f.dv[i] = tr - r;
        f.active[i] = 1;
      }
    }
  }
  return f;
}

OffsetTable nearest_valid_offsets(const MaskedGrid& grid, int n) {
  if (n < 0) throw DomainError("neighbour count must be non-negative");
  const int rows = grid.rows();
  const int cols = grid.cols();
  OffsetTable table{rows, cols, n, std::vector<double>(static_cast<std::size_t>(rows) * cols * n * 2, 0.0)};
  if (n == 0) return table;

  std::vector<std::pair<int, int>> valid;  // (row, col), row-major
  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      if (grid.valid(r, c)) valid.emplace_back(r, c);
    }
  }
  if (valid.empty()) return table;

  using Candidate = std::pair<long long, std::size_t>;  // (squared distance, row-major index)
  std::vector<Candidate> cand;
  auto by_distance = [](const Candidate& a, const Candidate& b) { return a < b; };
  const bool brute = valid.size() <= 512;
  const int max_ring = std::max(rows, cols);

  for (int r = 0; r < rows; ++r) {
    for (int c = 0; c < cols; ++c) {
      cand.clear();
      auto consider = [&](int rr, int cc) {
        if (rr == r && cc == c) return;
        const long long d2 = static_cast<long long>(rr - r) * (rr - r) + static_cast<long long>(cc - c) * (cc - c);
        cand.emplace_back(d2, grid.index(rr, cc));
      };
      if (brute) {
        for (const auto& [rr, cc] : valid) consider(rr, cc);
      } else {
        for (int ring = 1; ring <= max_ring; ++ring) {
          for (int cc = c - ring; cc <= c + ring; ++cc) {
            for (int rr : {r - ring, r + ring}) {
              if (grid.in_bounds(rr, cc) && grid.valid(rr, cc)) consider(rr, cc);
            }
          }
          for (int rr = r - ring + 1; rr <= r + ring - 1; ++rr) {
            for (int cc : {c - ring, c + ring}) {
              if (grid.in_bounds(rr, cc) && grid.valid(rr, cc)) consider(rr, cc);
            }
          }
          if (cand.size() >= static_cast<std::size_t>(n)) {
            std::nth_element(cand.begin(), cand.begin() + (n - 1), cand.end(), by_distance);
            const long long next = static_cast<long long>(ring + 1) * (ring + 1);
            if (cand[static_cast<std::size_t>(n - 1)].first < next) break;
          }
        }
      }
      const auto keep = std::min(cand.size(), static_cast<std::size_t>(n));
      std::partial_sort(cand.begin(), cand.begin() + static_cast<std::ptrdiff_t>(keep), cand.end(), by_distance);
      for (std::size_t s = 0; s < keep; ++s) {
        const auto idx = cand[s].second;
        const int rr = static_cast<int>(idx / static_cast<std::size_t>(cols));
        const int cc = static_cast<int>(idx % static_cast<std::size_t>(cols));
        const auto t = ((static_cast<std::size_t>(r) * cols + c) * n + s) * 2;
        table.data[t] = cc - c;
        table.data[t + 1] = rr - r;
      }
    }
  }
  return table;
}

AffinityField bilateral_affinity(AffinityField skeleton, const MaskedGrid* guide, const BilateralParams& params) {
  if (!(params.lambda >= 0.0 && params.lambda <= 1.0)) throw DomainError("affinity lambda must lie in [0, 1]");
  if (!(params.sigma_g > 0.0) || !(params.sigma_s > 0.0)) throw DomainError("affinity sigmas must be positive");
  if (guide && (guide->rows() != skeleton.height || guide->cols() != skeleton.width)) {
    throw DimensionError("guide image shape differs from the affinity field");
  }
  auto guide_at = [&](double row, double col) {
    MaskedGrid const& g = *guide;
    const double y = std::clamp(row, 0.0, static_cast<double>(g.rows() - 1));
    const double x = std::clamp(col, 0.0, static_cast<double>(g.cols() - 1));
    const int y0 = static_cast<int>(std::floor(y));
    const int x0 = static_cast<int>(std::floor(x));
    const int y1 = std::min(y0 + 1, g.rows() - 1);
    const int x1 = std::min(x0 + 1, g.cols() - 1);
    const double fy = y - y0;
    const double fx = x - x0;
    return (1 - fy) * ((1 - fx) * g.value(y0, x0) + fx * g.value(y0, x1)) +
           fy * ((1 - fx) * g.value(y1, x0) + fx * g.value(y1, x1));
  };
  const double inv_g = 1.0 / (2.0 * params.sigma_g * params.sigma_g);
  const double inv_s = 1.0 / (2.0 * params.sigma_s * params.sigma_s);
  for (int r = 0; r < skeleton.height; ++r) {
    for (int c = 0; c < skeleton.width; ++c) {
      // Exponents first, then shifted by their maximum so distant
      // neighbourhoods do not underflow to a zero or subnormal total.
      double peak = -std::numeric_limits<double>::infinity();
      for (int s = 0; s < skeleton.slots; ++s) {
        const auto i = skeleton.at(s, r, c);
        skeleton.weight[i] = 0.0;
        if (!skeleton.active[i]) continue;
        const double du = skeleton.du[i];
        const double dv = skeleton.dv[i];
        double e = -(du * du + dv * dv) * inv_s;
        if (guide) {
          const double dg = guide->value(r, c) - guide_at(r + dv, c + du);
          e -= dg * dg * inv_g;
        }
        skeleton.weight[i] = e;
        peak = std::max(peak, e);
      }
      if (peak == -std::numeric_limits<double>::infinity()) continue;
      double total = 0.0;
      for (int s = 0; s < skeleton.slots; ++s) {
        const auto i = skeleton.at(s, r, c);
        if (!skeleton.active[i]) continue;
        skeleton.weight[i] = std::exp(skeleton.weight[i] - peak);
        total += skeleton.weight[i];
      }
      const double scale = params.lambda / total;
      for (int s = 0; s < skeleton.slots; ++s) skeleton.weight[skeleton.at(s, r, c)] *= scale;
    }
  }
  return skeleton;
}

void GspnConfig::validate() const {
  if (n_neighbors < 1) throw DomainError("GSPN needs at least one neighbour");
  if (iterations < 1) throw DomainError("GSPN needs at least one iteration");
  point_map.validate(3);
  if (point_map.output_channels(3) != 3) throw DimensionError("GSPN point map must map 3D points to 3D points");
}

GspnResult gspn_refine(const TpvViews& coarse, const std::array<AffinityField, 3>& affinities,
                       const CameraIntrinsics& cam, const GspnConfig& cfg) {
  cfg.validate();
  coarse.validate();
  if (cfg.binning.bins() != coarse.binning.bins() || cfg.binning.d_min() != coarse.binning.d_min() ||
      cfg.binning.d_max() != coarse.binning.d_max()) {
    throw DimensionError("GSPN depth binning differs from the views' binning");
  }
  check_shape(affinities[0], coarse.front, "front");
  check_shape(affinities[1], coarse.top, "top");
  check_shape(affinities[2], coarse.side, "side");

  GspnResult result{coarse, {}};
  TpvViews& current = result.views;
  for (int it = 0; it < cfg.iterations; ++it) {
    TpvViews propagated = current;
    propagated.front = spn_step(current.front, affinities[0]);
    propagated.top = spn_step(current.top, affinities[1]);
    propagated.side = spn_step(current.side, affinities[2]);
    for (int r = 0; r < propagated.front.rows(); ++r) {
      for (int c = 0; c < propagated.front.cols(); ++c) {
        const double z = propagated.front.value(r, c);
        if (propagated.front.valid(r, c) && !(z > 0.0 && std::isfinite(z))) propagated.front.clear(r, c);
      }
    }
    propagated.sync_representative_depths();

    PointSet lifted = unproject_tpv(propagated, cam);
    if (cfg.point_map.kind != PointwiseMap::Kind::identity) {
      double in[3];
      double out[3];
      for (auto& p : lifted.positions) {
        in[0] = p.x;
        in[1] = p.y;
        in[2] = p.z;
        cfg.point_map.apply(in, out);
        p = {out[0], out[1], out[2]};
      }
    }
    current = fill_merge(propagated, project_tpv(lifted, cam, cfg.binning).views);
    result.valid_counts.push_back({current.front.valid_count(), current.top.valid_count(), current.side.valid_count()});
  }
  return result;
}

std::array<AffinityField, 3> default_affinities(const TpvViews& coarse, int n_neighbors, const MaskedGrid* guide,
                                                const BilateralParams& params) {
  const MaskedGrid* views[3] = {&coarse.front, &coarse.top, &coarse.side};
  std::array<AffinityField, 3> out;
  for (int v = 0; v < 3; ++v) {
    const MaskedGrid& g = *views[v];
    const auto skeleton = nlspn_neighbors(g.rows(), g.cols(), nearest_valid_offsets(g, n_neighbors));
    out[static_cast<std::size_t>(v)] = bilateral_affinity(skeleton, v == 0 ? guide : nullptr, params);
  }
  return out;
}

}  // namespace tpvd
