#include "tpvd/spherical.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <set>
#include <string>
#include <tuple>
#include <unordered_set>

#include "tpvd/error.hpp"
#include "tpvd/simd/kernels.hpp"

namespace tpvd {
namespace {

constexpr double kPi = std::numbers::pi;
// Shell edges live on this dyadic grid so that widths recovered by
// subtraction are exact.
constexpr double kEdgeQuantum = 1.0 / 1048576.0;
constexpr std::size_t kMaxShells = 1'000'000;

int whole_bins(double range, double delta, const char* what) {
  if (!(delta > 0.0) || !std::isfinite(delta)) {
    throw DomainError(std::string(what) + " bin size must be positive and finite");
  }
  const double n = std::round(range / delta);
  if (n < 1.0 || std::abs(n * delta - range) > 1e-9 * std::max(1.0, range)) {
    throw DomainError(std::string(what) + " bin size does not divide its range into whole bins");
  }
  return static_cast<int>(n);
}

}  // namespace

SphericalCoord to_spherical(const Vec3& p) {
  if (p.x == 0.0 && p.y == 0.0 && p.z == 0.0) {
    throw DomainError("spherical coordinates are undefined at the origin");
  }
  SphericalCoord s;
  s.r = std::hypot(p.x, p.y, p.z);
  s.theta = std::atan2(std::hypot(p.x, p.y), p.z);
  s.phi = std::atan2(p.y, p.x) + 0.0;
  if (s.phi == -kPi) s.phi = kPi;
  return s;
}

Vec3 from_spherical(double r, double theta, double phi) {
  if (!(r > 0.0) || !std::isfinite(r)) throw DomainError("radius must be positive");
  if (!(theta >= 0.0 && theta <= kPi)) throw DomainError("polar angle must lie in [0, pi]");
  const double st = std::sin(theta);
  return {r * st * std::cos(phi), r * st * std::sin(phi), r * std::cos(theta)};
}

SphericalBinning::SphericalBinning(std::vector<double> r_edges, double delta_theta, double delta_phi,
                                   double theta_min, double theta_max, int shells_per_subarea)
    : r_edges_(std::move(r_edges)),
      delta_theta_(delta_theta),
      delta_phi_(delta_phi),
      theta_min_(theta_min),
      theta_max_(theta_max),
      shells_per_subarea_(shells_per_subarea) {
  if (r_edges_.size() < 2) throw DomainError("spherical binning needs at least one shell");
  if (!(r_edges_.front() >= 0.0)) throw DomainError("first shell edge must be non-negative");
  for (std::size_t j = 1; j < r_edges_.size(); ++j) {
    if (!(r_edges_[j] > r_edges_[j - 1]) || !std::isfinite(r_edges_[j])) {
      throw DomainError("shell edges must be strictly increasing and finite");
    }
    if (j >= 2 && r_edges_[j] - r_edges_[j - 1] < r_edges_[j - 1] - r_edges_[j - 2]) {
      throw DomainError("shell widths must be non-decreasing with distance");
    }
  }
  if (!(theta_min >= 0.0 && theta_max <= kPi + 1e-12 && theta_max > theta_min)) {
    throw DomainError("polar range must satisfy 0 <= theta_min < theta_max <= pi");
  }
  if (shells_per_subarea < 1) throw DomainError("a subarea needs at least one shell");
  n_theta_ = whole_bins(theta_max - theta_min, delta_theta, "polar");
  n_phi_ = whole_bins(2.0 * kPi, delta_phi, "azimuth");
}

std::optional<CellIndex> SphericalBinning::locate(const SphericalCoord& s) const {
  if (!(s.r >= r_edges_.front() && s.r < r_edges_.back())) return std::nullopt;
  if (!(s.theta >= theta_min_ && s.theta <= theta_max_)) return std::nullopt;
  CellIndex c;
  c.shell = static_cast<int>(std::upper_bound(r_edges_.begin(), r_edges_.end(), s.r) - r_edges_.begin()) - 1;
  c.theta = std::clamp(static_cast<int>(std::floor((s.theta - theta_min_) / delta_theta_)), 0, n_theta_ - 1);
  c.phi = std::clamp(static_cast<int>(std::floor((s.phi + kPi) / delta_phi_)), 0, n_phi_ - 1);
  return c;
}

SphericalCoord SphericalBinning::center(const CellIndex& c) const {
  return {0.5 * (r_edges_[c.shell] + r_edges_[c.shell + 1]), theta_min_ + (c.theta + 0.5) * delta_theta_,
          -kPi + (c.phi + 0.5) * delta_phi_};
}

bool SphericalBinning::contains(const CellIndex& c) const {
  return c.shell >= 0 && c.shell < shells() && c.theta >= 0 && c.theta < n_theta_ && c.phi >= 0 &&
         c.phi < n_phi_;
}

SphericalBinning SphericalBinning::restrict_theta(double theta) const {
  int n = static_cast<int>(std::ceil((theta - theta_min_) / delta_theta_ - 1e-9));
  n = std::clamp(n, 1, n_theta_);
  if (n == n_theta_) return *this;
  return SphericalBinning(r_edges_, delta_theta_, delta_phi_, theta_min_, theta_min_ + n * delta_theta_,
                          shells_per_subarea_);
}

SphericalBinning make_distance_aware_binning(double r_max, double w0, double rho, double delta_theta,
                                             double delta_phi, int shells_per_subarea) {
  if (!(r_max > 0.0) || !std::isfinite(r_max)) throw DomainError("r_max must be positive and finite");
  if (!(w0 > 0.0) || !std::isfinite(w0)) throw DomainError("w0 must be positive and finite");
  if (!(rho >= 1.0) || !std::isfinite(rho)) throw DomainError("rho must be >= 1");
  std::vector<double> edges{0.0};
  double width = w0;
  double prev_step = 0.0;
  while (edges.back() < r_max) {
    const double step = std::max(prev_step, std::ceil(width / kEdgeQuantum) * kEdgeQuantum);
    edges.push_back(edges.back() + step);
    prev_step = step;
    width *= rho;
    if (edges.size() > kMaxShells) throw DomainError("distance-aware binning needs too many shells");
  }
  return SphericalBinning(std::move(edges), delta_theta, delta_phi, 0.0, kPi, shells_per_subarea);
}

std::optional<std::size_t> SphericalGrid::find(const CellIndex& c) const {
  const auto it = std::lower_bound(cells.begin(), cells.end(), c);
  if (it == cells.end() || *it != c) return std::nullopt;
  return static_cast<std::size_t>(it - cells.begin());
}

void SphericalGrid::validate() const {
  if (occupancy.size() != cells.size() ||
      features.size() != cells.size() * static_cast<std::size_t>(channels)) {
    throw FormatError("spherical grid tables have inconsistent lengths");
  }
  for (std::size_t i = 0; i < cells.size(); ++i) {
    if (!binning.contains(cells[i])) throw DomainError("spherical cell index out of bounds");
    if (occupancy[i] < 1) throw DomainError("stored spherical cell has zero occupancy");
    if (i > 0 && !(cells[i - 1] < cells[i])) throw FormatError("spherical cells must be strictly sorted");
  }
  for (double f : features) {
    if (!std::isfinite(f)) throw DomainError("spherical cell feature is not finite");
  }
}

SphericalGrid bin_points(const PointSet& points, const SphericalBinning& binning) {
  points.validate();
  SphericalGrid grid;
  grid.binning = binning;
  grid.channels = points.has_features() ? points.channels : 3;

  std::vector<std::pair<CellIndex, std::size_t>> members;
  members.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) {
    const auto cell = binning.locate(to_spherical(points.positions[i]));
    if (cell) {
      members.emplace_back(*cell, i);
    } else {
      ++grid.dropped;
    }
  }
  std::sort(members.begin(), members.end(),
            [](const auto& a, const auto& b) { return std::tie(a.first, a.second) < std::tie(b.first, b.second); });

  const auto channels = static_cast<std::size_t>(grid.channels);
  std::vector<double> sum(channels);
  for (std::size_t lo = 0; lo < members.size();) {
    std::size_t hi = lo;
    std::fill(sum.begin(), sum.end(), 0.0);
    while (hi < members.size() && members[hi].first == members[lo].first) {
      const std::size_t i = members[hi].second;
      if (points.has_features()) {
        const auto f = points.feature(i);
        for (std::size_t c = 0; c < channels; ++c) sum[c] += f[c];
      } else {
        const auto& p = points.positions[i];
        sum[0] += p.x;
        sum[1] += p.y;
        sum[2] += p.z;
      }
      ++hi;
    }
    const auto count = hi - lo;
    grid.cells.push_back(members[lo].first);
    grid.occupancy.push_back(count);
    for (std::size_t c = 0; c < channels; ++c) grid.features.push_back(sum[c] / static_cast<double>(count));
    lo = hi;
  }
  return grid;
}

std::vector<double> Filter3::identity_weights() {
  std::vector<double> w(27, 0.0);
  w[13] = 1.0;
  return w;
}

Filter3 Filter3::box() {
  Filter3 f;
  f.weights.assign(27, 1.0 / 27.0);
  return f;
}

double Filter3::at(int channel, int dr, int dt, int dp) const {
  const std::size_t base = per_channel ? static_cast<std::size_t>(channel) * 27 : 0;
  return weights[base + static_cast<std::size_t>((dr + 1) * 9 + (dt + 1) * 3 + (dp + 1))];
}

void Filter3::validate(int channels) const {
  if (weights.empty() || weights.size() % 27 != 0) {
    throw FormatError("3x3x3 filter needs a multiple of 27 weights");
  }
  if (!per_channel && weights.size() != 27) throw FormatError("shared 3x3x3 filter needs exactly 27 weights");
  if (per_channel && kernels() != channels) {
    throw DimensionError("per-channel 3x3x3 filter has " + std::to_string(kernels()) + " kernels for " +
                         std::to_string(channels) + " channels");
  }
  for (double w : weights) {
    if (!std::isfinite(w)) throw DomainError("3x3x3 filter weights must be finite");
  }
}

SphericalGrid dasc_apply(const SphericalGrid& grid, const Filter3& filter) {
  filter.validate(grid.channels);
  const auto identity = Filter3::identity_weights();
  bool all_identity = true;
  for (int k = 0; k < filter.kernels(); ++k) {
    all_identity = all_identity && std::equal(identity.begin(), identity.end(), filter.weights.begin() + 27 * k);
  }
  if (all_identity) return grid;

  SphericalGrid out = grid;
  const auto& kern = simd::kernels();
  const auto channels = static_cast<std::size_t>(grid.channels);

  for (std::size_t lo = 0; lo < grid.cells.size();) {
    // Cells are sorted by shell first, so one subarea is a contiguous run.
    const int subarea = grid.binning.subarea_of(grid.cells[lo].shell);
    std::size_t hi = lo;
    int t0 = grid.cells[lo].theta, t1 = t0, p0 = grid.cells[lo].phi, p1 = p0;
    while (hi < grid.cells.size() && grid.binning.subarea_of(grid.cells[hi].shell) == subarea) {
      t0 = std::min(t0, grid.cells[hi].theta);
      t1 = std::max(t1, grid.cells[hi].theta);
      p0 = std::min(p0, grid.cells[hi].phi);
      p1 = std::max(p1, grid.cells[hi].phi);
      ++hi;
    }
    const int s0 = grid.cells[lo].shell;
    const int na = grid.cells[hi - 1].shell - s0 + 1;
    const int nb = t1 - t0 + 1;
    const int nc = p1 - p0 + 1;
    const auto lattice_size = static_cast<std::size_t>(na) * nb * nc;
    auto lat = [&](int a, int b, int c) {
      return (static_cast<std::size_t>(a) * nb + static_cast<std::size_t>(b)) * nc + static_cast<std::size_t>(c);
    };

    std::vector<double> mask(lattice_size, 0.0);
    std::vector<std::size_t> slot(hi - lo);
    for (std::size_t i = lo; i < hi; ++i) {
      slot[i - lo] = lat(grid.cells[i].shell - s0, grid.cells[i].theta - t0, grid.cells[i].phi - p0);
      mask[slot[i - lo]] = 1.0;
    }

    std::vector<double> values(lattice_size);
    std::vector<double> num(lattice_size);
    std::vector<double> den(lattice_size);
    int den_kernel = -1;
    double total = 0.0;
    for (std::size_t ch = 0; ch < channels; ++ch) {
      const int kernel = filter.per_channel ? static_cast<int>(ch) : 0;
      std::fill(values.begin(), values.end(), 0.0);
      for (std::size_t i = lo; i < hi; ++i) values[slot[i - lo]] = grid.features[i * channels + ch];
      std::fill(num.begin(), num.end(), 0.0);
      const bool need_den = den_kernel != kernel;
      if (need_den) {
        std::fill(den.begin(), den.end(), 0.0);
        total = 0.0;
      }
      for (int da = -1; da <= 1; ++da) {
        for (int db = -1; db <= 1; ++db) {
          for (int dc = -1; dc <= 1; ++dc) {
            const double w = filter.at(kernel, da, db, dc);
            if (need_den) total += w;
            if (w == 0.0) continue;
            const int c_lo = std::max(0, -dc);
            const int c_hi = std::min(nc, nc - dc);
            if (c_hi <= c_lo) continue;
            const auto len = static_cast<std::size_t>(c_hi - c_lo);
            for (int a = std::max(0, -da); a < std::min(na, na - da); ++a) {
              for (int b = std::max(0, -db); b < std::min(nb, nb - db); ++b) {
                const auto dst = lat(a, b, c_lo);
                const auto src = lat(a + da, b + db, c_lo + dc);
                kern.axpy(num.data() + dst, w, values.data() + src, len);
                if (need_den) kern.axpy(den.data() + dst, w, mask.data() + src, len);
              }
            }
          }
        }
      }
      den_kernel = kernel;
      for (std::size_t i = lo; i < hi; ++i) {
        const auto s = slot[i - lo];
        double v = num[s];
        if (den[s] != 0.0 && total != 0.0) v = v * (total / den[s]);
        out.features[i * channels + ch] = v;
      }
    }
    lo = hi;
  }
  return out;
}

std::vector<NonEmptyRow> non_empty_stats(const PointSet& points, double cubic_cell,
                                         const SphericalBinning& binning,
                                         std::span<const double> distance_bins) {
  if (!(cubic_cell > 0.0)) throw DomainError("cubic cell edge must be positive");
  if (distance_bins.size() < 2) throw DomainError("need at least two distance bin edges");
  for (std::size_t i = 1; i < distance_bins.size(); ++i) {
    if (!(distance_bins[i] > distance_bins[i - 1])) throw DomainError("distance bins must be ascending");
  }
  std::vector<NonEmptyRow> rows(distance_bins.size() - 1);
  for (std::size_t i = 0; i + 1 < distance_bins.size(); ++i) {
    rows[i].range_lo = distance_bins[i];
    rows[i].range_hi = distance_bins[i + 1];
  }
  if (points.empty()) return rows;

  const double d_lo = distance_bins.front();
  const double d_hi = distance_bins.back();
  auto row_of = [&](double d) -> std::optional<std::size_t> {
    if (!(d >= d_lo && d < d_hi)) return std::nullopt;
    return static_cast<std::size_t>(std::upper_bound(distance_bins.begin(), distance_bins.end(), d) -
                                    distance_bins.begin()) - 1;
  };

  double theta_max = 0.0;
  for (const auto& p : points.positions) theta_max = std::max(theta_max, to_spherical(p).theta);
  auto in_cone = [&](double x, double y, double z) { return std::atan2(std::hypot(x, y), z) <= theta_max; };

  // Cubic voxels, keyed by three 21-bit biased indices.
  constexpr long long kBias = 1LL << 20;
  const auto reach = static_cast<long long>(std::ceil(d_hi / cubic_cell));
  if (reach + 2 >= kBias) throw DomainError("cubic cell too small for the distance range");
  auto voxel_key = [](long long i, long long j, long long k) {
    return static_cast<std::uint64_t>(((i + kBias) << 42) | ((j + kBias) << 21) | (k + kBias));
  };
  std::unordered_set<std::uint64_t> occupied;
  std::vector<std::array<long long, 3>> occupied_list;
  for (const auto& p : points.positions) {
    const std::array<long long, 3> v{static_cast<long long>(std::floor(p.x / cubic_cell)),
                                     static_cast<long long>(std::floor(p.y / cubic_cell)),
                                     static_cast<long long>(std::floor(p.z / cubic_cell))};
    if (std::abs(v[0]) > reach + 1 || std::abs(v[1]) > reach + 1 || std::abs(v[2]) > reach + 1) continue;
    if (occupied.insert(voxel_key(v[0], v[1], v[2])).second) occupied_list.push_back(v);
  }
  auto voxel_center = [&](long long i) { return (static_cast<double>(i) + 0.5) * cubic_cell; };
  for (long long k = -reach; k <= reach; ++k) {
    const double z = voxel_center(k);
    if (z * z >= d_hi * d_hi) continue;
    double radial = std::sqrt(d_hi * d_hi - z * z);
    if (theta_max < kPi / 2) {
      if (z <= 0.0) continue;
      radial = std::min(radial, z * std::tan(theta_max) + cubic_cell);
    }
    const auto span = static_cast<long long>(std::ceil(radial / cubic_cell));
    for (long long i = -span - 1; i <= span; ++i) {
      const double x = voxel_center(i);
      for (long long j = -span - 1; j <= span; ++j) {
        const double y = voxel_center(j);
        if (!in_cone(x, y, z)) continue;
        const auto row = row_of(std::hypot(x, y, z));
        if (!row) continue;
        ++rows[*row].cubic_units;
        if (occupied.count(voxel_key(i, j, k))) ++rows[*row].cubic_non_empty;
      }
    }
  }
  for (const auto& [i, j, k] : occupied_list) {
    const double x = voxel_center(i), y = voxel_center(j), z = voxel_center(k);
    if (in_cone(x, y, z)) continue;  // already counted
    const auto row = row_of(std::hypot(x, y, z));
    if (!row) continue;
    ++rows[*row].cubic_units;
    ++rows[*row].cubic_non_empty;
  }

  // Spherical cells.
  std::set<CellIndex> sph_occupied;
  for (const auto& p : points.positions) {
    if (const auto c = binning.locate(to_spherical(p))) sph_occupied.insert(*c);
  }
  for (int j = 0; j < binning.shells(); ++j) {
    for (int t = 0; t < binning.theta_bins(); ++t) {
      for (int ph = 0; ph < binning.phi_bins(); ++ph) {
        const CellIndex c{j, t, ph};
        const auto s = binning.center(c);
        const bool occ = sph_occupied.count(c) != 0;
        if (!occ && s.theta > theta_max) continue;
        const auto row = row_of(s.r);
        if (!row) continue;
        ++rows[*row].spherical_units;
        if (occ) ++rows[*row].spherical_non_empty;
      }
    }
  }
  return rows;
}

}  // namespace tpvd
