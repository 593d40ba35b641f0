#pragma once

#include <compare>
#include <cstddef>
#include <numbers>
#include <optional>
#include <span>
#include <vector>

#include "tpvd/grid.hpp"

namespace tpvd {

struct SphericalCoord {
  double r = 0.0;
  double theta = 0.0;  // polar angle from +z, [0, pi]
  double phi = 0.0;    // azimuth atan2(y, x), (-pi, pi]
};

// Throws DomainError for the zero vector. Azimuth -pi and -0 are folded to
// +pi and +0.
SphericalCoord to_spherical(const Vec3& p);
// Throws DomainError when r <= 0 or theta is outside [0, pi].
Vec3 from_spherical(double r, double theta, double phi);

struct CellIndex {
  int shell = 0;  // radial bin
  int theta = 0;
  int phi = 0;

  friend auto operator<=>(const CellIndex&, const CellIndex&) = default;
};

/// Radial shells with non-decreasing widths times an equal-angle (theta, phi)
/// raster. Consecutive groups of `shells_per_subarea` shells form the
/// subareas that the spherical filter flattens and convolves independently.
class SphericalBinning {
 public:
  SphericalBinning() = default;
  SphericalBinning(std::vector<double> r_edges, double delta_theta, double delta_phi,
                   double theta_min = 0.0, double theta_max = std::numbers::pi,
                   int shells_per_subarea = 4);

  std::span<const double> r_edges() const { return r_edges_; }
  int shells() const { return static_cast<int>(r_edges_.size()) - 1; }
  int theta_bins() const { return n_theta_; }
  int phi_bins() const { return n_phi_; }
  double delta_theta() const { return delta_theta_; }
  double delta_phi() const { return delta_phi_; }
  double theta_min() const { return theta_min_; }
  double theta_max() const { return theta_max_; }
  double r_max() const { return r_edges_.back(); }
  int shells_per_subarea() const { return shells_per_subarea_; }
  int subarea_of(int shell) const { return shell / shells_per_subarea_; }
  int subareas() const { return (shells() + shells_per_subarea_ - 1) / shells_per_subarea_; }

  // Cell holding s, or nullopt when r is beyond the last edge or theta is
  // outside the polar range.
  std::optional<CellIndex> locate(const SphericalCoord& s) const;
  // Midpoint of the cell in r, theta and phi.
  SphericalCoord center(const CellIndex& c) const;
  bool contains(const CellIndex& c) const;

  // Same radial and azimuthal layout with the polar range cut to
  // [theta_min, theta] rounded up to whole bins.
  SphericalBinning restrict_theta(double theta) const;

 private:
  std::vector<double> r_edges_{0.0, 1.0};
  double delta_theta_ = std::numbers::pi;
  double delta_phi_ = 2.0 * std::numbers::pi;
  double theta_min_ = 0.0;
  double theta_max_ = std::numbers::pi;
  int n_theta_ = 1;
  int n_phi_ = 1;
  int shells_per_subarea_ = 4;
};

/// Shell edges e_0 = 0, e_{j+1} = e_j + w0 * rho^j, stopping at the first
/// edge >= r_max so the last shell is never narrower than its predecessor.
SphericalBinning make_distance_aware_binning(double r_max, double w0, double rho,
                                             double delta_theta, double delta_phi,
                                             int shells_per_subarea = 4);

/// Sparse occupied cells, sorted by CellIndex, with a C-channel feature row
/// per cell.
struct SphericalGrid {
  SphericalBinning binning;
  std::vector<CellIndex> cells;
  std::vector<std::size_t> occupancy;
  std::vector<double> features;
  int channels = 0;
  std::size_t dropped = 0;

  std::size_t size() const { return cells.size(); }
  std::span<const double> feature(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(channels), static_cast<std::size_t>(channels)};
  }
  std::optional<std::size_t> find(const CellIndex& c) const;
  void validate() const;
};

/// Assigns each point to its cell. A cell's feature is the mean of its
/// members' features, or of their Cartesian positions when the set carries
/// none; members are summed in point order.
SphericalGrid bin_points(const PointSet& points, const SphericalBinning& binning);

/// 3x3x3 kernel over (shell, theta, phi), shared by all channels or one per
/// channel (depthwise).
struct Filter3 {
  std::vector<double> weights = identity_weights();
  bool per_channel = false;

  static std::vector<double> identity_weights();
  static Filter3 identity() { return {}; }
  static Filter3 box();

  // Weight at offset (dr, dt, dp) for the given channel.
  double at(int channel, int dr, int dt, int dp) const;
  int kernels() const { return static_cast<int>(weights.size() / 27); }
  void validate(int channels) const;
};

/// Distance-aware spherical convolution. Each subarea's occupied cells are
/// laid out on a dense local (shell, theta, phi) lattice, filtered at stride 1
/// with zero padding and the same valid-weight renormalization as
/// apply_filter, and written back. The occupied cell set never changes.
SphericalGrid dasc_apply(const SphericalGrid& grid, const Filter3& filter);

struct NonEmptyRow {
  double range_lo = 0.0;
  double range_hi = 0.0;
  std::size_t cubic_units = 0;
  std::size_t cubic_non_empty = 0;
  std::size_t spherical_units = 0;
  std::size_t spherical_non_empty = 0;

  double cubic_percent() const {
    return cubic_units ? 100.0 * static_cast<double>(cubic_non_empty) / static_cast<double>(cubic_units) : 0.0;
  }
  double spherical_percent() const {
    return spherical_units ? 100.0 * static_cast<double>(spherical_non_empty) / static_cast<double>(spherical_units)
                           : 0.0;
  }
};

/// Share of occupied units per distance range for an axis-aligned voxel grid
/// of edge `cubic_cell` versus `binning`.
///
/// A unit belongs to the range holding the distance of its centre. The unit
/// universe is every unit whose centre lies inside the data's bounding cone
/// (polar angle up to the largest polar angle among the points, distance
/// below the last range edge), plus every occupied unit.
std::vector<NonEmptyRow> non_empty_stats(const PointSet& points, double cubic_cell,
                                         const SphericalBinning& binning,
                                         std::span<const double> distance_bins);

}  // namespace tpvd
