#pragma once

#include <array>
#include <cstddef>
#include <span>
#include <vector>

#include "tpvd/filter.hpp"
#include "tpvd/grid.hpp"
#include "tpvd/spherical.hpp"
#include "tpvd/tpv.hpp"

namespace tpvd {

/// Per-point feature map standing in for a learned MLP.
struct PointwiseMap {
  enum class Kind { identity, linear, mean_pool };

  Kind kind = Kind::identity;
  std::vector<double> weight;  // out x in, row-major (linear only)
  std::vector<double> bias;    // out (linear only, may be empty)
  int out_channels = 0;
  int in_channels = 0;

  static PointwiseMap identity() { return {}; }
  static PointwiseMap mean_pool() { return {Kind::mean_pool, {}, {}, 1, 0}; }
  static PointwiseMap linear(std::vector<double> weight, std::vector<double> bias, int out_channels,
                             int in_channels);

  int output_channels(int input_channels) const;
  // Throws DimensionError when a linear map does not accept `input_channels`.
  void validate(int input_channels) const;
  void apply(std::span<const double> in, std::span<double> out) const;
};

struct FusionConfig {
  std::size_t k = 9;
  int steps = 4;
  SphericalBinning binning = make_distance_aware_binning(80.0, 1.0, 1.15, std::numbers::pi / 90.0,
                                                         std::numbers::pi / 90.0);
  Filter3 dasc_filter = Filter3::identity();
  std::array<Filter2, 3> update_filters{};  // indexed by ViewTag: front, top, side
  PointwiseMap point_map = PointwiseMap::identity();

  void validate() const;
};

/// Mean of each point's k nearest neighbours' features (positions when the
/// set has none), then `map`. Positions and point order are unchanged.
PointSet knn_aggregate(const PointSet& points, std::size_t k, const PointwiseMap& map);

/// Filters every view with its 3x3 kernel (ViewTag order). Front cells whose
/// filtered depth is not strictly positive are dropped.
TpvViews filter_views(const TpvViews& views, const std::array<Filter2, 3>& filters);

/// Intermediate products of one fusion step, for inspection.
struct FusionTrace {
  PointSet lifted;          // unprojected, KNN-aggregated points
  SphericalGrid spherical;  // after the spherical filter
  PointSet cell_points;     // cell centres with their features
  TpvViews reprojected;     // after the 2D update filters
};

/// One 2D -> 3D -> spherical -> 2D cycle. New cells only fill holes; cells
/// that were valid keep their values bit-for-bit. k is capped at the number
/// of lifted points.
TpvViews fuse_step(const TpvViews& views, const CameraIntrinsics& cam, const FusionConfig& cfg,
                   FusionTrace* trace = nullptr);

/// fuse_step applied cfg.steps times. When `history` is given it receives
/// the views after every step.
TpvViews fuse(const TpvViews& views, const CameraIntrinsics& cam, const FusionConfig& cfg,
              std::vector<TpvViews>* history = nullptr);

/// Coarse per-view outputs: each view through its own 3x3 head.
TpvViews coarse_heads(const TpvViews& views, const std::array<Filter2, 3>& filters);

}  // namespace tpvd
