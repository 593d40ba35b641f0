#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

namespace tpvd {

struct Vec3 {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;

  friend bool operator==(const Vec3&, const Vec3&) = default;
};

// Integer pixel address: u is the column, v the row.
struct Pixel {
  int u = 0;
  int v = 0;

  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Pinhole camera. Frame convention: x right, y down, z forward.
struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.0;
  double cy = 0.0;
  int width = 1;
  int height = 1;

  // Throws DomainError when fx/fy are not positive or the principal point
  // lies outside the image.
  void validate() const;

  // Pixel hit by p, or nullopt when z <= 0 or the rounded pixel is off-grid.
  // Rounds half away from zero.
  std::optional<Pixel> project(const Vec3& p) const;

  // Point on the ray through (u, v) with forward depth z. Accepts
  // fractional pixel coordinates.
  Vec3 back_project(double u, double v, double z) const;

  // Largest angle between the optical axis and any corner ray.
  double max_off_axis_angle() const;

  // Default intrinsics for an image with no calibration: 90 degree
  // horizontal field of view, principal point at the centre.
  static CameraIntrinsics for_image(int width, int height);
};

/// Row-major 2D grid of reals with a per-cell validity mask.
///
/// Invalid cells always hold 0.0 so equality and hashing never see stale
/// values, but readers must consult the mask; 0.0 is not a sentinel.
class MaskedGrid {
 public:
  MaskedGrid() = default;
  MaskedGrid(int rows, int cols);

  int rows() const { return rows_; }
  int cols() const { return cols_; }
  std::size_t size() const { return values_.size(); }
  bool same_shape(const MaskedGrid& other) const {
    return rows_ == other.rows_ && cols_ == other.cols_;
  }

  std::size_t index(int r, int c) const {
    return static_cast<std::size_t>(r) * static_cast<std::size_t>(cols_) + static_cast<std::size_t>(c);
  }
  bool in_bounds(int r, int c) const { return r >= 0 && r < rows_ && c >= 0 && c < cols_; }

  double value(int r, int c) const { return values_[index(r, c)]; }
  bool valid(int r, int c) const { return mask_[index(r, c)] != 0; }
  void set(int r, int c, double v);
  void clear(int r, int c);

  std::span<const double> values() const { return values_; }
  std::span<const std::uint8_t> mask() const { return mask_; }
  // Flat access for kernels. Writers must keep the invalid-is-zero rule.
  std::span<double> mutable_values() { return values_; }
  std::span<std::uint8_t> mutable_mask() { return mask_; }

  std::size_t valid_count() const;
  double density() const;

  // Shape, mask, and valid values compared bit-exactly.
  friend bool operator==(const MaskedGrid& a, const MaskedGrid& b);

 private:
  int rows_ = 0;
  int cols_ = 0;
  std::vector<double> values_;
  std::vector<std::uint8_t> mask_;
};

/// H x W metric depth grid. Valid depths are finite and strictly positive.
using SparseDepthMap = MaskedGrid;

// Throws DomainError if a valid cell is non-finite or <= 0.
void validate_depth_map(const SparseDepthMap& depth);

enum class ViewTag : std::uint8_t { front = 0, top = 1, side = 2 };

/// N points with optional N x C feature rows.
///
/// `pixels` carries the source pixel of camera-derived points and `sources`
/// the originating view of unprojected points; both are empty when unknown.
struct PointSet {
  std::vector<Vec3> positions;
  std::vector<double> features;
  int channels = 0;
  std::vector<Pixel> pixels;
  std::vector<ViewTag> sources;

  std::size_t size() const { return positions.size(); }
  bool empty() const { return positions.empty(); }
  bool has_features() const { return channels > 0; }

  std::span<const double> feature(std::size_t i) const {
    return {features.data() + i * static_cast<std::size_t>(channels), static_cast<std::size_t>(channels)};
  }
  std::span<double> feature(std::size_t i) {
    return {features.data() + i * static_cast<std::size_t>(channels), static_cast<std::size_t>(channels)};
  }

  // Throws FormatError when the feature table or tag vectors have the wrong
  // length, DomainError on non-finite coordinates.
  void validate() const;
};

/// Uniform discretization of forward depth into D bins.
class DepthBinning {
 public:
  DepthBinning() = default;
  DepthBinning(double d_min, double d_max, int bins);

  static DepthBinning outdoor() { return {0.0, 80.0, 256}; }
  static DepthBinning indoor() { return {0.0, 10.0, 256}; }

  double d_min() const { return d_min_; }
  double d_max() const { return d_max_; }
  int bins() const { return bins_; }
  double width() const { return (d_max_ - d_min_) / bins_; }

  // floor((z - d_min) / (d_max - d_min) * D) clamped to [0, D - 1].
  int bin(double z) const;
  double center(int k) const;

 private:
  double d_min_ = 0.0;
  double d_max_ = 80.0;
  int bins_ = 256;
};

/// One point per valid pixel, in row-major pixel order, with provenance.
PointSet depth_to_points(const SparseDepthMap& depth, const CameraIntrinsics& cam);

/// Z-buffered projection: each pixel keeps the smallest z that lands on it.
SparseDepthMap points_to_depth(const PointSet& points, const CameraIntrinsics& cam);

}  // namespace tpvd
