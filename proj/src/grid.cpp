#include "tpvd/grid.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <string>

#include "tpvd/error.hpp"

namespace tpvd {

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0) || !std::isfinite(fx) || !std::isfinite(fy)) {
    throw DomainError("camera focal lengths must be positive and finite");
  }
  if (width < 1 || height < 1) {
    throw DomainError("camera image size must be positive");
  }
  if (!(cx >= 0.0 && cx < width) || !(cy >= 0.0 && cy < height)) {
    throw DomainError("camera principal point lies outside the image");
  }
}

std::optional<Pixel> CameraIntrinsics::project(const Vec3& p) const {
  if (!(p.z > 0.0)) return std::nullopt;
  const double u = std::round(fx * p.x / p.z + cx);
  const double v = std::round(fy * p.y / p.z + cy);
  if (!(u >= 0.0 && u < width && v >= 0.0 && v < height)) return std::nullopt;
  return Pixel{static_cast<int>(u), static_cast<int>(v)};
}

Vec3 CameraIntrinsics::back_project(double u, double v, double z) const {
  return {(u - cx) * z / fx, (v - cy) * z / fy, z};
}

double CameraIntrinsics::max_off_axis_angle() const {
  double best = 0.0;
  for (double u : {-0.5, width - 0.5}) {
    for (double v : {-0.5, height - 0.5}) {
      const double x = (u - cx) / fx;
      const double y = (v - cy) / fy;
      best = std::max(best, std::atan(std::hypot(x, y)));
    }
  }
  return best;
}

CameraIntrinsics CameraIntrinsics::for_image(int width, int height) {
  CameraIntrinsics cam;
  cam.width = width;
  cam.height = height;
  cam.fx = 0.5 * width;
  cam.fy = 0.5 * width;
  cam.cx = 0.5 * width;
  cam.cy = 0.5 * height;
  return cam;
}

MaskedGrid::MaskedGrid(int rows, int cols) : rows_(rows), cols_(cols) {
  if (rows < 0 || cols < 0) throw DimensionError("grid dimensions must be non-negative");
  const auto n = static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols);
  values_.assign(n, 0.0);
  mask_.assign(n, 0);
}

void MaskedGrid::set(int r, int c, double v) {
  const auto i = index(r, c);
  values_[i] = v;
  mask_[i] = 1;
}

void MaskedGrid::clear(int r, int c) {
  const auto i = index(r, c);
  values_[i] = 0.0;
  mask_[i] = 0;
}

std::size_t MaskedGrid::valid_count() const {
  return static_cast<std::size_t>(std::count(mask_.begin(), mask_.end(), std::uint8_t{1}));
}

double MaskedGrid::density() const {
  if (values_.empty()) return 0.0;
  return static_cast<double>(valid_count()) / static_cast<double>(values_.size());
}

bool operator==(const MaskedGrid& a, const MaskedGrid& b) {
  if (!a.same_shape(b) || a.mask_ != b.mask_) return false;
  for (std::size_t i = 0; i < a.values_.size(); ++i) {
    if (a.mask_[i] != 0 &&
        std::bit_cast<std::uint64_t>(a.values_[i]) != std::bit_cast<std::uint64_t>(b.values_[i])) {
      return false;
    }
  }
  return true;
}

void validate_depth_map(const SparseDepthMap& depth) {
  const auto values = depth.values();
  const auto mask = depth.mask();
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (mask[i] != 0 && !(std::isfinite(values[i]) && values[i] > 0.0)) {
      throw DomainError("depth map holds a non-positive or non-finite valid depth at index " +
                        std::to_string(i));
    }
  }
}

void PointSet::validate() const {
  if (channels < 0) throw FormatError("negative feature channel count");
  if (features.size() != positions.size() * static_cast<std::size_t>(channels)) {
    throw FormatError("feature table does not hold exactly one row per point");
  }
  if (!pixels.empty() && pixels.size() != positions.size()) {
    throw FormatError("pixel provenance length differs from point count");
  }
  if (!sources.empty() && sources.size() != positions.size()) {
    throw FormatError("source tag length differs from point count");
  }
  for (const auto& p : positions) {
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z)) {
      throw DomainError("point coordinates must be finite");
    }
  }
}

DepthBinning::DepthBinning(double d_min, double d_max, int bins)
    : d_min_(d_min), d_max_(d_max), bins_(bins) {
  if (!(d_min >= 0.0) || !(d_max > d_min) || !std::isfinite(d_max)) {
    throw DomainError("depth binning requires 0 <= d_min < d_max");
  }
  if (bins < 1) throw DomainError("depth binning requires at least one bin");
}

int DepthBinning::bin(double z) const {
  const double t = std::floor((z - d_min_) / (d_max_ - d_min_) * bins_);
  if (!(t >= 0.0)) return 0;
  if (t >= bins_ - 1) return bins_ - 1;
  return static_cast<int>(t);
}

double DepthBinning::center(int k) const {
  return d_min_ + (k + 0.5) * (d_max_ - d_min_) / bins_;
}

PointSet depth_to_points(const SparseDepthMap& depth, const CameraIntrinsics& cam) {
  if (depth.rows() != cam.height || depth.cols() != cam.width) {
    throw DimensionError("depth map is " + std::to_string(depth.rows()) + "x" +
                         std::to_string(depth.cols()) + " but camera expects " +
                         std::to_string(cam.height) + "x" + std::to_string(cam.width));
  }
  PointSet out;
  const auto n_valid = depth.valid_count();
  out.positions.reserve(n_valid);
  out.pixels.reserve(n_valid);
  for (int v = 0; v < depth.rows(); ++v) {
    for (int u = 0; u < depth.cols(); ++u) {
      if (!depth.valid(v, u)) continue;
      out.positions.push_back(cam.back_project(u, v, depth.value(v, u)));
      out.pixels.push_back({u, v});
    }
  }
  return out;
}

SparseDepthMap points_to_depth(const PointSet& points, const CameraIntrinsics& cam) {
  SparseDepthMap out(cam.height, cam.width);
  for (const auto& p : points.positions) {
    const auto px = cam.project(p);
    if (!px) continue;
    if (!out.valid(px->v, px->u) || p.z < out.value(px->v, px->u)) out.set(px->v, px->u, p.z);
  }
  return out;
}

}  // namespace tpvd
