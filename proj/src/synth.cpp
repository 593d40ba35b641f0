#include "tpvd/synth.hpp"

#include <array>
#include <cmath>
#include <numbers>
#include <random>

#include "tpvd/error.hpp"

namespace tpvd {
namespace {

constexpr double kGroundY = 1.65;  // y points down, so the ground sits at +1.65 m

struct Sphere {
  Vec3 c;
  double radius;
};

// Obstacles along both sides of a road ahead, at several ranges.
constexpr std::array<Sphere, 8> kSpheres{{
    {{-4.0, 0.65, 8.0}, 1.0},
    {{3.5, 0.15, 14.0}, 1.5},
    {{-6.0, -0.35, 22.0}, 2.0},
    {{7.0, 0.15, 31.0}, 1.5},
    {{-9.0, -0.85, 38.0}, 2.5},
    {{5.0, -1.35, 47.0}, 3.0},
    {{-12.0, -1.35, 56.0}, 3.0},
    {{14.0, -1.85, 65.0}, 3.5},
}};

// Uniform double in [0, 1) from the top 53 bits; independent of the
// standard library's distribution implementations.
double unit(std::mt19937_64& rng) { return static_cast<double>(rng() >> 11) * 0x1.0p-53; }

double hit_sphere(const Vec3& d, const Sphere& s) {
  // |t d - c|^2 = r^2 with |d| = 1
  const double b = d.x * s.c.x + d.y * s.c.y + d.z * s.c.z;
  const double cc = s.c.x * s.c.x + s.c.y * s.c.y + s.c.z * s.c.z - s.radius * s.radius;
  const double disc = b * b - cc;
  if (disc < 0.0) return INFINITY;
  const double root = std::sqrt(disc);
  if (b - root > 0.0) return b - root;
  if (b + root > 0.0) return b + root;
  return INFINITY;
}

// Distance along the unit direction d to the first surface.
double cast(const Vec3& d, double max_range) {
  double t = 0.99 * max_range;  // dome
  if (d.y > 0.0) t = std::min(t, kGroundY / d.y);
  for (const auto& s : kSpheres) t = std::min(t, hit_sphere(d, s));
  return t;
}

Vec3 normalized(const Vec3& v) {
  const double n = std::sqrt(v.x * v.x + v.y * v.y + v.z * v.z);
  return {v.x / n, v.y / n, v.z / n};
}

}  // namespace

PointSet synth_lidar(std::size_t rays, double max_range, std::uint64_t seed) {
  if (rays == 0) throw DomainError("synth_lidar needs at least one ray");
  if (!(max_range > 0.0) || !std::isfinite(max_range)) throw DomainError("synth_lidar needs a positive range");
  constexpr double deg = std::numbers::pi / 180.0;
  std::mt19937_64 rng(seed);
  PointSet cloud;
  cloud.positions.reserve(rays);
  for (std::size_t i = 0; i < rays; ++i) {
    const double az = (unit(rng) * 90.0 - 45.0) * deg;
    const double el = (unit(rng) * 28.0 - 25.0) * deg;
    const Vec3 d{std::cos(el) * std::sin(az), -std::sin(el), std::cos(el) * std::cos(az)};
    const double t = cast(d, max_range);
    cloud.positions.push_back({t * d.x, t * d.y, t * d.z});
  }
  return cloud;
}

SparseDepthMap synth_depth(const CameraIntrinsics& cam, double max_range) {
  cam.validate();
  if (!(max_range > 0.0) || !std::isfinite(max_range)) throw DomainError("synth_depth needs a positive range");
  SparseDepthMap depth(cam.height, cam.width);
  for (int v = 0; v < cam.height; ++v) {
    for (int u = 0; u < cam.width; ++u) {
      const Vec3 d = normalized(cam.back_project(u, v, 1.0));
      depth.set(v, u, cast(d, max_range) * d.z);
    }
  }
  return depth;
}

SparseDepthMap sparsify(const SparseDepthMap& dense, double density, std::uint64_t seed) {
  if (!(density > 0.0 && density <= 1.0)) throw DomainError("sparsify density must lie in (0, 1]");
  std::mt19937_64 rng(seed);
  SparseDepthMap out(dense.rows(), dense.cols());
  int first_r = -1;
  int first_c = -1;
  for (int r = 0; r < dense.rows(); ++r) {
    for (int c = 0; c < dense.cols(); ++c) {
      const bool keep = unit(rng) < density;
      if (!dense.valid(r, c)) continue;
      if (first_r < 0) {
        first_r = r;
        first_c = c;
      }
      if (keep) out.set(r, c, dense.value(r, c));
    }
  }
  if (out.valid_count() == 0 && first_r >= 0) out.set(first_r, first_c, dense.value(first_r, first_c));
  return out;
}

}  // namespace tpvd
