#pragma once

#include <cstdint>

#include "tpvd/grid.hpp"

namespace tpvd {

/// LiDAR-like cloud: `rays` directions drawn uniformly in azimuth
/// [-45, 45] deg and elevation [-25, 3] deg about the +z axis, each ray
/// returning its first hit in a fixed procedural scene (a ground plane
/// 1.65 m below the sensor, a row of spheres, and a far dome at
/// 0.99 * max_range that catches every other ray). Angular sampling makes
/// areal density fall off as 1/d^2. Bit-identical for equal arguments.
/// Throws DomainError when rays == 0 or max_range <= 0.
PointSet synth_lidar(std::size_t rays, double max_range, std::uint64_t seed);

/// Dense depth of the same scene seen through `cam`, one ray per pixel.
SparseDepthMap synth_depth(const CameraIntrinsics& cam, double max_range);

/// Keeps each valid pixel with probability `density` (at least one pixel).
SparseDepthMap sparsify(const SparseDepthMap& dense, double density, std::uint64_t seed);

}  // namespace tpvd
