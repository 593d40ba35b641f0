#pragma once

#include <array>
#include <cstddef>
#include <optional>
#include <vector>

#include "tpvd/fusion.hpp"
#include "tpvd/grid.hpp"
#include "tpvd/tpv.hpp"

namespace tpvd {

/// Per-pixel (du, dv, weight) neighbour lists stored as `slots` planes of
/// H*W entries each, so plane s holds the s-th neighbour of every pixel.
/// Inactive slots (clipped at the border) carry zero offset and weight.
///
/// du is a column offset and dv a row offset; either may be fractional, in
/// which case the neighbour is read with bilinear interpolation.
struct AffinityField {
  int height = 0;
  int width = 0;
  int slots = 0;
  std::vector<double> du;
  std::vector<double> dv;
  std::vector<double> weight;
  std::vector<std::uint8_t> active;

  static AffinityField empty(int height, int width, int slots);

  std::size_t pixels() const { return static_cast<std::size_t>(height) * static_cast<std::size_t>(width); }
  std::size_t at(int slot, int r, int c) const {
    return static_cast<std::size_t>(slot) * pixels() + static_cast<std::size_t>(r) * static_cast<std::size_t>(width) +
           static_cast<std::size_t>(c);
  }
  int neighbour_count(int r, int c) const;
  bool same_shape(const MaskedGrid& g) const { return g.rows() == height && g.cols() == width; }

  // Throws FormatError on inconsistent tables or non-finite entries,
  // DomainError when a pixel's absolute weights sum above 1 or an offset
  // points outside the grid.
  void validate() const;

  friend bool operator==(const AffinityField&, const AffinityField&) = default;
};

/// H x W x n x 2 table of (du, dv) offsets, row-major.
struct OffsetTable {
  int height = 0;
  int width = 0;
  int neighbours = 0;
  std::vector<double> data;
};

/// One propagation step:
///   out = (1 - sum w) * o + sum w * o[neighbour]
///
/// Invalid cells of `o` never contribute. A valid pixel with some invalid
/// neighbours rescales its remaining weights so their absolute sum is
/// unchanged; an invalid pixel with valid neighbours becomes the
/// |w|-weighted mean of them. Jacobi update: reads only the input grid.
MaskedGrid spn_step(const MaskedGrid& o, const AffinityField& aff);

/// Fixed 3x3 neighbourhood without the centre, clipped at the border.
/// Slot order is row-major over (dv, du). Weights are zero.
AffinityField cspn_neighbors(int height, int width);

/// Installs supplied offsets; targets outside the grid are clamped onto the
/// border. Weights are zero. Throws FormatError on a malformed table.
AffinityField nlspn_neighbors(int height, int width, const OffsetTable& offsets);

/// Offsets from every cell to its n nearest valid cells of `grid` (itself
/// excluded), nearest first, ties to the lower row-major index. Cells with
/// fewer candidates are padded with zero offsets.
OffsetTable nearest_valid_offsets(const MaskedGrid& grid, int n);

struct BilateralParams {
  double sigma_g = 0.1;
  double sigma_s = 2.0;
  double lambda = 0.9;
};

/// Fills the weights of `skeleton`:
///   w(p, q) = exp(-(g(p) - g(q))^2 / 2 sigma_g^2) * exp(-|q - p|^2 / 2 sigma_s^2)
/// normalised so that each pixel's weights sum to lambda. Without a guide the
/// range term is 1. Throws DomainError for lambda outside [0, 1].
AffinityField bilateral_affinity(AffinityField skeleton, const MaskedGrid* guide, const BilateralParams& params);

struct GspnConfig {
  int n_neighbors = 9;
  int iterations = 4;
  PointwiseMap point_map = PointwiseMap::identity();
  DepthBinning binning = DepthBinning::outdoor();

  void validate() const;
};

struct GspnResult {
  TpvViews views;
  // Valid-cell counts of (front, top, side) after each iteration.
  std::vector<std::array<std::size_t, 3>> valid_counts;
};

/// Geometric propagation over the three coarse views. Each iteration runs
/// spn_step per view, lifts the three propagated views to 3D, applies
/// cfg.point_map to the point coordinates, re-projects, and fill-merges the
/// result into the propagated views. Affinities are indexed by ViewTag.
GspnResult gspn_refine(const TpvViews& coarse, const std::array<AffinityField, 3>& affinities,
                       const CameraIntrinsics& cam, const GspnConfig& cfg);

/// Default affinity provider for all three views: nearest-valid offsets of
/// each coarse view with bilateral weights; the guide applies to the front
/// view only.
std::array<AffinityField, 3> default_affinities(const TpvViews& coarse, int n_neighbors, const MaskedGrid* guide,
                                                const BilateralParams& params);

}  // namespace tpvd
