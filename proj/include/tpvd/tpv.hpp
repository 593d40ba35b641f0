#pragma once

#include <cstddef>

#include "tpvd/grid.hpp"

namespace tpvd {

/// Top, side and front depth views of one point cloud.
///
///   front  H x W  (row v, column u)      stores metric depth z
///   top    W x D  (column u, depth bin)  stores the row v of the cell's point
///   side   D x H  (depth bin, row v)     stores the column u of the cell's point
///
/// `top_depth` and `side_depth` share the masks of `top` and `side` and hold
/// the forward depth of each cell's representative point. Cells that were
/// filled without a representative (filtering, propagation, files) carry the
/// centre depth of their bin.
struct TpvViews {
  MaskedGrid front;
  MaskedGrid top;
  MaskedGrid side;
  MaskedGrid top_depth;
  MaskedGrid side_depth;
  DepthBinning binning;

  static TpvViews empty(const CameraIntrinsics& cam, const DepthBinning& binning);

  int width() const { return front.cols(); }
  int height() const { return front.rows(); }
  int depth_bins() const { return binning.bins(); }

  // Re-establishes the representative-depth masks after `top` or `side`
  // changed: new cells get their bin centre, vanished cells are cleared.
  void sync_representative_depths();

  // Throws DimensionError on inconsistent shapes, DomainError on non-finite
  // stored values.
  void validate() const;

  friend bool operator==(const TpvViews& a, const TpvViews& b);
};

struct TpvProjection {
  TpvViews views;
  std::size_t dropped = 0;  // behind the camera or outside the image
};

/// Decomposes a cloud into the three views. Every view cell keeps the point
/// with the smallest z; ties fall to the smaller stored coordinate.
TpvProjection project_tpv(const PointSet& points, const CameraIntrinsics& cam,
                          const DepthBinning& binning);

/// Front view takes the sparse depth wherever the sparse mask is set.
TpvViews merge_front_view(const TpvViews& views, const SparseDepthMap& sparse);

/// Union of the points encoded by all three views, tagged with their source
/// view. Order: front cells, then top cells, then side cells, row-major.
PointSet unproject_tpv(const TpvViews& views, const CameraIntrinsics& cam);

/// Fill-only merge: cells invalid in `base` and valid in `update` are copied
/// (with their representative depths); valid cells of `base` never change.
TpvViews fill_merge(const TpvViews& base, const TpvViews& update);

}  // namespace tpvd
