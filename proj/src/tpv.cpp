#include "tpvd/tpv.hpp"

#include <cmath>
#include <string>

#include "tpvd/error.hpp"

namespace tpvd {
namespace {

void check_shape(const MaskedGrid& g, int rows, int cols, const char* what) {
  if (g.rows() != rows || g.cols() != cols) {
    throw DimensionError(std::string(what) + " view is " + std::to_string(g.rows()) + "x" +
                         std::to_string(g.cols()) + ", expected " + std::to_string(rows) + "x" +
                         std::to_string(cols));
  }
}

// Keeps the lexicographically smallest (depth, coordinate) per cell.
void keep_nearest(MaskedGrid& coord, MaskedGrid& depth, int r, int c, double z, double value) {
  if (coord.valid(r, c)) {
    const double z0 = depth.value(r, c);
    if (z > z0 || (z == z0 && value >= coord.value(r, c))) return;
  }
  coord.set(r, c, value);
  depth.set(r, c, z);
}

void sync_depth(const MaskedGrid& coord, MaskedGrid& depth, const DepthBinning& binning,
                bool bin_is_row) {
  for (int r = 0; r < coord.rows(); ++r) {
    for (int c = 0; c < coord.cols(); ++c) {
      if (coord.valid(r, c) && !depth.valid(r, c)) {
        depth.set(r, c, binning.center(bin_is_row ? r : c));
      } else if (!coord.valid(r, c) && depth.valid(r, c)) {
        depth.clear(r, c);
      }
    }
  }
}

void fill_cells(MaskedGrid& base, const MaskedGrid& update) {
  for (int r = 0; r < base.rows(); ++r) {
    for (int c = 0; c < base.cols(); ++c) {
      if (!base.valid(r, c) && update.valid(r, c)) base.set(r, c, update.value(r, c));
    }
  }
}

}  // namespace

TpvViews TpvViews::empty(const CameraIntrinsics& cam, const DepthBinning& binning) {
  TpvViews v;
  v.front = MaskedGrid(cam.height, cam.width);
  v.top = MaskedGrid(cam.width, binning.bins());
  v.side = MaskedGrid(binning.bins(), cam.height);
  v.top_depth = v.top;
  v.side_depth = v.side;
  v.binning = binning;
  return v;
}

void TpvViews::sync_representative_depths() {
  sync_depth(top, top_depth, binning, /*bin_is_row=*/false);
  sync_depth(side, side_depth, binning, /*bin_is_row=*/true);
}

void TpvViews::validate() const {
  const int w = width();
  const int h = height();
  const int d = depth_bins();
  check_shape(top, w, d, "top");
  check_shape(side, d, h, "side");
  check_shape(top_depth, w, d, "top depth");
  check_shape(side_depth, d, h, "side depth");
  for (const MaskedGrid* g : {&front, &top, &side, &top_depth, &side_depth}) {
    const auto values = g->values();
    const auto mask = g->mask();
    for (std::size_t i = 0; i < values.size(); ++i) {
      if (mask[i] && !std::isfinite(values[i])) throw DomainError("view holds a non-finite value");
    }
  }
  validate_depth_map(front);
}

bool operator==(const TpvViews& a, const TpvViews& b) {
  return a.front == b.front && a.top == b.top && a.side == b.side && a.top_depth == b.top_depth &&
         a.side_depth == b.side_depth && a.binning.d_min() == b.binning.d_min() &&
         a.binning.d_max() == b.binning.d_max() && a.binning.bins() == b.binning.bins();
}

TpvProjection project_tpv(const PointSet& points, const CameraIntrinsics& cam,
                          const DepthBinning& binning) {
  TpvProjection out{TpvViews::empty(cam, binning), 0};
  TpvViews& views = out.views;
  for (const auto& p : points.positions) {
    const auto px = cam.project(p);
    if (!px) {
      ++out.dropped;
      continue;
    }
    const int u = px->u;
    const int v = px->v;
    const int k = binning.bin(p.z);
    if (!views.front.valid(v, u) || p.z < views.front.value(v, u)) views.front.set(v, u, p.z);
    keep_nearest(views.top, views.top_depth, u, k, p.z, v);
    keep_nearest(views.side, views.side_depth, k, v, p.z, u);
  }
  return out;
}

TpvViews merge_front_view(const TpvViews& views, const SparseDepthMap& sparse) {
  if (!views.front.same_shape(sparse)) {
    throw DimensionError("sparse depth shape differs from the front view");
  }
  TpvViews out = views;
  for (int v = 0; v < sparse.rows(); ++v) {
    for (int u = 0; u < sparse.cols(); ++u) {
      if (sparse.valid(v, u)) out.front.set(v, u, sparse.value(v, u));
    }
  }
  return out;
}

PointSet unproject_tpv(const TpvViews& views, const CameraIntrinsics& cam) {
  PointSet out;
  const auto total = views.front.valid_count() + views.top.valid_count() + views.side.valid_count();
  out.positions.reserve(total);
  out.pixels.reserve(total);
  out.sources.reserve(total);
  auto emit = [&](double u, double v, double z, ViewTag tag) {
    out.positions.push_back(cam.back_project(u, v, z));
    out.pixels.push_back({static_cast<int>(std::lround(u)), static_cast<int>(std::lround(v))});
    out.sources.push_back(tag);
  };
  for (int v = 0; v < views.front.rows(); ++v) {
    for (int u = 0; u < views.front.cols(); ++u) {
      if (views.front.valid(v, u)) emit(u, v, views.front.value(v, u), ViewTag::front);
    }
  }
  for (int u = 0; u < views.top.rows(); ++u) {
    for (int k = 0; k < views.top.cols(); ++k) {
      if (!views.top.valid(u, k)) continue;
      const double z = views.top_depth.valid(u, k) ? views.top_depth.value(u, k) : views.binning.center(k);
      emit(u, views.top.value(u, k), z, ViewTag::top);
    }
  }
  for (int k = 0; k < views.side.rows(); ++k) {
    for (int v = 0; v < views.side.cols(); ++v) {
      if (!views.side.valid(k, v)) continue;
      const double z = views.side_depth.valid(k, v) ? views.side_depth.value(k, v) : views.binning.center(k);
      emit(views.side.value(k, v), v, z, ViewTag::side);
    }
  }
  return out;
}

TpvViews fill_merge(const TpvViews& base, const TpvViews& update) {
  TpvViews out = base;
  fill_cells(out.front, update.front);
  for (int r = 0; r < out.top.rows(); ++r) {
    for (int c = 0; c < out.top.cols(); ++c) {
      if (!out.top.valid(r, c) && update.top.valid(r, c)) {
        out.top.set(r, c, update.top.value(r, c));
        out.top_depth.set(r, c, update.top_depth.valid(r, c) ? update.top_depth.value(r, c)
                                                             : base.binning.center(c));
      }
    }
  }
  for (int r = 0; r < out.side.rows(); ++r) {
    for (int c = 0; c < out.side.cols(); ++c) {
      if (!out.side.valid(r, c) && update.side.valid(r, c)) {
        out.side.set(r, c, update.side.value(r, c));
        out.side_depth.set(r, c, update.side_depth.valid(r, c) ? update.side_depth.value(r, c)
                                                               : base.binning.center(r));
      }
    }
  }
  return out;
}

}  // namespace tpvd
