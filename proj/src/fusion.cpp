#include "tpvd/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "tpvd/error.hpp"
#include "tpvd/knn.hpp"

namespace tpvd {

PointwiseMap PointwiseMap::linear(std::vector<double> weight, std::vector<double> bias, int out_channels,
                                  int in_channels) {
  PointwiseMap m{Kind::linear, std::move(weight), std::move(bias), out_channels, in_channels};
  m.validate(in_channels);
  return m;
}

int PointwiseMap::output_channels(int input_channels) const {
  switch (kind) {
    case Kind::identity:
      return input_channels;
    case Kind::mean_pool:
      return 1;
    case Kind::linear:
      return out_channels;
  }
  return input_channels;
}

void PointwiseMap::validate(int input_channels) const {
  if (kind != Kind::linear) return;
  if (out_channels < 1 || in_channels < 1) throw DimensionError("linear map needs positive channel counts");
  if (weight.size() != static_cast<std::size_t>(out_channels) * static_cast<std::size_t>(in_channels)) {
    throw DimensionError("linear map weight is not out x in");
  }
  if (!bias.empty() && bias.size() != static_cast<std::size_t>(out_channels)) {
    throw DimensionError("linear map bias length differs from its output channels");
  }
  if (in_channels != input_channels) {
    throw DimensionError("linear map expects " + std::to_string(in_channels) + " input channels, got " +
                         std::to_string(input_channels));
  }
  for (double w : weight) {
    if (!std::isfinite(w)) throw DomainError("linear map weights must be finite");
  }
  for (double b : bias) {
    if (!std::isfinite(b)) throw DomainError("linear map bias must be finite");
  }
}

void PointwiseMap::apply(std::span<const double> in, std::span<double> out) const {
  switch (kind) {
    case Kind::identity:
      std::copy(in.begin(), in.end(), out.begin());
      return;
    case Kind::mean_pool: {
      double s = 0.0;
      for (double v : in) s += v;
      out[0] = in.empty() ? 0.0 : s / static_cast<double>(in.size());
      return;
    }
    case Kind::linear:
      for (int o = 0; o < out_channels; ++o) {
        double s = bias.empty() ? 0.0 : bias[static_cast<std::size_t>(o)];
        for (int i = 0; i < in_channels; ++i) {
          s += weight[static_cast<std::size_t>(o * in_channels + i)] * in[static_cast<std::size_t>(i)];
        }
        out[static_cast<std::size_t>(o)] = s;
      }
      return;
  }
}

void FusionConfig::validate() const {
  if (k < 1) throw DomainError("fusion needs k >= 1");
  if (steps < 1) throw DomainError("fusion needs at least one step");
  for (const auto& f : update_filters) f.validate();
}

PointSet knn_aggregate(const PointSet& points, std::size_t k, const PointwiseMap& map) {
  points.validate();
  if (points.empty()) throw DomainError("KNN aggregation needs at least one point");
  if (k < 1 || k > points.size()) {
    throw DomainError("k = " + std::to_string(k) + " must lie in [1, " + std::to_string(points.size()) + "]");
  }
  const int in_ch = points.has_features() ? points.channels : 3;
  map.validate(in_ch);
  const int out_ch = map.output_channels(in_ch);

  auto input_row = [&](std::size_t i, std::span<double> row) {
    if (points.has_features()) {
      const auto f = points.feature(i);
      std::copy(f.begin(), f.end(), row.begin());
    } else {
      row[0] = points.positions[i].x;
      row[1] = points.positions[i].y;
      row[2] = points.positions[i].z;
    }
  };

  const KnnIndex index(points.positions);
  const auto neighbours = index.query_all(k);

  PointSet out;
  out.positions = points.positions;
  out.pixels = points.pixels;
  out.sources = points.sources;
  out.channels = out_ch;
  out.features.resize(points.size() * static_cast<std::size_t>(out_ch));
  std::vector<double> row(static_cast<std::size_t>(in_ch));
  std::vector<double> mean(static_cast<std::size_t>(in_ch));
  for (std::size_t i = 0; i < points.size(); ++i) {
    std::fill(mean.begin(), mean.end(), 0.0);
    for (std::size_t j = 0; j < k; ++j) {
      input_row(neighbours[i * k + j], row);
      for (std::size_t c = 0; c < mean.size(); ++c) mean[c] += row[c];
    }
    for (double& m : mean) m /= static_cast<double>(k);
    map.apply(mean, out.feature(i));
  }
  return out;
}

TpvViews filter_views(const TpvViews& views, const std::array<Filter2, 3>& filters) {
  TpvViews out = views;
  out.front = apply_filter(views.front, filters[0]);
  out.top = apply_filter(views.top, filters[1]);
  out.side = apply_filter(views.side, filters[2]);
  for (int r = 0; r < out.front.rows(); ++r) {
    for (int c = 0; c < out.front.cols(); ++c) {
      const double z = out.front.value(r, c);
      if (out.front.valid(r, c) && !(z > 0.0 && std::isfinite(z))) out.front.clear(r, c);
    }
  }
  out.sync_representative_depths();
  return out;
}

TpvViews fuse_step(const TpvViews& views, const CameraIntrinsics& cam, const FusionConfig& cfg,
                   FusionTrace* trace) {
  cfg.validate();
  views.validate();
  const PointSet lifted = unproject_tpv(views, cam);
  if (lifted.empty()) return views;

  const PointSet aggregated = knn_aggregate(lifted, std::min(cfg.k, lifted.size()), cfg.point_map);
  const SphericalGrid spherical = dasc_apply(bin_points(aggregated, cfg.binning), cfg.dasc_filter);

  PointSet cell_points;
  cell_points.channels = spherical.channels;
  cell_points.features = spherical.features;
  cell_points.positions.reserve(spherical.size());
  for (const auto& cell : spherical.cells) {
    const auto s = spherical.binning.center(cell);
    cell_points.positions.push_back(from_spherical(s.r, s.theta, s.phi));
  }

  const TpvViews reprojected = filter_views(project_tpv(cell_points, cam, views.binning).views, cfg.update_filters);
  TpvViews out = fill_merge(views, reprojected);
  if (trace) *trace = {aggregated, spherical, std::move(cell_points), reprojected};
  return out;
}

TpvViews fuse(const TpvViews& views, const CameraIntrinsics& cam, const FusionConfig& cfg,
              std::vector<TpvViews>* history) {
  cfg.validate();
  TpvViews current = views;
  for (int step = 0; step < cfg.steps; ++step) {
    current = fuse_step(current, cam, cfg);
    if (history) history->push_back(current);
  }
  return current;
}

TpvViews coarse_heads(const TpvViews& views, const std::array<Filter2, 3>& filters) {
  return filter_views(views, filters);
}

}  // namespace tpvd
