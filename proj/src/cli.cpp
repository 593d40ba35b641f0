#include "tpvd/cli.hpp"

#include <algorithm>
#include <filesystem>
#include <optional>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"
#include "tpvd/config.hpp"
#include "tpvd/error.hpp"
#include "tpvd/evaluation.hpp"
#include "tpvd/fusion.hpp"
#include "tpvd/io.hpp"
#include "tpvd/propagation.hpp"
#include "tpvd/spherical.hpp"
#include "tpvd/synth.hpp"
#include "tpvd/tpv.hpp"

namespace tpvd {
namespace {

namespace fs = std::filesystem;
using io::format_number;

struct Options {
  std::string depth;
  std::string config;
  std::string weights;
  std::string out;
  std::string out_dir;
  std::string views;
  std::string cloud;
  std::string gt_out;
  std::vector<std::string> preds;
  std::vector<std::string> gts;
  int width = 64;
  int height = 64;
  double density = 0.05;
  double max_range = 80.0;
  std::uint64_t seed = 1;
};

SceneConfig scene_config(const Options& o) { return o.config.empty() ? SceneConfig{} : load_config(o.config); }

io::ModelWeights model_weights(const Options& o, const SceneConfig& cfg) {
  if (!o.weights.empty()) return io::interpret_weights(io::read_weights(o.weights));
  if (cfg.weights_path) return io::interpret_weights(io::read_weights(*cfg.weights_path));
  return {};
}

FusionConfig fusion_config(const SceneConfig& cfg, const io::ModelWeights& w) {
  FusionConfig f = cfg.fusion();
  if (w.filter3) f.dasc_filter = *w.filter3;
  for (std::size_t v = 0; v < 3; ++v) {
    if (w.h2c[v]) f.update_filters[v] = *w.h2c[v];
  }
  if (w.point_map) f.point_map = *w.point_map;
  return f;
}

std::array<Filter2, 3> head_filters(const io::ModelWeights& w) {
  std::array<Filter2, 3> f{};
  for (std::size_t v = 0; v < 3; ++v) {
    if (w.h2c[v]) f[v] = *w.h2c[v];
  }
  return f;
}

TpvViews decompose(const SparseDepthMap& depth, const CameraIntrinsics& cam, const DepthBinning& binning,
                   std::size_t* dropped = nullptr) {
  validate_depth_map(depth);
  auto proj = project_tpv(depth_to_points(depth, cam), cam, binning);
  if (dropped) *dropped = proj.dropped;
  return merge_front_view(proj.views, depth);
}

std::optional<MaskedGrid> load_guide(const SceneConfig& cfg) {
  if (!cfg.guide_path) return std::nullopt;
  const auto img = io::decode_gray16(io::read_file(*cfg.guide_path));
  MaskedGrid g(img.rows, img.cols);
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) g.set(r, c, img.samples[g.index(r, c)] / 65535.0);
  }
  return g;
}

TpvViews refine(const TpvViews& coarse, const CameraIntrinsics& cam, const SceneConfig& cfg,
                const io::ModelWeights& w) {
  const auto guide = load_guide(cfg);
  if (guide && !guide->same_shape(coarse.front)) throw DimensionError("guide image shape differs from the depth map");
  auto affinities = default_affinities(coarse, cfg.gspn_neighbors, guide ? &*guide : nullptr, cfg.affinity);
  if (w.affinity) affinities[0] = *w.affinity;
  GspnConfig g = cfg.gspn();
  if (w.point_map && w.point_map->out_channels == 3 && w.point_map->in_channels == 3) g.point_map = *w.point_map;
  return gspn_refine(coarse, affinities, cam, g).views;
}

std::string density_text(const MaskedGrid& g) { return format_number(100.0 * g.density()); }

int run_decompose(const Options& o, std::ostream& out) {
  const SceneConfig cfg = scene_config(o);
  const SparseDepthMap depth = io::read_depth_png(o.depth);
  const CameraIntrinsics cam = cfg.camera_for(depth.cols(), depth.rows());
  std::size_t dropped = 0;
  const TpvViews views = decompose(depth, cam, cfg.depth_binning, &dropped);

  nlohmann::ordered_json summary;
  summary["width"] = views.width();
  summary["height"] = views.height();
  summary["depth_bins"] = views.depth_bins();
  summary["points"] = depth.valid_count();
  summary["dropped"] = dropped;
  summary["density"] = {{"front", views.front.density()}, {"top", views.top.density()}, {"side", views.side.density()}};
  summary["valid"] = {{"front", views.front.valid_count()},
                      {"top", views.top.valid_count()},
                      {"side", views.side.valid_count()}};

  const fs::path dir = o.out_dir;
  fs::create_directories(dir);
  io::write_depth_png(views.front, dir / "front.png");
  io::write_view_png(views.top, dir / "top.png");
  io::write_view_png(views.side, dir / "side.png");
  io::write_file_atomic(dir / "summary.json", summary.dump(2) + "\n");
  out << "front " << density_text(views.front) << "%  top " << density_text(views.top) << "%  side "
      << density_text(views.side) << "%  dropped " << dropped << "\n";
  return kExitOk;
}

int run_fuse(const Options& o, std::ostream& out) {
  const SceneConfig cfg = scene_config(o);
  const auto weights = model_weights(o, cfg);
  const SparseDepthMap depth = io::read_depth_png(o.depth);
  const CameraIntrinsics cam = cfg.camera_for(depth.cols(), depth.rows());
  const TpvViews views = decompose(depth, cam, cfg.depth_binning);

  std::vector<TpvViews> history;
  const TpvViews fused = fuse(views, cam, fusion_config(cfg, weights), &history);

  std::ostringstream log;
  log << "step,front_density,top_density,side_density\n";
  log << "0," << format_number(views.front.density()) << "," << format_number(views.top.density()) << ","
      << format_number(views.side.density()) << "\n";
  for (std::size_t s = 0; s < history.size(); ++s) {
    log << s + 1 << "," << format_number(history[s].front.density()) << ","
        << format_number(history[s].top.density()) << "," << format_number(history[s].side.density()) << "\n";
  }
  io::write_depth_png(fused.front, o.out);
  io::write_file_atomic(o.out + ".steps.csv", log.str());
  out << "front density " << density_text(views.front) << "% -> " << density_text(fused.front) << "%\n";
  return kExitOk;
}

int run_refine(const Options& o, std::ostream& out) {
  const SceneConfig cfg = scene_config(o);
  const auto weights = model_weights(o, cfg);
  const fs::path dir = o.views;
  TpvViews views;
  views.front = io::read_depth_png(dir / "front.png");
  views.top = io::read_view_png(dir / "top.png");
  views.side = io::read_view_png(dir / "side.png");
  views.binning = cfg.depth_binning;
  views.top_depth = MaskedGrid(views.top.rows(), views.top.cols());
  views.side_depth = MaskedGrid(views.side.rows(), views.side.cols());
  views.validate();
  views.sync_representative_depths();
  const CameraIntrinsics cam = cfg.camera_for(views.width(), views.height());

  const TpvViews refined = refine(views, cam, cfg, weights);
  io::write_depth_png(refined.front, o.out);
  out << "front density " << density_text(views.front) << "% -> " << density_text(refined.front) << "%\n";
  return kExitOk;
}

int run_pipeline(const Options& o, std::ostream& out) {
  const SceneConfig cfg = scene_config(o);
  const auto weights = model_weights(o, cfg);
  const SparseDepthMap depth = io::read_depth_png(o.depth);
  const CameraIntrinsics cam = cfg.camera_for(depth.cols(), depth.rows());
  const TpvViews views = decompose(depth, cam, cfg.depth_binning);
  const TpvViews fused = fuse(views, cam, fusion_config(cfg, weights));
  const TpvViews coarse = coarse_heads(fused, head_filters(weights));
  const TpvViews refined = refine(coarse, cam, cfg, weights);
  validate_depth_map(refined.front);
  io::write_depth_png(refined.front, o.out);
  out << "front density " << density_text(views.front) << "% -> fused " << density_text(fused.front)
      << "% -> refined " << density_text(refined.front) << "%\n";
  return kExitOk;
}

int run_eval(const Options& o, std::ostream& out) {
  if (o.preds.size() != o.gts.size()) throw DomainError("eval needs one --gt per --pred");
  std::vector<MetricsReport> reports;
  for (std::size_t i = 0; i < o.preds.size(); ++i) {
    reports.push_back(evaluate(io::read_depth_png(o.preds[i]), io::read_depth_png(o.gts[i])));
  }
  auto row = [](std::ostream& s, const std::string& scene, const MetricsReport& m) {
    s << scene << "," << m.n_valid << "," << format_number(m.rmse_mm()) << "," << format_number(m.mae_mm()) << ","
      << format_number(m.irmse) << "," << format_number(m.imae) << "," << format_number(m.rel) << ","
      << format_number(m.rmselog) << "," << format_number(m.delta1) << "," << format_number(m.delta2) << ","
      << format_number(m.delta3) << "\n";
  };
  std::ostringstream csv;
  csv << "scene,n_valid,rmse_mm,mae_mm,irmse,imae,rel,rmselog,delta1,delta2,delta3\n";
  for (std::size_t i = 0; i < reports.size(); ++i) row(csv, fs::path(o.preds[i]).filename().string(), reports[i]);
  const MetricsReport mean = mean_report(reports);
  row(csv, "mean", mean);
  io::write_file_atomic(o.out, csv.str());
  out << "RMSE " << format_number(mean.rmse_mm()) << " mm  MAE " << format_number(mean.mae_mm()) << " mm  delta1 "
      << format_number(mean.delta1) << "%\n";
  return kExitOk;
}

PointSet load_cloud(const std::string& spec, const SceneConfig& cfg) {
  if (spec.rfind("synth:", 0) == 0) {
    const std::string rest = spec.substr(6);
    const auto comma = rest.find(',');
    if (comma == std::string::npos) throw FormatError("synthetic cloud must be given as synth:SEED,RAYS");
    std::uint64_t seed = 0;
    std::size_t rays = 0;
    try {
      std::size_t used = 0;
      seed = std::stoull(rest.substr(0, comma), &used);
      if (used != comma) throw std::invalid_argument("seed");
      rays = std::stoull(rest.substr(comma + 1), &used);
      if (used != rest.size() - comma - 1) throw std::invalid_argument("rays");
    } catch (const std::logic_error&) {
      throw FormatError("synthetic cloud must be given as synth:SEED,RAYS");
    }
    return synth_lidar(rays, cfg.spherical.r_max, seed);
  }
  const fs::path path = spec;
  if (path.extension() == ".png") {
    const SparseDepthMap depth = io::read_depth_png(path);
    validate_depth_map(depth);
    return depth_to_points(depth, cfg.camera_for(depth.cols(), depth.rows()));
  }
  return io::read_cloud_text(path);
}

int run_stats(const Options& o, std::ostream& out) {
  const SceneConfig cfg = scene_config(o);
  const PointSet cloud = load_cloud(o.cloud, cfg);
  const auto rows = non_empty_stats(cloud, cfg.cubic_cell, cfg.spherical.make(), cfg.distance_bins);
  std::ostringstream csv;
  csv << "range_lo,range_hi,cubic_units,cubic_non_empty,cubic_percent,spherical_units,spherical_non_empty,"
         "spherical_percent\n";
  for (const auto& r : rows) {
    csv << format_number(r.range_lo) << "," << format_number(r.range_hi) << "," << r.cubic_units << ","
        << r.cubic_non_empty << "," << format_number(r.cubic_percent()) << "," << r.spherical_units << ","
        << r.spherical_non_empty << "," << format_number(r.spherical_percent()) << "\n";
    out << format_number(r.range_lo) << "-" << format_number(r.range_hi) << " m: cubic "
        << format_number(r.cubic_percent()) << "%  spherical " << format_number(r.spherical_percent()) << "%\n";
  }
  io::write_file_atomic(o.out, csv.str());
  return kExitOk;
}

int run_synth(const Options& o, std::ostream& out) {
  const SceneConfig cfg = scene_config(o);
  if (o.width < 1 || o.height < 1) throw DomainError("synthetic image needs a positive size");
  const CameraIntrinsics cam = cfg.camera_for(o.width, o.height);
  const SparseDepthMap dense = synth_depth(cam, o.max_range);
  const SparseDepthMap sparse = sparsify(dense, o.density, o.seed);
  io::write_depth_png(sparse, o.out);
  if (!o.gt_out.empty()) io::write_depth_png(dense, o.gt_out);
  out << "wrote " << sparse.valid_count() << " of " << sparse.size() << " pixels\n";
  return kExitOk;
}

}  // namespace

int cli_run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Tri-perspective-view depth completion toolkit", "tpvd"};
  app.require_subcommand(1);
  Options o;

  auto* decompose_cmd = app.add_subcommand("decompose", "Split a sparse depth map into front/top/side views");
  decompose_cmd->add_option("--depth", o.depth, "Sparse depth PNG")->required();
  decompose_cmd->add_option("--config", o.config, "JSON scene config");
  decompose_cmd->add_option("--out-dir", o.out_dir, "Output directory")->required();

  auto* fuse_cmd = app.add_subcommand("fuse", "Run the 2D-3D-2D fusion loop");
  fuse_cmd->add_option("--depth", o.depth, "Sparse depth PNG")->required();
  fuse_cmd->add_option("--config", o.config, "JSON scene config");
  fuse_cmd->add_option("--weights", o.weights, "TPVW1 weight file");
  fuse_cmd->add_option("--out", o.out, "Fused front view PNG")->required();

  auto* refine_cmd = app.add_subcommand("refine", "Geometric propagation over decomposed views");
  refine_cmd->add_option("--views", o.views, "Directory with front.png, top.png, side.png")->required();
  refine_cmd->add_option("--config", o.config, "JSON scene config");
  refine_cmd->add_option("--weights", o.weights, "TPVW1 weight file");
  refine_cmd->add_option("--out", o.out, "Refined depth PNG")->required();

  auto* pipeline_cmd = app.add_subcommand("pipeline", "decompose, fuse, coarse heads and refine");
  pipeline_cmd->add_option("--depth", o.depth, "Sparse depth PNG")->required();
  pipeline_cmd->add_option("--config", o.config, "JSON scene config");
  pipeline_cmd->add_option("--weights", o.weights, "TPVW1 weight file");
  pipeline_cmd->add_option("--out", o.out, "Completed depth PNG")->required();

  auto* eval_cmd = app.add_subcommand("eval", "Depth metrics against ground truth");
  eval_cmd->add_option("--pred", o.preds, "Predicted depth PNG (repeatable)")->required();
  eval_cmd->add_option("--gt", o.gts, "Ground-truth depth PNG (repeatable)")->required();
  eval_cmd->add_option("--out", o.out, "CSV report")->required();

  auto* stats_cmd = app.add_subcommand("stats", "Non-empty unit shares, cubic versus spherical");
  stats_cmd->add_option("--cloud", o.cloud, "xyz text file, depth PNG, or synth:SEED,RAYS")->required();
  stats_cmd->add_option("--config", o.config, "JSON scene config");
  stats_cmd->add_option("--out", o.out, "CSV report")->required();

  auto* synth_cmd = app.add_subcommand("synth", "Write a synthetic sparse depth map");
  synth_cmd->add_option("--out", o.out, "Sparse depth PNG")->required();
  synth_cmd->add_option("--gt", o.gt_out, "Also write the dense depth here");
  synth_cmd->add_option("--config", o.config, "JSON scene config");
  synth_cmd->add_option("--width", o.width, "Image width")->capture_default_str();
  synth_cmd->add_option("--height", o.height, "Image height")->capture_default_str();
  synth_cmd->add_option("--density", o.density, "Share of pixels kept")->capture_default_str();
  synth_cmd->add_option("--max-range", o.max_range, "Scene depth limit in meters")->capture_default_str();
  synth_cmd->add_option("--seed", o.seed, "Random seed")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*decompose_cmd) return run_decompose(o, out);
    if (*fuse_cmd) return run_fuse(o, out);
    if (*refine_cmd) return run_refine(o, out);
    if (*pipeline_cmd) return run_pipeline(o, out);
    if (*eval_cmd) return run_eval(o, out);
    if (*stats_cmd) return run_stats(o, out);
    if (*synth_cmd) return run_synth(o, out);
  } catch (const FormatError& e) {
    err << "tpvd: " << e.what() << "\n";
    return kExitFormat;
  } catch (const IoError& e) {
    err << "tpvd: " << e.what() << "\n";
    return kExitFormat;
  } catch (const fs::filesystem_error& e) {
    err << "tpvd: " << e.what() << "\n";
    return kExitFormat;
  } catch (const Error& e) {
    err << "tpvd: " << e.what() << "\n";
    return kExitDomain;
  }
  return kExitUsage;
}

}  // namespace tpvd
