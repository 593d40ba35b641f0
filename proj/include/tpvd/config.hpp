#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tpvd/fusion.hpp"
#include "tpvd/grid.hpp"
#include "tpvd/propagation.hpp"
#include "tpvd/spherical.hpp"

namespace tpvd {

struct SphericalParams {
  double w0 = 1.0;
  double rho = 1.15;
  double dtheta_deg = 2.0;
  double dphi_deg = 2.0;
  double r_max = 80.0;
  int shells_per_subarea = 4;

  SphericalBinning make() const;
};

/// Everything a CLI run needs besides its input files. Loaded from JSON;
/// every key is optional, unknown keys are rejected.
///
///   {
///     "camera":       {"fx", "fy", "cx", "cy", "width", "height"},
///     "depth_binning": {"d_min", "d_max", "bins"},
///     "spherical":    {"w0", "rho", "dtheta_deg", "dphi_deg", "r_max", "shells_per_subarea"},
///     "fusion":       {"k", "steps"},
///     "gspn":         {"n_neighbors", "iterations"},
///     "affinity":     {"sigma_g", "sigma_s", "lambda"},
///     "stats":        {"cubic_cell", "distance_bins"},
///     "paths":        {"weights", "guide"}
///   }
///
/// Without a camera section the intrinsics come from the input image size
/// via CameraIntrinsics::for_image. Relative paths resolve against the
/// config file's directory.
struct SceneConfig {
  std::optional<CameraIntrinsics> camera;
  DepthBinning depth_binning = DepthBinning::outdoor();
  SphericalParams spherical;
  std::size_t fusion_k = 9;
  int fusion_steps = 4;
  int gspn_neighbors = 9;
  int gspn_iterations = 4;
  BilateralParams affinity;
  double cubic_cell = 0.4;
  std::vector<double> distance_bins{0, 10, 20, 30, 40, 50, 60, 70, 80};
  std::optional<std::filesystem::path> weights_path;
  std::optional<std::filesystem::path> guide_path;

  CameraIntrinsics camera_for(int width, int height) const;
  FusionConfig fusion() const;
  GspnConfig gspn() const;

  // Throws DomainError on parameters that the modules would reject.
  void validate() const;
};

// Throws FormatError on malformed JSON, unknown keys or wrong value types.
SceneConfig parse_config(std::string_view json_text, const std::filesystem::path& base_dir = {});
SceneConfig load_config(const std::filesystem::path& path);

}  // namespace tpvd
