#include "tpvd/config.hpp"

#include <cmath>
#include <numbers>

#include "json.hpp"
#include "tpvd/error.hpp"
#include "tpvd/io.hpp"

namespace tpvd {
namespace {

using nlohmann::json;

// Reads one JSON object section, rejecting keys not listed in `known`.
class Section {
 public:
  Section(const json& j, std::string name, std::initializer_list<std::string_view> known) : j_(j), name_(std::move(name)) {
    if (!j.is_object()) throw FormatError("config section '" + name_ + "' must be an object");
    for (const auto& [key, _] : j.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        throw FormatError("unknown config key '" + name_ + "." + key + "'");
      }
    }
  }

  void number(const char* key, double& out) const {
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number()) throw FormatError("config key '" + name_ + "." + key + "' must be a number");
    out = v.get<double>();
  }

  template <class Int>
  void integer(const char* key, Int& out) const {
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_number_integer()) throw FormatError("config key '" + name_ + "." + key + "' must be an integer");
    const auto x = v.get<long long>();
    if (x < 0 || x > 1'000'000'000) throw FormatError("config key '" + name_ + "." + key + "' is out of range");
    out = static_cast<Int>(x);
  }

  void path(const char* key, std::optional<std::filesystem::path>& out, const std::filesystem::path& base) const {
    if (!j_.contains(key)) return;
    const auto& v = j_.at(key);
    if (!v.is_string()) throw FormatError("config key '" + name_ + "." + key + "' must be a string");
    std::filesystem::path p = v.get<std::string>();
    out = p.is_relative() && !base.empty() ? base / p : p;
  }

  const json& at(const char* key) const { return j_.at(key); }
  bool has(const char* key) const { return j_.contains(key); }

 private:
  const json& j_;
  std::string name_;
};

}  // namespace

SphericalBinning SphericalParams::make() const {
  constexpr double deg = std::numbers::pi / 180.0;
  return make_distance_aware_binning(r_max, w0, rho, dtheta_deg * deg, dphi_deg * deg, shells_per_subarea);
}

CameraIntrinsics SceneConfig::camera_for(int width, int height) const {
  if (!camera) return CameraIntrinsics::for_image(width, height);
  if (camera->width != width || camera->height != height) {
    throw DimensionError("config camera is " + std::to_string(camera->width) + "x" + std::to_string(camera->height) +
                         " but the input image is " + std::to_string(width) + "x" + std::to_string(height));
  }
  return *camera;
}

FusionConfig SceneConfig::fusion() const {
  FusionConfig cfg;
  cfg.k = fusion_k;
  cfg.steps = fusion_steps;
  cfg.binning = spherical.make();
  return cfg;
}

GspnConfig SceneConfig::gspn() const {
  GspnConfig cfg;
  cfg.n_neighbors = gspn_neighbors;
  cfg.iterations = gspn_iterations;
  cfg.binning = depth_binning;
  return cfg;
}

void SceneConfig::validate() const {
  if (camera) camera->validate();
  (void)spherical.make();
  fusion().validate();
  if (gspn_neighbors < 1 || gspn_iterations < 1) throw DomainError("gspn needs n_neighbors >= 1 and iterations >= 1");
  if (!(affinity.lambda >= 0.0 && affinity.lambda <= 1.0)) throw DomainError("affinity lambda must lie in [0, 1]");
  if (!(affinity.sigma_g > 0.0) || !(affinity.sigma_s > 0.0)) throw DomainError("affinity sigmas must be positive");
  if (!(cubic_cell > 0.0) || !std::isfinite(cubic_cell)) throw DomainError("stats cubic_cell must be positive");
  if (distance_bins.size() < 2) throw DomainError("stats distance_bins needs at least two edges");
  for (std::size_t i = 1; i < distance_bins.size(); ++i) {
    if (!(distance_bins[i] > distance_bins[i - 1])) throw DomainError("stats distance_bins must increase");
  }
}

SceneConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  json root;
  try {
    root = json::parse(text);
  } catch (const json::parse_error& e) {
    throw FormatError(std::string("config is not valid JSON: ") + e.what());
  }
  const Section top(root, "config",
                    {"camera", "depth_binning", "spherical", "fusion", "gspn", "affinity", "stats", "paths"});
  SceneConfig cfg;

  if (top.has("camera")) {
    const Section s(top.at("camera"), "camera", {"fx", "fy", "cx", "cy", "width", "height"});
    for (const char* key : {"fx", "fy", "cx", "cy", "width", "height"}) {
      if (!top.at("camera").contains(key)) throw FormatError(std::string("camera section needs '") + key + "'");
    }
    CameraIntrinsics cam;
    s.number("fx", cam.fx);
    s.number("fy", cam.fy);
    s.number("cx", cam.cx);
    s.number("cy", cam.cy);
    s.integer("width", cam.width);
    s.integer("height", cam.height);
    cfg.camera = cam;
  }
  if (top.has("depth_binning")) {
    const Section s(top.at("depth_binning"), "depth_binning", {"d_min", "d_max", "bins"});
    double lo = cfg.depth_binning.d_min();
    double hi = cfg.depth_binning.d_max();
    int bins = cfg.depth_binning.bins();
    s.number("d_min", lo);
    s.number("d_max", hi);
    s.integer("bins", bins);
    cfg.depth_binning = DepthBinning(lo, hi, bins);
  }
  if (top.has("spherical")) {
    const Section s(top.at("spherical"), "spherical",
                    {"w0", "rho", "dtheta_deg", "dphi_deg", "r_max", "shells_per_subarea"});
    s.number("w0", cfg.spherical.w0);
    s.number("rho", cfg.spherical.rho);
    s.number("dtheta_deg", cfg.spherical.dtheta_deg);
    s.number("dphi_deg", cfg.spherical.dphi_deg);
    s.number("r_max", cfg.spherical.r_max);
    s.integer("shells_per_subarea", cfg.spherical.shells_per_subarea);
  }
  if (top.has("fusion")) {
    const Section s(top.at("fusion"), "fusion", {"k", "steps"});
    s.integer("k", cfg.fusion_k);
    s.integer("steps", cfg.fusion_steps);
  }
  if (top.has("gspn")) {
    const Section s(top.at("gspn"), "gspn", {"n_neighbors", "iterations"});
    s.integer("n_neighbors", cfg.gspn_neighbors);
    s.integer("iterations", cfg.gspn_iterations);
  }
  if (top.has("affinity")) {
    const Section s(top.at("affinity"), "affinity", {"sigma_g", "sigma_s", "lambda"});
    s.number("sigma_g", cfg.affinity.sigma_g);
    s.number("sigma_s", cfg.affinity.sigma_s);
    s.number("lambda", cfg.affinity.lambda);
  }
  if (top.has("stats")) {
    const Section s(top.at("stats"), "stats", {"cubic_cell", "distance_bins"});
    s.number("cubic_cell", cfg.cubic_cell);
    if (s.has("distance_bins")) {
      const auto& bins = s.at("distance_bins");
      if (!bins.is_array()) throw FormatError("config key 'stats.distance_bins' must be an array");
      cfg.distance_bins.clear();
      for (const auto& b : bins) {
        if (!b.is_number()) throw FormatError("config key 'stats.distance_bins' must hold numbers");
        cfg.distance_bins.push_back(b.get<double>());
      }
    }
  }
  if (top.has("paths")) {
    const Section s(top.at("paths"), "paths", {"weights", "guide"});
    s.path("weights", cfg.weights_path, base_dir);
    s.path("guide", cfg.guide_path, base_dir);
  }
  cfg.validate();
  return cfg;
}

SceneConfig load_config(const std::filesystem::path& path) {
  return parse_config(io::read_file(path), path.parent_path());
}

}  // namespace tpvd
