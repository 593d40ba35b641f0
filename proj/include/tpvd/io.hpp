#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "tpvd/filter.hpp"
#include "tpvd/fusion.hpp"
#include "tpvd/grid.hpp"
#include "tpvd/propagation.hpp"
#include "tpvd/spherical.hpp"
#include "tpvd/tpv.hpp"

namespace tpvd::io {

// Writes `bytes` to a temporary file next to `path` and renames it into
// place, so readers never observe a partial file.
void write_file_atomic(const std::filesystem::path& path, std::string_view bytes);
std::string read_file(const std::filesystem::path& path);

/// 16-bit grayscale depth PNG: depth = raw / 256, raw 0 marks a hole.
SparseDepthMap read_depth_png(const std::filesystem::path& path);
// Valid depths map to round(d * 256) clamped to [1, 65535]; throws
// RangeError for depths at or beyond 65535.5 / 256 m and for non-positive
// or non-finite ones.
void write_depth_png(const SparseDepthMap& depth, const std::filesystem::path& path);

/// Top and side views store pixel coordinates; they are written as
/// raw = round(value * 16) + 1 so that raw 0 remains the hole marker.
MaskedGrid read_view_png(const std::filesystem::path& path);
void write_view_png(const MaskedGrid& view, const std::filesystem::path& path);

// Raw 16-bit samples, row-major. Exposed for tests and round-trip checks.
struct Gray16 {
  int rows = 0;
  int cols = 0;
  std::vector<std::uint16_t> samples;
};
Gray16 decode_gray16(std::string_view png_bytes);
std::string encode_gray16(const Gray16& image);

/// Named float32 tensors in the "TPVW1" container.
///
///   "TPVW1" | u32 count | count x (u32 name_len | name | u32 rank |
///   rank x u32 dim | prod(dims) x f32)
///
/// All integers and floats little-endian.
struct Tensor {
  std::string name;
  std::vector<std::uint32_t> dims;
  std::vector<float> data;
};

struct WeightFile {
  std::vector<Tensor> tensors;

  const Tensor* find(std::string_view name) const;
  // Throws FormatError on a duplicate name or a size mismatch.
  void add(Tensor t);
};

WeightFile parse_weights(std::string_view bytes);
std::string serialize_weights(const WeightFile& file);
WeightFile read_weights(const std::filesystem::path& path);
void write_weights(const WeightFile& file, const std::filesystem::path& path);

/// Operators recovered from a weight file. Absent tensors leave the
/// corresponding operator unset.
struct ModelWeights {
  std::optional<Filter3> filter3;
  std::array<std::optional<Filter2>, 3> h2c;  // ViewTag order
  std::optional<PointwiseMap> point_map;
  std::optional<AffinityField> affinity;      // front view
};

// Throws FormatError on unknown names, wrong shapes, or affinity tensors
// given without their partner.
ModelWeights interpret_weights(const WeightFile& file);

// Adds "affinity.weights" [H,W,n] and "affinity.offsets" [H,W,n,2] for a
// field. Values are narrowed to float32.
void add_affinity(WeightFile& file, const AffinityField& field);

/// Point cloud from text: one "x y z" or "x,y,z" triple per line; blank
/// lines and lines starting with '#' are skipped.
PointSet read_cloud_text(const std::filesystem::path& path);

// CSV number formatting independent of the global locale.
std::string format_number(double v);

}  // namespace tpvd::io
