#include "tpvd/io.hpp"

#include <png.h>

#include <algorithm>
#include <bit>
#include <charconv>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <set>
#include <sstream>
#include <system_error>
#include <unistd.h>

#include "tpvd/error.hpp"

namespace tpvd::io {
namespace fs = std::filesystem;

void write_file_atomic(const fs::path& path, std::string_view bytes) {
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid());
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot open " + tmp.string() + " for writing");
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
    out.flush();
    if (!out) {
      out.close();
      std::error_code ec;
      fs::remove(tmp, ec);
      throw IoError("failed writing " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    throw IoError("cannot move output into place at " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("failed reading " + path.string());
  return bytes;
}

// ---------------------------------------------------------------------------
// PNG

namespace {

struct ReadCursor {
  std::string_view bytes;
  std::size_t pos = 0;
};

[[noreturn]] void png_fail(png_structp png, png_const_charp msg) {
  auto* err = static_cast<std::string*>(png_get_error_ptr(png));
  if (err) *err = msg;
  png_longjmp(png, 1);
}

void png_quiet(png_structp, png_const_charp) {}

void read_from_memory(png_structp png, png_bytep out, png_size_t n) {
  auto* cur = static_cast<ReadCursor*>(png_get_io_ptr(png));
  if (cur->bytes.size() - cur->pos < n) png_error(png, "truncated PNG stream");
  std::memcpy(out, cur->bytes.data() + cur->pos, n);
  cur->pos += n;
}

void write_to_memory(png_structp png, png_bytep data, png_size_t n) {
  auto* out = static_cast<std::string*>(png_get_io_ptr(png));
  out->append(reinterpret_cast<const char*>(data), n);
}

void flush_memory(png_structp) {}

}  // namespace

Gray16 decode_gray16(std::string_view bytes) {
  if (bytes.size() < 8 || png_sig_cmp(reinterpret_cast<png_const_bytep>(bytes.data()), 0, 8) != 0) {
    throw FormatError("not a PNG file");
  }
  std::string err;
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_quiet);
  if (!png) throw FormatError("cannot initialise the PNG decoder");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_read_struct(&png, nullptr, nullptr);
    throw FormatError("cannot initialise the PNG decoder");
  }

  ReadCursor cursor{bytes, 0};
  Gray16 img;
  std::vector<png_bytep> rows;
  std::vector<png_byte> raw;
  // No objects with non-trivial destructors may be created between setjmp
  // and a longjmp back to it.
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("corrupt PNG: " + err);
  }
  png_set_read_fn(png, &cursor, read_from_memory);
  png_read_info(png, info);
  const auto width = png_get_image_width(png, info);
  const auto height = png_get_image_height(png, info);
  const int bit_depth = png_get_bit_depth(png, info);
  const int color = png_get_color_type(png, info);
  if (bit_depth != 16 || color != PNG_COLOR_TYPE_GRAY) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("depth PNG must be single-channel 16-bit (got bit depth " + std::to_string(bit_depth) +
                      ", colour type " + std::to_string(color) + ")");
  }
  if (width > 1u << 16 || height > 1u << 16) {
    png_destroy_read_struct(&png, &info, nullptr);
    throw FormatError("PNG dimensions are too large");
  }
  img.rows = static_cast<int>(height);
  img.cols = static_cast<int>(width);
  raw.resize(static_cast<std::size_t>(width) * height * 2);
  rows.resize(height);
  for (png_uint_32 r = 0; r < height; ++r) rows[r] = raw.data() + static_cast<std::size_t>(r) * width * 2;
  png_read_image(png, rows.data());
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);

  img.samples.resize(static_cast<std::size_t>(width) * height);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    img.samples[i] = static_cast<std::uint16_t>((raw[2 * i] << 8) | raw[2 * i + 1]);  // PNG is big-endian
  }
  return img;
}

std::string encode_gray16(const Gray16& img) {
  if (img.rows < 1 || img.cols < 1 || img.samples.size() != static_cast<std::size_t>(img.rows) * img.cols) {
    throw DimensionError("PNG image must be non-empty and match its sample count");
  }
  std::vector<png_byte> raw(img.samples.size() * 2);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    raw[2 * i] = static_cast<png_byte>(img.samples[i] >> 8);
    raw[2 * i + 1] = static_cast<png_byte>(img.samples[i] & 0xff);
  }
  std::vector<png_bytep> rows(static_cast<std::size_t>(img.rows));
  for (int r = 0; r < img.rows; ++r) rows[static_cast<std::size_t>(r)] = raw.data() + static_cast<std::size_t>(r) * img.cols * 2;

  std::string out;
  std::string err;
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, &err, png_fail, png_quiet);
  if (!png) throw IoError("cannot initialise the PNG encoder");
  png_infop info = png_create_info_struct(png);
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw IoError("cannot initialise the PNG encoder");
  }
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw IoError("PNG encoding failed: " + err);
  }
  png_set_write_fn(png, &out, write_to_memory, flush_memory);
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.cols), static_cast<png_uint_32>(img.rows), 16,
               PNG_COLOR_TYPE_GRAY, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  png_write_image(png, rows.data());
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return out;
}

SparseDepthMap read_depth_png(const fs::path& path) {
  const Gray16 img = decode_gray16(read_file(path));
  SparseDepthMap depth(img.rows, img.cols);
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      const auto raw = img.samples[depth.index(r, c)];
      if (raw != 0) depth.set(r, c, raw / 256.0);
    }
  }
  return depth;
}

void write_depth_png(const SparseDepthMap& depth, const fs::path& path) {
  Gray16 img{depth.rows(), depth.cols(), std::vector<std::uint16_t>(depth.size(), 0)};
  for (int r = 0; r < depth.rows(); ++r) {
    for (int c = 0; c < depth.cols(); ++c) {
      if (!depth.valid(r, c)) continue;
      const double d = depth.value(r, c);
      const double raw = std::round(d * 256.0);
      if (!(d > 0.0) || !std::isfinite(d) || raw > 65535.0) {
        throw RangeError("depth " + format_number(d) + " m at (" + std::to_string(r) + ", " + std::to_string(c) +
                         ") cannot be stored in a 16-bit depth PNG");
      }
      img.samples[depth.index(r, c)] = static_cast<std::uint16_t>(std::max(raw, 1.0));
    }
  }
  write_file_atomic(path, encode_gray16(img));
}

MaskedGrid read_view_png(const fs::path& path) {
  const Gray16 img = decode_gray16(read_file(path));
  MaskedGrid view(img.rows, img.cols);
  for (int r = 0; r < img.rows; ++r) {
    for (int c = 0; c < img.cols; ++c) {
      const auto raw = img.samples[view.index(r, c)];
      if (raw != 0) view.set(r, c, (raw - 1) / 16.0);
    }
  }
  return view;
}

void write_view_png(const MaskedGrid& view, const fs::path& path) {
  Gray16 img{view.rows(), view.cols(), std::vector<std::uint16_t>(view.size(), 0)};
  for (int r = 0; r < view.rows(); ++r) {
    for (int c = 0; c < view.cols(); ++c) {
      if (!view.valid(r, c)) continue;
      const double raw = std::round(view.value(r, c) * 16.0) + 1.0;
      if (!(raw >= 1.0 && raw <= 65535.0)) {
        throw RangeError("view value " + format_number(view.value(r, c)) + " cannot be stored in a 16-bit PNG");
      }
      img.samples[view.index(r, c)] = static_cast<std::uint16_t>(raw);
    }
  }
  write_file_atomic(path, encode_gray16(img));
}

// ---------------------------------------------------------------------------
// Weight container

namespace {

constexpr std::string_view kMagic = "TPVW1";

std::uint32_t load_u32(std::string_view bytes, std::size_t& pos) {
  if (bytes.size() - pos < 4) throw FormatError("weight file is truncated");
  std::uint32_t v = 0;
  for (int i = 3; i >= 0; --i) v = (v << 8) | static_cast<unsigned char>(bytes[pos + static_cast<std::size_t>(i)]);
  pos += 4;
  return v;
}

void store_u32(std::string& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::size_t element_count(const std::vector<std::uint32_t>& dims) {
  std::size_t n = 1;
  for (auto d : dims) {
    if (d != 0 && n > (std::size_t{1} << 40) / d) throw FormatError("tensor is too large");
    n *= d;
  }
  return n;
}

}  // namespace

const Tensor* WeightFile::find(std::string_view name) const {
  for (const auto& t : tensors) {
    if (t.name == name) return &t;
  }
  return nullptr;
}

void WeightFile::add(Tensor t) {
  if (find(t.name)) throw FormatError("duplicate tensor name '" + t.name + "'");
  if (element_count(t.dims) != t.data.size()) {
    throw FormatError("tensor '" + t.name + "' declares " + std::to_string(element_count(t.dims)) +
                      " values but holds " + std::to_string(t.data.size()));
  }
  tensors.push_back(std::move(t));
}

WeightFile parse_weights(std::string_view bytes) {
  if (bytes.substr(0, kMagic.size()) != kMagic) throw FormatError("missing TPVW1 header");
  std::size_t pos = kMagic.size();
  const auto count = load_u32(bytes, pos);
  WeightFile file;
  for (std::uint32_t e = 0; e < count; ++e) {
    Tensor t;
    const auto name_len = load_u32(bytes, pos);
    if (bytes.size() - pos < name_len) throw FormatError("weight file is truncated");
    t.name.assign(bytes.substr(pos, name_len));
    pos += name_len;
    const auto rank = load_u32(bytes, pos);
    if (rank > 8) throw FormatError("tensor '" + t.name + "' has rank " + std::to_string(rank));
    for (std::uint32_t d = 0; d < rank; ++d) t.dims.push_back(load_u32(bytes, pos));
    const auto n = element_count(t.dims);
    if ((bytes.size() - pos) / 4 < n) throw FormatError("tensor '" + t.name + "' payload is truncated");
    t.data.resize(n);
    for (std::size_t i = 0; i < n; ++i) t.data[i] = std::bit_cast<float>(load_u32(bytes, pos));
    file.add(std::move(t));
  }
  if (pos != bytes.size()) throw FormatError("trailing bytes after the last tensor");
  return file;
}

std::string serialize_weights(const WeightFile& file) {
  std::string out(kMagic);
  store_u32(out, static_cast<std::uint32_t>(file.tensors.size()));
  std::set<std::string_view> names;
  for (const auto& t : file.tensors) {
    if (!names.insert(t.name).second) throw FormatError("duplicate tensor name '" + t.name + "'");
    if (element_count(t.dims) != t.data.size()) throw FormatError("tensor '" + t.name + "' size mismatch");
    store_u32(out, static_cast<std::uint32_t>(t.name.size()));
    out += t.name;
    store_u32(out, static_cast<std::uint32_t>(t.dims.size()));
    for (auto d : t.dims) store_u32(out, d);
    for (float v : t.data) store_u32(out, std::bit_cast<std::uint32_t>(v));
  }
  return out;
}

WeightFile read_weights(const fs::path& path) { return parse_weights(read_file(path)); }

void write_weights(const WeightFile& file, const fs::path& path) {
  write_file_atomic(path, serialize_weights(file));
}

namespace {

std::string shape_string(const std::vector<std::uint32_t>& dims) {
  std::string s = "[";
  for (std::size_t i = 0; i < dims.size(); ++i) s += (i ? "," : "") + std::to_string(dims[i]);
  return s + "]";
}

void expect_dims(const Tensor& t, std::initializer_list<std::uint32_t> dims) {
  if (!std::equal(t.dims.begin(), t.dims.end(), dims.begin(), dims.end())) {
    throw FormatError("tensor '" + t.name + "' has shape " + shape_string(t.dims) + ", expected " +
                      shape_string(std::vector<std::uint32_t>(dims)));
  }
}

std::vector<double> widen(const std::vector<float>& v) { return {v.begin(), v.end()}; }

}  // namespace

ModelWeights interpret_weights(const WeightFile& file) {
  static const std::array<std::string_view, 3> kHeads = {"h2c_front", "h2c_top", "h2c_side"};
  ModelWeights out;
  const Tensor* aff_w = nullptr;
  const Tensor* aff_o = nullptr;
  const Tensor* pm_w = nullptr;
  const Tensor* pm_b = nullptr;
  for (const auto& t : file.tensors) {
    if (t.name == "filter3") {
      Filter3 f;
      if (t.dims.size() == 3) {
        expect_dims(t, {3, 3, 3});
      } else if (t.dims.size() != 4 || t.dims[0] < 1 || t.dims[1] != 3 || t.dims[2] != 3 || t.dims[3] != 3) {
        throw FormatError("tensor 'filter3' has shape " + shape_string(t.dims) + ", expected [3,3,3] or [C,3,3,3]");
      } else {
        f.per_channel = true;
      }
      f.weights = widen(t.data);
      out.filter3 = f;
    } else if (auto it = std::find(kHeads.begin(), kHeads.end(), t.name); it != kHeads.end()) {
      expect_dims(t, {3, 3});
      Filter2 f;
      std::copy(t.data.begin(), t.data.end(), f.weights.begin());
      f.validate();
      out.h2c[static_cast<std::size_t>(it - kHeads.begin())] = f;
    } else if (t.name == "point_map.weight") {
      if (t.dims.size() != 2 || t.dims[0] < 1 || t.dims[1] < 1) throw FormatError("'point_map.weight' must be [out,in]");
      pm_w = &t;
    } else if (t.name == "point_map.bias") {
      if (t.dims.size() != 1) throw FormatError("'point_map.bias' must be [out]");
      pm_b = &t;
    } else if (t.name == "affinity.weights") {
      if (t.dims.size() != 3) throw FormatError("'affinity.weights' must be [H,W,n]");
      aff_w = &t;
    } else if (t.name == "affinity.offsets") {
      if (t.dims.size() != 4 || t.dims[3] != 2) throw FormatError("'affinity.offsets' must be [H,W,n,2]");
      aff_o = &t;
    } else {
      throw FormatError("unknown tensor '" + t.name + "' in weight file");
    }
  }

  if (pm_b && !pm_w) throw FormatError("'point_map.bias' given without 'point_map.weight'");
  if (pm_w) {
    const auto out_ch = static_cast<int>(pm_w->dims[0]);
    const auto in_ch = static_cast<int>(pm_w->dims[1]);
    if (pm_b) expect_dims(*pm_b, {pm_w->dims[0]});
    out.point_map = PointwiseMap::linear(widen(pm_w->data), pm_b ? widen(pm_b->data) : std::vector<double>{}, out_ch,
                                         in_ch);
  }

  if (static_cast<bool>(aff_w) != static_cast<bool>(aff_o)) {
    throw FormatError("'affinity.weights' and 'affinity.offsets' must be given together");
  }
  if (aff_w) {
    expect_dims(*aff_o, {aff_w->dims[0], aff_w->dims[1], aff_w->dims[2], 2});
    const int h = static_cast<int>(aff_w->dims[0]);
    const int w = static_cast<int>(aff_w->dims[1]);
    const int n = static_cast<int>(aff_w->dims[2]);
    OffsetTable table{h, w, n, widen(aff_o->data)};
    AffinityField field = nlspn_neighbors(h, w, table);
    for (int r = 0; r < h; ++r) {
      for (int c = 0; c < w; ++c) {
        for (int s = 0; s < n; ++s) {
          const auto i = field.at(s, r, c);
          if (field.active[i]) field.weight[i] = aff_w->data[(static_cast<std::size_t>(r) * w + c) * n + s];
        }
      }
    }
    out.affinity = std::move(field);
  }
  return out;
}

void add_affinity(WeightFile& file, const AffinityField& field) {
  field.validate();
  const auto h = static_cast<std::uint32_t>(field.height);
  const auto w = static_cast<std::uint32_t>(field.width);
  const auto n = static_cast<std::uint32_t>(field.slots);
  Tensor weights{"affinity.weights", {h, w, n}, {}};
  Tensor offsets{"affinity.offsets", {h, w, n, 2}, {}};
  for (int r = 0; r < field.height; ++r) {
    for (int c = 0; c < field.width; ++c) {
      for (int s = 0; s < field.slots; ++s) {
        const auto i = field.at(s, r, c);
        weights.data.push_back(static_cast<float>(field.weight[i]));
        offsets.data.push_back(static_cast<float>(field.du[i]));
        offsets.data.push_back(static_cast<float>(field.dv[i]));
      }
    }
  }
  file.add(std::move(weights));
  file.add(std::move(offsets));
}

// ---------------------------------------------------------------------------
// Text

PointSet read_cloud_text(const fs::path& path) {
  const std::string text = read_file(path);
  PointSet cloud;
  std::size_t line_no = 0;
  std::size_t start = 0;
  while (start <= text.size()) {
    auto end = text.find('\n', start);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(start, end - start);
    start = end + 1;
    ++line_no;
    std::replace(line.begin(), line.end(), ',', ' ');
    std::replace(line.begin(), line.end(), '\t', ' ');
    std::replace(line.begin(), line.end(), '\r', ' ');
    const auto first = line.find_first_not_of(' ');
    if (first == std::string::npos || line[first] == '#') continue;

    double xyz[3];
    const char* p = line.data() + first;
    const char* last = line.data() + line.size();
    for (double& v : xyz) {
      while (p < last && *p == ' ') ++p;
      auto [next, ec] = std::from_chars(p, last, v);
      if (ec != std::errc{}) {
        throw FormatError(path.string() + ":" + std::to_string(line_no) + ": expected three numbers");
      }
      p = next;
    }
    while (p < last && *p == ' ') ++p;
    if (p != last) throw FormatError(path.string() + ":" + std::to_string(line_no) + ": trailing text");
    cloud.positions.push_back({xyz[0], xyz[1], xyz[2]});
  }
  cloud.validate();
  return cloud;
}

std::string format_number(double v) {
  char buf[64];
  auto [end, ec] = std::to_chars(buf, buf + sizeof buf, v);
  if (ec != std::errc{}) return "nan";
  return std::string(buf, end);
}

}  // namespace tpvd::io
