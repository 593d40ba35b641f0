#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <random>

#include "support.hpp"
#include "tpvd/config.hpp"
#include "tpvd/error.hpp"
#include "tpvd/io.hpp"
#include "tpvd/synth.hpp"

namespace tpvd {
namespace {

namespace fs = std::filesystem;

// 2x2 single-channel 8-bit PNG.
constexpr unsigned char kGray8Png[] = {
    0x89, 0x50, 0x4e, 0x47, 0x0d, 0x0a, 0x1a, 0x0a, 0x00, 0x00, 0x00, 0x0d, 0x49, 0x48, 0x44, 0x52, 0x00, 0x00,
    0x00, 0x02, 0x00, 0x00, 0x00, 0x02, 0x08, 0x00, 0x00, 0x00, 0x00, 0x57, 0xdd, 0x52, 0xf8, 0x00, 0x00, 0x00,
    0x0e, 0x49, 0x44, 0x41, 0x54, 0x78, 0x9c, 0x63, 0x64, 0x67, 0x60, 0x62, 0x60, 0x00, 0x00, 0x00, 0x35, 0x00,
    0x0b, 0xa4, 0x5a, 0x44, 0xbb, 0x00, 0x00, 0x00, 0x00, 0x49, 0x45, 0x4e, 0x44, 0xae, 0x42, 0x60, 0x82};

TEST(DepthPng, RawScale) {
  const auto dir = test::scratch_dir("depth_png_scale");
  io::Gray16 img{1, 3, {256, 0, 65535}};
  io::write_file_atomic(dir / "a.png", io::encode_gray16(img));
  const auto d = io::read_depth_png(dir / "a.png");
  EXPECT_EQ(d.value(0, 0), 1.0);
  EXPECT_FALSE(d.valid(0, 1));
  EXPECT_EQ(d.value(0, 2), 65535.0 / 256.0);
}

TEST(DepthPng, WriteRoundsAndClamps) {
  const auto dir = test::scratch_dir("depth_png_write");
  SparseDepthMap d(1, 3);
  d.set(0, 0, 0.001);      // rounds to 0, clamped to the smallest valid raw value
  d.set(0, 2, 10.0 / 3.0);
  io::write_depth_png(d, dir / "d.png");
  const auto raw = io::decode_gray16(io::read_file(dir / "d.png"));
  EXPECT_EQ(raw.samples, (std::vector<std::uint16_t>{1, 0, 853}));
}

TEST(DepthPng, RejectsUnencodableDepths) {
  const auto dir = test::scratch_dir("depth_png_range");
  SparseDepthMap d(1, 1);
  d.set(0, 0, 256.0);
  EXPECT_THROW(io::write_depth_png(d, dir / "x.png"), RangeError);
  d.set(0, 0, -1.0);
  EXPECT_THROW(io::write_depth_png(d, dir / "x.png"), RangeError);
  EXPECT_FALSE(fs::exists(dir / "x.png"));
  d.set(0, 0, 255.99);
  EXPECT_NO_THROW(io::write_depth_png(d, dir / "x.png"));
}

TEST(DepthPng, QuantizedMapsRoundTripBitExactly) {
  std::mt19937_64 rng(91);
  const auto dir = test::scratch_dir("depth_png_roundtrip");
  for (int trial = 0; trial < 10; ++trial) {
    SparseDepthMap d(17, 23);
    for (int r = 0; r < 17; ++r) {
      for (int c = 0; c < 23; ++c) {
        if (test::uniform(rng, 0, 1) < 0.3) d.set(r, c, test::uniform_int(rng, 1, 65535) / 256.0);
      }
    }
    io::write_depth_png(d, dir / "r.png");
    EXPECT_TRUE(io::read_depth_png(dir / "r.png") == d);
  }
}

TEST(DepthPng, RejectsWrongBitDepthAndGarbage) {
  const auto dir = test::scratch_dir("depth_png_bad");
  io::write_file_atomic(dir / "g8.png", std::string(reinterpret_cast<const char*>(kGray8Png), sizeof kGray8Png));
  EXPECT_THROW(io::read_depth_png(dir / "g8.png"), FormatError);
  io::write_file_atomic(dir / "junk.png", "not a png at all");
  EXPECT_THROW(io::read_depth_png(dir / "junk.png"), FormatError);
  std::string truncated = io::encode_gray16({4, 4, std::vector<std::uint16_t>(16, 9)});
  truncated.resize(truncated.size() / 2);
  io::write_file_atomic(dir / "trunc.png", truncated);
  EXPECT_THROW(io::read_depth_png(dir / "trunc.png"), FormatError);
  EXPECT_THROW(io::read_depth_png(dir / "missing.png"), IoError);
}

TEST(ViewPng, RoundTripsSixteenthPixelValues) {
  const auto dir = test::scratch_dir("view_png");
  MaskedGrid v(3, 4);
  v.set(0, 0, 0.0);
  v.set(1, 2, 31.0);
  v.set(2, 3, 12.5625);
  io::write_view_png(v, dir / "v.png");
  EXPECT_TRUE(io::read_view_png(dir / "v.png") == v);
  v.set(0, 1, -1.0);
  EXPECT_THROW(io::write_view_png(v, dir / "v.png"), RangeError);
}

TEST(Gray16, EncodeDecode) {
  io::Gray16 img{2, 3, {0, 1, 2, 65535, 300, 7}};
  const auto back = io::decode_gray16(io::encode_gray16(img));
  EXPECT_EQ(back.rows, 2);
  EXPECT_EQ(back.cols, 3);
  EXPECT_EQ(back.samples, img.samples);
}

TEST(AtomicWrite, LeavesNoTemporaries) {
  const auto dir = test::scratch_dir("atomic");
  io::write_file_atomic(dir / "f.txt", "one");
  io::write_file_atomic(dir / "f.txt", "two");
  EXPECT_EQ(io::read_file(dir / "f.txt"), "two");
  EXPECT_EQ(std::distance(fs::directory_iterator(dir), fs::directory_iterator()), 1);
  EXPECT_THROW(io::write_file_atomic(dir / "no" / "such" / "dir.txt", "x"), IoError);
}

// ---------------------------------------------------------------------------

io::WeightFile sample_weights() {
  io::WeightFile f;
  f.add({"filter3", {3, 3, 3}, std::vector<float>(27, 1.0f / 27)});
  f.add({"h2c_front", {3, 3}, {0, 0, 0, 0, 1, 0, 0, 0, 0}});
  f.add({"h2c_side", {3, 3}, {0.125f, 0, 0, 0, 0.75f, 0, 0, 0, 0.125f}});
  f.add({"point_map.weight", {3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}});
  f.add({"point_map.bias", {3}, {0, 0, 0.5f}});
  return f;
}

TEST(Weights, SerializeParseRoundTrip) {
  const auto f = sample_weights();
  const auto bytes = io::serialize_weights(f);
  EXPECT_EQ(bytes.substr(0, 5), "TPVW1");
  const auto back = io::parse_weights(bytes);
  ASSERT_EQ(back.tensors.size(), f.tensors.size());
  for (std::size_t i = 0; i < f.tensors.size(); ++i) {
    EXPECT_EQ(back.tensors[i].name, f.tensors[i].name);
    EXPECT_EQ(back.tensors[i].dims, f.tensors[i].dims);
    EXPECT_EQ(back.tensors[i].data, f.tensors[i].data);
  }
  const auto dir = test::scratch_dir("weights");
  io::write_weights(f, dir / "w.bin");
  EXPECT_EQ(io::read_file(dir / "w.bin"), bytes);
}

TEST(Weights, LittleEndianLayout) {
  io::WeightFile f;
  f.add({"a", {1}, {1.0f}});
  const auto b = io::serialize_weights(f);
  const std::string want("TPVW1\x01\x00\x00\x00\x01\x00\x00\x00"
                         "a\x01\x00\x00\x00\x01\x00\x00\x00\x00\x00\x80\x3f",
                         5 + 4 + 4 + 1 + 4 + 4 + 4);
  EXPECT_EQ(b, want);
}

TEST(Weights, MalformedFilesThrow) {
  const auto bytes = io::serialize_weights(sample_weights());
  EXPECT_THROW(io::parse_weights(bytes.substr(0, bytes.size() - 1)), FormatError);
  EXPECT_THROW(io::parse_weights(bytes + "x"), FormatError);
  EXPECT_THROW(io::parse_weights("TPVW2" + bytes.substr(5)), FormatError);
  EXPECT_THROW(io::parse_weights(""), FormatError);
  io::WeightFile f;
  f.add({"a", {2}, {1, 2}});
  EXPECT_THROW(f.add({"a", {1}, {1}}), FormatError);
  EXPECT_THROW(f.add({"b", {3}, {1}}), FormatError);
  // Rank 9 header.
  std::string deep("TPVW1\x01\x00\x00\x00\x01\x00\x00\x00z\x09\x00\x00\x00", 18);
  EXPECT_THROW(io::parse_weights(deep), FormatError);
}

TEST(Weights, InterpretRecoversOperators) {
  const auto m = io::interpret_weights(sample_weights());
  ASSERT_TRUE(m.filter3);
  EXPECT_FALSE(m.filter3->per_channel);
  EXPECT_NEAR(m.filter3->weights[5], 1.0 / 27, 1e-8);
  ASSERT_TRUE(m.h2c[0]);
  EXPECT_TRUE(m.h2c[0]->is_identity());
  EXPECT_FALSE(m.h2c[1]);
  ASSERT_TRUE(m.h2c[2]);
  EXPECT_EQ(m.h2c[2]->weights[4], 0.75);
  ASSERT_TRUE(m.point_map);
  EXPECT_EQ(m.point_map->kind, PointwiseMap::Kind::linear);
  EXPECT_EQ(m.point_map->bias[2], 0.5);
  EXPECT_FALSE(m.affinity);
}

TEST(Weights, InterpretRejectsUnknownOrMisshapen) {
  io::WeightFile f;
  f.add({"mystery", {1}, {1}});
  EXPECT_THROW(io::interpret_weights(f), FormatError);
  io::WeightFile g;
  g.add({"h2c_top", {2, 2}, {1, 0, 0, 1}});
  EXPECT_THROW(io::interpret_weights(g), FormatError);
  io::WeightFile h;
  h.add({"affinity.weights", {2, 2, 1}, {0, 0, 0, 0}});
  EXPECT_THROW(io::interpret_weights(h), FormatError);
  io::WeightFile per;
  per.add({"filter3", {2, 3, 3, 3}, std::vector<float>(54, 0.5f)});
  const auto m = io::interpret_weights(per);
  ASSERT_TRUE(m.filter3);
  EXPECT_TRUE(m.filter3->per_channel);
  EXPECT_EQ(m.filter3->kernels(), 2);
}

TEST(CloudText, ParsesBothSeparators) {
  const auto dir = test::scratch_dir("cloud_text");
  io::write_file_atomic(dir / "c.txt", "# header\n1 2 3\n\n4.5,-1,2e1\n  7\t8\t9  \n");
  const auto c = io::read_cloud_text(dir / "c.txt");
  ASSERT_EQ(c.size(), 3u);
  EXPECT_EQ(c.positions[1], (Vec3{4.5, -1, 20}));
  EXPECT_EQ(c.positions[2], (Vec3{7, 8, 9}));
  io::write_file_atomic(dir / "bad.txt", "1 2\n");
  EXPECT_THROW(io::read_cloud_text(dir / "bad.txt"), FormatError);
  io::write_file_atomic(dir / "bad2.txt", "1 2 3 4\n");
  EXPECT_THROW(io::read_cloud_text(dir / "bad2.txt"), FormatError);
}

TEST(FormatNumber, ShortestRoundTrip) {
  EXPECT_EQ(io::format_number(0.1), "0.1");
  EXPECT_EQ(io::format_number(100.0), "100");
  EXPECT_EQ(std::stod(io::format_number(1.0 / 3.0)), 1.0 / 3.0);
}

// ---------------------------------------------------------------------------

TEST(Config, EmptyObjectGivesDefaults) {
  const auto c = parse_config("{}");
  EXPECT_FALSE(c.camera);
  EXPECT_EQ(c.fusion_k, 9u);
  EXPECT_EQ(c.fusion_steps, 4);
  EXPECT_EQ(c.gspn_neighbors, 9);
  EXPECT_EQ(c.gspn_iterations, 4);
  EXPECT_EQ(c.depth_binning.bins(), 256);
  EXPECT_EQ(c.affinity.lambda, 0.9);
  const auto cam = c.camera_for(64, 48);
  EXPECT_EQ(cam.width, 64);
  EXPECT_EQ(cam.fx, 32.0);
}

TEST(Config, ParsesSectionsAndResolvesPaths) {
  const auto c = parse_config(R"({
    "camera": {"fx": 50, "fy": 50, "cx": 16, "cy": 8, "width": 32, "height": 16},
    "fusion": {"k": 5, "steps": 2},
    "gspn": {"iterations": 3},
    "stats": {"cubic_cell": 0.5, "distance_bins": [0, 20, 40]},
    "paths": {"weights": "w.bin", "guide": "/abs/g.png"}
  })",
                              "/base");
  ASSERT_TRUE(c.camera);
  EXPECT_EQ(c.camera->fx, 50.0);
  EXPECT_EQ(c.fusion().k, 5u);
  EXPECT_EQ(c.fusion().steps, 2);
  EXPECT_EQ(c.gspn().iterations, 3);
  EXPECT_EQ(c.gspn().n_neighbors, 9);
  EXPECT_EQ(c.distance_bins, (std::vector<double>{0, 20, 40}));
  EXPECT_EQ(*c.weights_path, fs::path("/base/w.bin"));
  EXPECT_EQ(*c.guide_path, fs::path("/abs/g.png"));
  EXPECT_THROW(c.camera_for(64, 48), DimensionError);
}

TEST(Config, RejectsMalformedInput) {
  EXPECT_THROW(parse_config("{"), FormatError);
  EXPECT_THROW(parse_config("[]"), FormatError);
  EXPECT_THROW(parse_config(R"({"colour": 1})"), FormatError);
  EXPECT_THROW(parse_config(R"({"fusion": {"k": "nine"}})"), FormatError);
  EXPECT_THROW(parse_config(R"({"fusion": {"kk": 3}})"), FormatError);
  EXPECT_THROW(parse_config(R"({"camera": {"fx": 1}})"), FormatError);
  EXPECT_THROW(parse_config(R"({"fusion": {"k": 0}})"), DomainError);
}

TEST(Config, LoadFromFile) {
  const auto dir = test::scratch_dir("config_file");
  io::write_file_atomic(dir / "c.json", R"({"paths": {"weights": "model.bin"}})");
  EXPECT_EQ(*load_config(dir / "c.json").weights_path, dir / "model.bin");
  EXPECT_THROW(load_config(dir / "nope.json"), IoError);
}

// ---------------------------------------------------------------------------

TEST(Synth, DeterministicForEqualArguments) {
  const auto a = synth_lidar(5000, 80.0, 42);
  const auto b = synth_lidar(5000, 80.0, 42);
  EXPECT_EQ(a.positions, b.positions);
  EXPECT_NE(synth_lidar(5000, 80.0, 43).positions, a.positions);
}

TEST(Synth, RejectsBadArguments) {
  EXPECT_THROW(synth_lidar(0, 80.0, 1), DomainError);
  EXPECT_THROW(synth_lidar(10, 0.0, 1), DomainError);
  EXPECT_THROW(sparsify(SparseDepthMap(2, 2), 0.0, 1), DomainError);
}

TEST(Synth, DensityFallsWithDistance) {
  const auto cloud = synth_lidar(100000, 80.0, 42);
  EXPECT_EQ(cloud.size(), 100000u);
  // Points per unit volume of the sensor's wedge.
  double near = 0, far = 0;
  for (const auto& p : cloud.positions) {
    const double d = std::hypot(p.x, p.y, p.z);
    if (d < 10) near += 1;
    if (d >= 50 && d < 60) far += 1;
  }
  EXPECT_GT(near / (10 * 10 * 10), far / (60.0 * 60 * 60 - 50.0 * 50 * 50));
}

TEST(Synth, DepthAndSparsify) {
  const auto cam = CameraIntrinsics::for_image(64, 64);
  const auto dense = synth_depth(cam, 80.0);
  EXPECT_EQ(dense.valid_count(), 64u * 64u);
  EXPECT_NO_THROW(validate_depth_map(dense));
  const auto sparse = sparsify(dense, 0.05, 7);
  EXPECT_GT(sparse.valid_count(), 100u);
  EXPECT_LT(sparse.valid_count(), 320u);
  EXPECT_TRUE(sparsify(dense, 0.05, 7) == sparse);
  for (int r = 0; r < 64; ++r) {
    for (int c = 0; c < 64; ++c) {
      if (sparse.valid(r, c)) {
        EXPECT_EQ(sparse.value(r, c), dense.value(r, c));
      }
    }
  }
  EXPECT_GE(sparsify(dense, 1e-9, 3).valid_count(), 1u);
}

}  // namespace
}  // namespace tpvd
