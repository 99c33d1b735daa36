#include <doctest.h>

#include <filesystem>
#include <cstring>
#include <fstream>
#include <limits>

#include "sixdgs/features.hpp"
#include "sixdgs/image_io.hpp"
#include "sixdgs/synth.hpp"

using namespace sixdgs;

namespace {

std::filesystem::path temp_dir() {
  auto dir = std::filesystem::temp_directory_path() / "sixdgs_test_features";
  std::filesystem::create_directories(dir);
  return dir;
}

FeatureMap sample_map() {
  FeatureMap f{4, 2, 5, 56, 28, {}};
  for (std::size_t i = 0; i < f.cells() * 5; ++i) f.data.push_back(static_cast<float>(i) * 0.25f - 3.0f);
  return f;
}

}  // namespace

TEST_CASE("6DFEAT round trip is bitwise") {
  const auto f = sample_map();
  const auto path = temp_dir() / "a.6dfeat";
  write_features(path, f);
  CHECK(std::filesystem::file_size(path) == 28 + f.data.size() * 4);
  const auto g = load_features(path);
  CHECK(g.width == 4);
  CHECK(g.height == 2);
  CHECK(g.channels == 5);
  CHECK(g.image_width == 56);
  CHECK(g.image_height == 28);
  CHECK(g.data == f.data);
}

TEST_CASE("6DFEAT byte layout") {
  FeatureMap f{1, 1, 1, 2, 3, {1.5f}};
  const auto path = temp_dir() / "layout.6dfeat";
  write_features(path, f);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), {});
  REQUIRE(bytes.size() == 32);
  CHECK(bytes.substr(0, 8) == std::string("6DFEAT1\0", 8));
  CHECK(bytes[8] == 1);
  CHECK(bytes[20] == 2);
  CHECK(bytes[24] == 3);
  float v;
  std::memcpy(&v, bytes.data() + 28, 4);
  CHECK(v == 1.5f);
}

TEST_CASE("6DFEAT errors") {
  const auto f = sample_map();
  const auto path = temp_dir() / "t.6dfeat";
  write_features(path, f);
  const auto full = std::filesystem::file_size(path);
  std::filesystem::resize_file(path, full - 6);
  try {
    (void)load_features(path);
    FAIL("truncated file accepted");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::Format);
    const std::string msg = e.what();
    CHECK(msg.find("expected " + std::to_string(full) + " bytes") != std::string::npos);
    CHECK(msg.find("got " + std::to_string(full - 6)) != std::string::npos);
  }
  {
    std::ofstream out(path, std::ios::binary);
    out << "6DFEAT2" << '\0' << std::string(20, '\0');
  }
  CHECK_THROWS_AS(load_features(path), Error);
  std::filesystem::resize_file(path, 10);
  CHECK_THROWS_AS(load_features(path), Error);
  CHECK_THROWS_AS(load_features(temp_dir() / "missing.6dfeat"), Error);

  FeatureMap bad = sample_map();
  bad.data.pop_back();
  CHECK_THROWS_AS(write_features(path, bad), Error);
  bad = sample_map();
  bad.data[3] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("cell geometry") {
  FeatureMap f{32, 32, 3, 448, 448, std::vector<float>(32 * 32 * 3, 0.0f)};
  CHECK(f.cell_center(0).isApprox(Vec2(6.5, 6.5)));
  CHECK(f.cell_center(33).isApprox(Vec2(20.5, 20.5)));
  CHECK(f.cell_center(f.cells() - 1).isApprox(Vec2(440.5, 440.5)));
  for (std::size_t i = 0; i < f.cells(); ++i) CHECK(f.cell_at(f.cell_center(i)) == i);
  CHECK(f.cell_at(Vec2(-50, -50)) == 0u);
  CHECK(f.cell_at(Vec2(1e4, 1e4)) == f.cells() - 1);
  CHECK(f.cell_at(Vec2(13.4, 0)) == 0u);
  CHECK(f.cell_at(Vec2(13.6, 0)) == 1u);
}

TEST_CASE("RGB-as-features from the synth path match the source pixels") {
  SynthConfig cfg;
  cfg.ellipsoids = 50;
  cfg.views = 2;
  cfg.image_size = 56;
  cfg.feature_stride = 14;
  const auto dir = temp_dir() / "synth";
  std::filesystem::remove_all(dir);
  const auto scene = write_synth(dir, cfg);
  for (const auto& frame : scene.cameras.frames) {
    const auto f = load_features(scene.cameras.resolve(frame.features));
    const auto img = read_png(scene.cameras.resolve(frame.image));
    REQUIRE(f.width == 4);
    REQUIRE(f.height == 4);
    REQUIRE(f.channels == 3);
    CHECK(f.image_width == 56);
    for (int gy = 0; gy < 4; ++gy)
      for (int gx = 0; gx < 4; ++gx)
        for (int c = 0; c < 3; ++c) {
          double sum = 0.0;
          for (int y = gy * 14; y < gy * 14 + 14; ++y)
            for (int x = gx * 14; x < gx * 14 + 14; ++x) sum += img.at(x, y, c);
          // The PNG is 8-bit; the features are averaged before quantization.
          CHECK(std::abs(f.data[static_cast<std::size_t>((gy * 4 + gx) * 3 + c)] - sum / 196.0) <= 0.5 / 255.0 + 1e-6);
        }
  }
  Image odd(15, 14);
  CHECK_THROWS_AS(features_from_image(odd, 14), Error);
}
