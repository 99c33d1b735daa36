#include "sixdgs/features.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <string>

#include "binary_io.hpp"

namespace sixdgs {

namespace {
constexpr char kMagic[8] = {'6', 'D', 'F', 'E', 'A', 'T', '1', '\0'};
constexpr std::size_t kHeader = 8 + 5 * 4;
}  // namespace

Vec2 FeatureMap::cell_center(std::size_t i) const {
  const auto x = static_cast<double>(i % width);
  const auto y = static_cast<double>(i / width);
  return {(x + 0.5) * image_width / width - 0.5, (y + 0.5) * image_height / height - 0.5};
}

std::size_t FeatureMap::cell_at(const Vec2& p) const {
  const auto clamp_index = [](double v, int n) {
    return static_cast<std::size_t>(std::clamp(static_cast<int>(std::floor(v)), 0, n - 1));
  };
  const std::size_t x = clamp_index((p.x() + 0.5) * width / image_width, width);
  const std::size_t y = clamp_index((p.y() + 0.5) * height / image_height, height);
  return y * width + x;
}

void FeatureMap::validate() const {
  if (width <= 0 || height <= 0 || channels <= 0)
    throw Error(ErrorCode::Format, "feature map dimensions must be positive");
  if (image_width <= 0 || image_height <= 0)
    throw Error(ErrorCode::Format, "feature map source image size must be positive");
  if (data.size() != cells() * channels)
    throw Error(ErrorCode::Format, "feature map data size does not match its dimensions");
  for (float v : data)
    if (!std::isfinite(v)) throw Error(ErrorCode::Format, "feature map contains non-finite values");
}

FeatureMap load_features(const std::filesystem::path& path) {
  const std::vector<char> bytes = detail::read_file(path);
  if (bytes.size() < kHeader)
    throw Error(ErrorCode::Format, path.string() + ": truncated header (expected " +
                                       std::to_string(kHeader) + " bytes, got " +
                                       std::to_string(bytes.size()) + ")");
  if (std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error(ErrorCode::Format, path.string() + ": bad magic, not a 6DFEAT file");
  FeatureMap f;
  const char* p = bytes.data() + 8;
  f.width = static_cast<int>(detail::get_u32(p));
  f.height = static_cast<int>(detail::get_u32(p + 4));
  f.channels = static_cast<int>(detail::get_u32(p + 8));
  f.image_width = static_cast<int>(detail::get_u32(p + 12));
  f.image_height = static_cast<int>(detail::get_u32(p + 16));
  const std::size_t values = static_cast<std::size_t>(detail::get_u32(p)) * detail::get_u32(p + 4) *
                             detail::get_u32(p + 8);
  const std::size_t expected = kHeader + values * 4;
  if (bytes.size() != expected)
    throw Error(ErrorCode::Format, path.string() + ": expected " + std::to_string(expected) +
                                       " bytes, got " + std::to_string(bytes.size()));
  f.data.resize(values);
  std::memcpy(f.data.data(), bytes.data() + kHeader, values * 4);
  f.validate();
  return f;
}

void write_features(const std::filesystem::path& path, const FeatureMap& f) {
  f.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write feature file: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  for (int v : {f.width, f.height, f.channels, f.image_width, f.image_height})
    detail::put_u32(out, static_cast<std::uint32_t>(v));
  out.write(reinterpret_cast<const char*>(f.data.data()), static_cast<std::streamsize>(f.data.size() * 4));
  if (!out) throw Error(ErrorCode::Io, "failed writing feature file: " + path.string());
}

FeatureMap features_from_image(const Image& image, int stride) {
  if (stride <= 0 || image.width % stride != 0 || image.height % stride != 0)
    throw Error(ErrorCode::Config, "image size must be a positive multiple of the feature stride");
  FeatureMap f;
  f.width = image.width / stride;
  f.height = image.height / stride;
  f.channels = 3;
  f.image_width = image.width;
  f.image_height = image.height;
  f.data.assign(f.cells() * 3, 0.0f);
  const double norm = 1.0 / (static_cast<double>(stride) * stride);
  for (int gy = 0; gy < f.height; ++gy) {
    for (int gx = 0; gx < f.width; ++gx) {
      for (int c = 0; c < 3; ++c) {
        double sum = 0.0;
        for (int y = gy * stride; y < (gy + 1) * stride; ++y)
          for (int x = gx * stride; x < (gx + 1) * stride; ++x) sum += image.at(x, y, c);
        f.data[(static_cast<std::size_t>(gy) * f.width + gx) * 3 + c] = static_cast<float>(sum * norm);
      }
    }
  }
  return f;
}

}  // namespace sixdgs
