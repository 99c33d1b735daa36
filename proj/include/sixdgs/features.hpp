#pragma once
// Dense per-cell descriptor grid for one target image.
//
// 6DFEAT layout (little-endian): magic "6DFEAT1\0", u32 grid width, u32 grid
// height, u32 channels, u32 source image width, u32 source image height, then
// height*width*channels f32 in (y, x, c) order.

#include <filesystem>
#include <vector>

#include "sixdgs/gaussian_model.hpp"

namespace sixdgs {

struct FeatureMap {
  int width = 0;     // grid columns
  int height = 0;    // grid rows
  int channels = 0;
  int image_width = 0;
  int image_height = 0;
  std::vector<float> data;

  [[nodiscard]] std::size_t cells() const noexcept {
    return static_cast<std::size_t>(width) * static_cast<std::size_t>(height);
  }
  [[nodiscard]] const float* cell(std::size_t i) const noexcept { return data.data() + i * channels; }

  // Center of grid cell i in source-image pixel coordinates (pixel centers at
  // integer coordinates).
  [[nodiscard]] Vec2 cell_center(std::size_t i) const;

  // Index of the cell whose footprint contains pixel p (clamped to the grid).
  [[nodiscard]] std::size_t cell_at(const Vec2& p) const;

  // Throws ErrorCode::Format on inconsistent sizes or non-finite values.
  void validate() const;
};

[[nodiscard]] FeatureMap load_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const FeatureMap& features);

// RGB-as-features: average color over stride x stride pixel patches (C = 3).
[[nodiscard]] FeatureMap features_from_image(const Image& image, int stride);

}  // namespace sixdgs
