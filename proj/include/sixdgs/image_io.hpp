#pragma once

#include <filesystem>

#include "sixdgs/gaussian_model.hpp"

namespace sixdgs {

// 8-bit RGB PNG; values are rounded from [0, 1] to [0, 255].
void write_png(const std::filesystem::path& path, const Image& image);

[[nodiscard]] Image read_png(const std::filesystem::path& path);

}  // namespace sixdgs
