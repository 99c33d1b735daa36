#pragma once
// Binary little-endian PLY in the layout written by 3D Gaussian Splatting
// trainers: per-vertex x,y,z, f_dc_0..2, opacity, scale_0..2, rot_0..3 (extra
// properties such as normals or f_rest_* are skipped on load).

#include <filesystem>

#include "sixdgs/gaussian_model.hpp"

namespace sixdgs {

// Scales are stored as logs, opacity as a logit, color as the degree-0 SH
// coefficient, rotation as an unnormalized (w, x, y, z) quaternion.
[[nodiscard]] GaussianCloud load_ply(const std::filesystem::path& path);

void write_ply(const std::filesystem::path& path, const GaussianCloud& cloud);

}  // namespace sixdgs
