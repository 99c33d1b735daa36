#pragma once
// Flat ray table: magic "6DGSRAYS", u32 count, then per ray f32x3 origin,
// f32x3 direction, f32x3 color, u32 source id. Little-endian.

#include <filesystem>
#include <span>
#include <vector>

#include "sixdgs/ray.hpp"

namespace sixdgs {

void write_rays(const std::filesystem::path& path, std::span<const Ray> rays);
[[nodiscard]] std::vector<Ray> read_rays(const std::filesystem::path& path);

// ox,oy,oz,dx,dy,dz,r,g,b,source with a header row.
void write_rays_csv(const std::filesystem::path& path, std::span<const Ray> rays);

}  // namespace sixdgs
