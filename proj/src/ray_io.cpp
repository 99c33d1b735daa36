#include "sixdgs/ray_io.hpp"

#include <array>
#include <cstring>
#include <fstream>
#include <iomanip>

#include "binary_io.hpp"

namespace sixdgs {

namespace {
constexpr char kMagic[8] = {'6', 'D', 'G', 'S', 'R', 'A', 'Y', 'S'};
constexpr std::size_t kRecord = 10 * 4;
}  // namespace

void write_rays(const std::filesystem::path& path, std::span<const Ray> rays) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write ray file: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  detail::put_u32(out, static_cast<std::uint32_t>(rays.size()));
  for (const Ray& r : rays) {
    for (const Vec3* v : {&r.origin, &r.direction, &r.color})
      for (int c = 0; c < 3; ++c) detail::put_f32(out, static_cast<float>((*v)[c]));
    detail::put_u32(out, r.source);
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing ray file: " + path.string());
}

std::vector<Ray> read_rays(const std::filesystem::path& path) {
  const std::vector<char> bytes = detail::read_file(path);
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw Error(ErrorCode::Format, path.string() + ": not a 6DGSRAYS file");
  const std::uint32_t count = detail::get_u32(bytes.data() + 8);
  const std::size_t expected = 12 + static_cast<std::size_t>(count) * kRecord;
  if (bytes.size() != expected)
    throw Error(ErrorCode::Format, path.string() + ": expected " + std::to_string(expected) +
                                       " bytes, got " + std::to_string(bytes.size()));
  std::vector<Ray> rays(count);
  const char* p = bytes.data() + 12;
  for (auto& r : rays) {
    for (Vec3* v : {&r.origin, &r.direction, &r.color})
      for (int c = 0; c < 3; ++c, p += 4) (*v)[c] = detail::get_f32(p);
    r.source = detail::get_u32(p);
    p += 4;
  }
  return rays;
}

void write_rays_csv(const std::filesystem::path& path, std::span<const Ray> rays) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write CSV: " + path.string());
  out << "ox,oy,oz,dx,dy,dz,r,g,b,source\n" << std::setprecision(9);
  for (const Ray& r : rays) {
    for (const Vec3* v : {&r.origin, &r.direction, &r.color})
      for (int c = 0; c < 3; ++c) out << (*v)[c] << ',';
    out << r.source << '\n';
  }
}

}  // namespace sixdgs
