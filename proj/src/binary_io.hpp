#pragma once
// Little-endian helpers shared by the binary file formats.

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <ostream>
#include <string>
#include <vector>

#include "sixdgs/common.hpp"

namespace sixdgs::detail {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

inline void put_u32(std::ostream& out, std::uint32_t v) { out.write(reinterpret_cast<const char*>(&v), 4); }
inline void put_f32(std::ostream& out, float v) { out.write(reinterpret_cast<const char*>(&v), 4); }
inline void put_f64(std::ostream& out, double v) { out.write(reinterpret_cast<const char*>(&v), 8); }
inline void put_u64(std::ostream& out, std::uint64_t v) { out.write(reinterpret_cast<const char*>(&v), 8); }

inline std::uint32_t get_u32(const char* p) {
  std::uint32_t v;
  std::memcpy(&v, p, 4);
  return v;
}
inline float get_f32(const char* p) {
  float v;
  std::memcpy(&v, p, 4);
  return v;
}
inline double get_f64(const char* p) {
  double v;
  std::memcpy(&v, p, 8);
  return v;
}
inline std::uint64_t get_u64(const char* p) {
  std::uint64_t v;
  std::memcpy(&v, p, 8);
  return v;
}

inline std::vector<char> read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// FNV-1a, used for input fingerprints in manifests and reports.
inline std::uint64_t fnv1a(const char* data, std::size_t n, std::uint64_t h = 1469598103934665603ull) {
  for (std::size_t i = 0; i < n; ++i) {
    h ^= static_cast<unsigned char>(data[i]);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace sixdgs::detail
