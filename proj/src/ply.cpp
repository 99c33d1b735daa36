#include "sixdgs/ply.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <limits>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

namespace sixdgs {
namespace {

static_assert(std::endian::native == std::endian::little, "PLY reader assumes a little-endian host");

enum class ScalarType { I8, U8, I16, U16, I32, U32, F32, F64 };

std::optional<ScalarType> parse_type(const std::string& name) {
  static const std::map<std::string, ScalarType> kTypes = {
      {"char", ScalarType::I8},    {"int8", ScalarType::I8},     {"uchar", ScalarType::U8},
      {"uint8", ScalarType::U8},   {"short", ScalarType::I16},   {"int16", ScalarType::I16},
      {"ushort", ScalarType::U16}, {"uint16", ScalarType::U16},  {"int", ScalarType::I32},
      {"int32", ScalarType::I32},  {"uint", ScalarType::U32},    {"uint32", ScalarType::U32},
      {"float", ScalarType::F32},  {"float32", ScalarType::F32}, {"double", ScalarType::F64},
      {"float64", ScalarType::F64}};
  auto it = kTypes.find(name);
  if (it == kTypes.end()) return std::nullopt;
  return it->second;
}

std::size_t type_size(ScalarType t) {
  switch (t) {
    case ScalarType::I8:
    case ScalarType::U8:
      return 1;
    case ScalarType::I16:
    case ScalarType::U16:
      return 2;
    case ScalarType::I32:
    case ScalarType::U32:
    case ScalarType::F32:
      return 4;
    case ScalarType::F64:
      return 8;
  }
  return 0;
}

template <typename T>
T load_le(const char* p) {
  T v;
  std::memcpy(&v, p, sizeof(T));
  return v;
}

double read_scalar(const char* p, ScalarType t) {
  switch (t) {
    case ScalarType::I8:
      return load_le<std::int8_t>(p);
    case ScalarType::U8:
      return load_le<std::uint8_t>(p);
    case ScalarType::I16:
      return load_le<std::int16_t>(p);
    case ScalarType::U16:
      return load_le<std::uint16_t>(p);
    case ScalarType::I32:
      return load_le<std::int32_t>(p);
    case ScalarType::U32:
      return load_le<std::uint32_t>(p);
    case ScalarType::F32:
      return load_le<float>(p);
    case ScalarType::F64:
      return load_le<double>(p);
  }
  return 0.0;
}

struct Property {
  std::string name;
  ScalarType type;
  std::size_t offset;
};

struct Element {
  std::string name;
  std::size_t count = 0;
  std::vector<Property> props;
  std::size_t stride = 0;
};

constexpr std::array<const char*, 14> kRequired = {
    "x",       "y",       "z",       "rot_0",   "rot_1",   "rot_2",   "rot_3",
    "scale_0", "scale_1", "scale_2", "opacity", "f_dc_0", "f_dc_1", "f_dc_2"};

}  // namespace

GaussianCloud load_ply(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::Io, "cannot open PLY file: " + path.string());

  std::string line;
  if (!std::getline(in, line) || line != "ply")
    throw Error(ErrorCode::Format, path.string() + ": missing 'ply' magic line");

  std::vector<Element> elements;
  bool binary_le = false;
  bool ended = false;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    std::istringstream ls(line);
    std::string keyword;
    ls >> keyword;
    if (keyword == "format") {
      std::string fmt;
      ls >> fmt;
      binary_le = fmt == "binary_little_endian";
    } else if (keyword == "element") {
      Element el;
      long long count = -1;
      ls >> el.name >> count;
      if (el.name.empty() || count < 0)
        throw Error(ErrorCode::Format, path.string() + ": malformed element line '" + line + "'");
      el.count = static_cast<std::size_t>(count);
      elements.push_back(std::move(el));
    } else if (keyword == "property") {
      if (elements.empty())
        throw Error(ErrorCode::Format, path.string() + ": property before any element");
      std::string type_name, name;
      ls >> type_name >> name;
      if (type_name == "list")
        throw Error(ErrorCode::Format, path.string() + ": list properties are not supported");
      const auto type = parse_type(type_name);
      if (!type || name.empty())
        throw Error(ErrorCode::Format, path.string() + ": malformed property line '" + line + "'");
      Element& el = elements.back();
      el.props.push_back({name, *type, el.stride});
      el.stride += type_size(*type);
    } else if (keyword == "end_header") {
      ended = true;
      break;
    }
  }
  if (!ended) throw Error(ErrorCode::Format, path.string() + ": header has no end_header");
  if (!binary_le)
    throw Error(ErrorCode::Format, path.string() + ": only binary_little_endian PLY is supported");

  std::size_t skip = 0;
  const Element* vertex = nullptr;
  for (const auto& el : elements) {
    if (el.name == "vertex") {
      vertex = &el;
      break;
    }
    skip += el.count * el.stride;
  }
  if (vertex == nullptr) throw Error(ErrorCode::Format, path.string() + ": missing element 'vertex'");

  std::map<std::string, const Property*> by_name;
  for (const auto& p : vertex->props) by_name[p.name] = &p;
  std::array<const Property*, kRequired.size()> req{};
  for (std::size_t i = 0; i < kRequired.size(); ++i) {
    auto it = by_name.find(kRequired[i]);
    if (it == by_name.end())
      throw Error(ErrorCode::Format,
                  path.string() + ": missing vertex property '" + kRequired[i] + "'");
    req[i] = it->second;
  }
  if (vertex->count == 0) throw Error(ErrorCode::EmptyModel, path.string() + ": model has no vertices");

  in.seekg(static_cast<std::streamoff>(skip), std::ios::cur);
  std::vector<char> data(vertex->count * vertex->stride);
  in.read(data.data(), static_cast<std::streamsize>(data.size()));
  if (static_cast<std::size_t>(in.gcount()) != data.size())
    throw Error(ErrorCode::Format, path.string() + ": truncated vertex data (expected " +
                                       std::to_string(data.size()) + " bytes, got " +
                                       std::to_string(in.gcount()) + ")");

  GaussianCloud cloud;
  cloud.ellipsoids.resize(vertex->count);
  for (std::size_t i = 0; i < vertex->count; ++i) {
    const char* row = data.data() + i * vertex->stride;
    double v[kRequired.size()];
    for (std::size_t k = 0; k < kRequired.size(); ++k) v[k] = read_scalar(row + req[k]->offset, req[k]->type);

    Ellipsoid& e = cloud.ellipsoids[i];
    e.center = Vec3(v[0], v[1], v[2]);
    Quat q(v[3], v[4], v[5], v[6]);
    const double norm = q.norm();
    if (!(norm > 0.0) || !std::isfinite(norm))
      throw Error(ErrorCode::Format, path.string() + ": vertex " + std::to_string(i) +
                                         " has a zero or non-finite quaternion");
    // Already unit to float precision: renormalizing would only move it by
    // less than the storage precision and break write/read idempotence.
    if (std::abs(norm - 1.0) > 4.0 * std::numeric_limits<float>::epsilon()) q.coeffs() /= norm;
    e.rotation = q;
    e.scale = Vec3(std::exp(v[7]), std::exp(v[8]), std::exp(v[9]));
    e.opacity = 1.0 / (1.0 + std::exp(-v[10]));
    for (int c = 0; c < 3; ++c) e.color[c] = std::clamp(0.5 + kShC0 * v[11 + c], 0.0, 1.0);
  }
  return cloud;
}

void write_ply(const std::filesystem::path& path, const GaussianCloud& cloud) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write PLY file: " + path.string());

  static constexpr std::array<const char*, 17> kLayout = {
      "x",       "y",       "z",       "nx",      "ny",      "nz",    "f_dc_0", "f_dc_1", "f_dc_2",
      "opacity", "scale_0", "scale_1", "scale_2", "rot_0",   "rot_1", "rot_2",  "rot_3"};
  std::ostringstream header;
  header << "ply\nformat binary_little_endian 1.0\nelement vertex " << cloud.size() << "\n";
  for (const char* name : kLayout) header << "property float " << name << "\n";
  header << "end_header\n";
  const std::string h = header.str();
  out.write(h.data(), static_cast<std::streamsize>(h.size()));

  std::vector<float> row(kLayout.size());
  for (const auto& e : cloud.ellipsoids) {
    const double opacity = std::clamp(e.opacity, 1e-7, 1.0 - 1e-7);
    const Quat& q = e.rotation;
    const double values[] = {e.center.x(),
                             e.center.y(),
                             e.center.z(),
                             0.0,
                             0.0,
                             0.0,
                             (e.color.x() - 0.5) / kShC0,
                             (e.color.y() - 0.5) / kShC0,
                             (e.color.z() - 0.5) / kShC0,
                             std::log(opacity / (1.0 - opacity)),
                             std::log(e.scale.x()),
                             std::log(e.scale.y()),
                             std::log(e.scale.z()),
                             q.w(),
                             q.x(),
                             q.y(),
                             q.z()};
    for (std::size_t k = 0; k < row.size(); ++k) row[k] = static_cast<float>(values[k]);
    out.write(reinterpret_cast<const char*>(row.data()),
              static_cast<std::streamsize>(row.size() * sizeof(float)));
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing PLY file: " + path.string());
}

}  // namespace sixdgs
