#include <cstring>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "binary_io.hpp"
#include "sixdgs/scorer.hpp"

namespace sixdgs {

namespace {

constexpr char kMagic[8] = {'6', 'D', 'G', 'S', 'W', 'T', 'S', '1'};

struct Section {
  std::uint32_t rows = 0, cols = 0;
  std::vector<double> data;
};

void put_section(std::ostream& out, const std::string& name, std::uint32_t rows, std::uint32_t cols,
                 const double* data) {
  detail::put_u32(out, static_cast<std::uint32_t>(name.size()));
  out.write(name.data(), static_cast<std::streamsize>(name.size()));
  detail::put_u32(out, rows);
  detail::put_u32(out, cols);
  out.write(reinterpret_cast<const char*>(data), static_cast<std::streamsize>(sizeof(double) * rows * cols));
}

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

}  // namespace

std::uint64_t weights_hash(const ScorerWeights& w) {
  std::uint64_t h = detail::fnv1a(nullptr, 0);
  for (auto t : w.tensors())
    h = detail::fnv1a(reinterpret_cast<const char*>(t.data()), t.size_bytes(), h);
  return h;
}

void save_weights(const std::filesystem::path& path, const ScorerWeights& w,
                  const std::string& manifest_extra_json) {
  w.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write weights: " + path.string());
  out.write(kMagic, sizeof(kMagic));
  detail::put_u32(out, static_cast<std::uint32_t>(3 + w.mlp.size() * 2));
  const double dims[3] = {static_cast<double>(w.pe_freqs), static_cast<double>(w.width),
                          static_cast<double>(w.channels)};
  put_section(out, "dims", 1, 3, dims);
  for (std::size_t l = 0; l < w.mlp.size(); ++l) {
    const auto& layer = w.mlp[l];
    put_section(out, "mlp." + std::to_string(l) + ".weight", static_cast<std::uint32_t>(layer.weight.rows()),
                static_cast<std::uint32_t>(layer.weight.cols()), layer.weight.data());
    put_section(out, "mlp." + std::to_string(l) + ".bias", 1, static_cast<std::uint32_t>(layer.bias.size()),
                layer.bias.data());
  }
  put_section(out, "query", static_cast<std::uint32_t>(w.query.rows()), static_cast<std::uint32_t>(w.query.cols()),
              w.query.data());
  put_section(out, "key", static_cast<std::uint32_t>(w.key.rows()), static_cast<std::uint32_t>(w.key.cols()),
              w.key.data());
  if (!out) throw Error(ErrorCode::Io, "failed writing weights: " + path.string());

  nlohmann::json manifest;
  manifest["format"] = "6dgs-weights";
  manifest["version"] = 1;
  manifest["pe_freqs"] = w.pe_freqs;
  manifest["width"] = w.width;
  manifest["channels"] = w.channels;
  auto& layers = manifest["layers"] = nlohmann::json::array();
  for (const auto& layer : w.mlp) layers.push_back({layer.weight.rows(), layer.weight.cols()});
  manifest["weights_hash"] = hex64(weights_hash(w));
  try {
    manifest["run"] = nlohmann::json::parse(manifest_extra_json);
  } catch (const nlohmann::json::exception& e) {
    throw Error(ErrorCode::Config, std::string("manifest extra is not valid JSON: ") + e.what());
  }
  std::ofstream mf(path.string() + ".json");
  if (!mf) throw Error(ErrorCode::Io, "cannot write manifest: " + path.string() + ".json");
  mf << manifest.dump(2) << '\n';
}

ScorerWeights load_weights(const std::filesystem::path& path) {
  const std::vector<char> bytes = detail::read_file(path);
  const auto fail = [&path](const std::string& why) {
    return Error(ErrorCode::Format, path.string() + ": " + why);
  };
  if (bytes.size() < 12 || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0)
    throw fail("not a 6DGSWTS1 weights file");
  std::size_t pos = 8;
  const auto need = [&](std::size_t n) {
    if (bytes.size() - pos < n)
      throw fail("truncated (need " + std::to_string(pos + n) + " bytes, file has " +
                 std::to_string(bytes.size()) + ")");
  };
  const std::uint32_t count = detail::get_u32(bytes.data() + pos);
  pos += 4;
  std::map<std::string, Section> sections;
  for (std::uint32_t s = 0; s < count; ++s) {
    need(4);
    const std::uint32_t len = detail::get_u32(bytes.data() + pos);
    pos += 4;
    need(len + 8);
    std::string name(bytes.data() + pos, len);
    pos += len;
    Section sec;
    sec.rows = detail::get_u32(bytes.data() + pos);
    sec.cols = detail::get_u32(bytes.data() + pos + 4);
    pos += 8;
    const std::size_t values = static_cast<std::size_t>(sec.rows) * sec.cols;
    need(values * sizeof(double));
    sec.data.resize(values);
    std::memcpy(sec.data.data(), bytes.data() + pos, values * sizeof(double));
    pos += values * sizeof(double);
    sections[name] = std::move(sec);
  }
  if (pos != bytes.size()) throw fail("trailing bytes after last section");

  const auto get = [&](const std::string& name) -> const Section& {
    const auto it = sections.find(name);
    if (it == sections.end()) throw fail("missing section '" + name + "'");
    return it->second;
  };
  const auto matrix = [](const Section& s) {
    return RowMatrix(Eigen::Map<const RowMatrix>(s.data.data(), s.rows, s.cols));
  };
  const Section& dims = get("dims");
  if (dims.data.size() != 3) throw fail("dims section must hold 3 values");
  ScorerWeights w;
  w.pe_freqs = static_cast<int>(dims.data[0]);
  w.width = static_cast<int>(dims.data[1]);
  w.channels = static_cast<int>(dims.data[2]);
  for (int l = 0; l < 4; ++l) {
    DenseLayer layer;
    layer.weight = matrix(get("mlp." + std::to_string(l) + ".weight"));
    const Section& b = get("mlp." + std::to_string(l) + ".bias");
    layer.bias = Eigen::Map<const Eigen::VectorXd>(b.data.data(), static_cast<Eigen::Index>(b.data.size()));
    w.mlp.push_back(std::move(layer));
  }
  w.query = matrix(get("query"));
  w.key = matrix(get("key"));
  try {
    w.validate();
  } catch (const Error& e) {
    throw fail(e.what());
  }
  return w;
}

}  // namespace sixdgs
