#include "sixdgs/pipeline.hpp"

#include <cmath>
#include <cstring>
#include <fstream>
#include <numbers>

#include "binary_io.hpp"
#include "sixdgs/ellicell.hpp"
#include "sixdgs/synth.hpp"

namespace sixdgs {

namespace {
constexpr char kBankMagic[8] = {'6', 'D', 'G', 'S', 'B', 'A', 'N', 'K'};
constexpr std::size_t kBankHeader = 8 + 8 + 8 + 4 + 4 + 4;
}  // namespace

std::vector<Ray> scene_rays(const GaussianCloud& cloud, int cells, int neighbors) {
  return generate_rays(cloud, cells, estimate_normals(cloud, neighbors));
}

QueryBank build_query_bank(std::vector<Ray> rays, const ScorerWeights& w, std::uint64_t model_hash, int cells) {
  QueryBank bank;
  bank.model_hash = model_hash;
  bank.weights_hash = weights_hash(w);
  bank.cells = cells;
  bank.queries = project_queries(featurize_rays(rays, w), w);
  bank.rays = std::move(rays);
  return bank;
}

void save_query_bank(const std::filesystem::path& path, const QueryBank& bank) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::Io, "cannot write query bank: " + path.string());
  out.write(kBankMagic, sizeof(kBankMagic));
  detail::put_u64(out, bank.model_hash);
  detail::put_u64(out, bank.weights_hash);
  detail::put_u32(out, static_cast<std::uint32_t>(bank.cells));
  detail::put_u32(out, static_cast<std::uint32_t>(bank.rays.size()));
  detail::put_u32(out, static_cast<std::uint32_t>(bank.queries.cols()));
  for (std::size_t j = 0; j < bank.rays.size(); ++j) {
    const Ray& r = bank.rays[j];
    for (const Vec3* v : {&r.origin, &r.direction, &r.color})
      out.write(reinterpret_cast<const char*>(v->data()), 3 * sizeof(double));
    detail::put_u32(out, r.source);
    out.write(reinterpret_cast<const char*>(bank.queries.row(static_cast<Eigen::Index>(j)).data()),
              static_cast<std::streamsize>(bank.queries.cols() * sizeof(double)));
  }
  if (!out) throw Error(ErrorCode::Io, "failed writing query bank: " + path.string());
}

QueryBank load_query_bank(const std::filesystem::path& path) {
  const std::vector<char> bytes = detail::read_file(path);
  if (bytes.size() < kBankHeader || std::memcmp(bytes.data(), kBankMagic, sizeof(kBankMagic)) != 0)
    throw Error(ErrorCode::Format, path.string() + ": not a 6DGSBANK file");
  QueryBank bank;
  const char* p = bytes.data() + 8;
  bank.model_hash = detail::get_u64(p);
  bank.weights_hash = detail::get_u64(p + 8);
  bank.cells = static_cast<int>(detail::get_u32(p + 16));
  const std::size_t count = detail::get_u32(p + 20);
  const std::size_t channels = detail::get_u32(p + 24);
  const std::size_t record = 9 * sizeof(double) + 4 + channels * sizeof(double);
  const std::size_t expected = kBankHeader + count * record;
  if (bytes.size() != expected)
    throw Error(ErrorCode::Format, path.string() + ": expected " + std::to_string(expected) + " bytes, got " +
                                       std::to_string(bytes.size()));
  bank.rays.resize(count);
  bank.queries.resize(static_cast<Eigen::Index>(count), static_cast<Eigen::Index>(channels));
  p = bytes.data() + kBankHeader;
  for (std::size_t j = 0; j < count; ++j) {
    Ray& r = bank.rays[j];
    for (Vec3* v : {&r.origin, &r.direction, &r.color}) {
      std::memcpy(v->data(), p, 3 * sizeof(double));
      p += 3 * sizeof(double);
    }
    r.source = detail::get_u32(p);
    p += 4;
    std::memcpy(bank.queries.row(static_cast<Eigen::Index>(j)).data(), p, channels * sizeof(double));
    p += channels * sizeof(double);
  }
  return bank;
}

PoseEstimate estimate_learned(const QueryBank& bank, const ScorerWeights& w, const FeatureMap& f,
                              const CameraIntrinsics& k, std::size_t n_top) {
  const AttentionMap attention(project_keys(f, w), bank.queries);
  return estimate_pose(bank.rays, attention.scores(), attention_matcher(attention, f), k, n_top);
}

PoseEstimate estimate_oracle(const GaussianCloud& cloud, std::span<const Ray> rays, const FeatureMap& grid,
                             const Pose& gt, const CameraIntrinsics& k, double lambda, std::size_t n_top) {
  const ScoreVector scores = oracle_scorer(rays, gt, lambda, grid.cells());
  return estimate_pose(rays, scores, oracle_matcher(rays, cloud, gt, k, grid), k, n_top);
}

PoseError random_pose_baseline(std::span<const Pose> truth, std::uint64_t seed, int samples) {
  if (truth.empty() || samples <= 0) return {};
  double radius = 0.0;
  for (const Pose& p : truth) radius += p.center.norm();
  radius /= static_cast<double>(truth.size());
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  PoseError mean;
  for (const Pose& gt : truth) {
    for (int s = 0; s < samples; ++s) {
      const double z = u(rng);  // uniform on the upper hemisphere
      const double phi = 2.0 * std::numbers::pi * u(rng);
      const double r = std::sqrt(1.0 - z * z);
      const Pose guess = look_at(radius * Vec3(r * std::cos(phi), r * std::sin(phi), z), Vec3::Zero());
      const PoseError e = pose_error(guess, gt);
      mean.mae += e.mae;
      mean.mte += e.mte;
    }
  }
  const double n = static_cast<double>(truth.size()) * samples;
  mean.mae /= n;
  mean.mte /= n;
  return mean;
}

}  // namespace sixdgs
