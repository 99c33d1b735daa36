#pragma once
// End-to-end pieces shared by the command line and the acceptance suite.

#include <cstdint>
#include <filesystem>
#include <random>
#include <span>
#include <vector>

#include "sixdgs/features.hpp"
#include "sixdgs/gaussian_model.hpp"
#include "sixdgs/pose_solver.hpp"
#include "sixdgs/scorer.hpp"

namespace sixdgs {

// Ellicell rays of a whole (normalized) cloud.
[[nodiscard]] std::vector<Ray> scene_rays(const GaussianCloud& cloud, int cells = 100, int neighbors = 16);

// Rays plus their projected queries (V * W_q). Both depend only on the model
// and the weights, so they are computed once after training and reused by
// every pose query.
struct QueryBank {
  std::uint64_t model_hash = 0;
  std::uint64_t weights_hash = 0;
  int cells = 0;
  std::vector<Ray> rays;
  RowMatrix queries;  // N x C
};

[[nodiscard]] QueryBank build_query_bank(std::vector<Ray> rays, const ScorerWeights& w, std::uint64_t model_hash,
                                         int cells);

// "6DGSBANK", u64 model hash, u64 weights hash, u32 G, u32 ray count,
// u32 channels, then per ray f64x3 origin, f64x3 direction, f64x3 color,
// u32 source, f64xC query.
void save_query_bank(const std::filesystem::path& path, const QueryBank& bank);
[[nodiscard]] QueryBank load_query_bank(const std::filesystem::path& path);

[[nodiscard]] PoseEstimate estimate_learned(const QueryBank& bank, const ScorerWeights& w, const FeatureMap& f,
                                            const CameraIntrinsics& k, std::size_t n_top = kDefaultTopRays);

[[nodiscard]] PoseEstimate estimate_oracle(const GaussianCloud& cloud, std::span<const Ray> rays,
                                           const FeatureMap& grid, const Pose& gt, const CameraIntrinsics& k,
                                           double lambda = 0.1, std::size_t n_top = kDefaultTopRays);

// Random-prior reference: upright cameras drawn uniformly on the upper
// hemisphere at the ground-truth centers' mean distance, looking at the
// origin. Returns the mean error over `samples` draws per view.
[[nodiscard]] PoseError random_pose_baseline(std::span<const Pose> truth, std::uint64_t seed, int samples = 64);

}  // namespace sixdgs
