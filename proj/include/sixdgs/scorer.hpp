#pragma once
// Ray-to-image binding: a positional-encoded MLP turns each ray into a
// C-dimensional query, single-head attention against the image features
// distributes every pixel over the rays, and the per-ray sum of attention is
// the ray's score. Training supervises those scores with a distance-derived
// target built from the known camera center.

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "sixdgs/features.hpp"
#include "sixdgs/gaussian_model.hpp"
#include "sixdgs/ray.hpp"

namespace sixdgs {

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct DenseLayer {
  RowMatrix weight;      // in x out, so a batch forward is X * weight
  Eigen::VectorXd bias;  // out
};

struct ScorerWeights {
  int pe_freqs = 6;
  int width = 512;
  int channels = 3;
  std::vector<DenseLayer> mlp;  // encoded input -> width -> width -> width -> channels
  RowMatrix query;              // C x C, applied to ray features
  RowMatrix key;                // C x C, applied to image features

  // Seeded Glorot-uniform initialization with zero biases.
  [[nodiscard]] static ScorerWeights init(int channels, int width, int pe_freqs, std::uint64_t seed);
  // Same shapes as `like`, every entry zero.
  [[nodiscard]] static ScorerWeights zeros_like(const ScorerWeights& like);

  [[nodiscard]] int input_dim() const noexcept { return 9 * (1 + 2 * pe_freqs); }

  // Every tensor in a fixed order: layer weights and biases, then query, key.
  [[nodiscard]] std::vector<std::span<double>> tensors();
  [[nodiscard]] std::vector<std::span<const double>> tensors() const;
  [[nodiscard]] std::vector<std::string> tensor_names() const;

  // Throws ErrorCode::Config on a broken layer chain or non-finite entries.
  void validate() const;
};

struct ScoreVector {
  std::vector<double> values;
  bool uniform_fallback = false;  // gt_scores found no ray near the camera

  [[nodiscard]] std::size_t size() const noexcept { return values.size(); }
  [[nodiscard]] double operator[](std::size_t i) const { return values[i]; }
};

// x followed by sin(2^k pi x_i), cos(2^k pi x_i) for k = 0..L-1, per component.
[[nodiscard]] std::vector<double> positional_encoding(std::span<const double> x, int pe_freqs);

// Encoded (origin, direction, color) of each ray, one row per ray.
[[nodiscard]] RowMatrix encode_rays(std::span<const Ray> rays, int pe_freqs);

// N x C ray features.
[[nodiscard]] RowMatrix featurize_rays(std::span<const Ray> rays, const ScorerWeights& w);

// Features (N x C) times the query projection.
[[nodiscard]] RowMatrix project_queries(const RowMatrix& features, const ScorerWeights& w);
// Image features (M x C) times the key projection.
[[nodiscard]] RowMatrix project_keys(const FeatureMap& f, const ScorerWeights& w);

// Softmax over rays, per pixel, of K Q^T / sqrt(C). The M x N matrix is never
// stored: rows are recomputed from K, Q and the per-pixel log-normalizers.
class AttentionMap {
 public:
  AttentionMap(RowMatrix keys, const RowMatrix& queries);

  [[nodiscard]] const ScoreVector& scores() const noexcept { return scores_; }
  [[nodiscard]] std::size_t pixels() const noexcept { return static_cast<std::size_t>(keys_.rows()); }
  [[nodiscard]] std::size_t rays() const noexcept { return static_cast<std::size_t>(queries_t_.cols()); }

  // A(i, j)
  [[nodiscard]] double weight(std::size_t pixel, std::size_t ray) const;
  // argmax over pixels of A(:, j); ties go to the lower pixel index.
  [[nodiscard]] std::size_t best_pixel(std::size_t ray) const;
  [[nodiscard]] std::vector<std::size_t> best_pixels(std::span<const std::size_t> rays) const;

  // Given g = dL/dscore, returns dL/dK (M x C) and dL/dQ (N x C).
  void backward(std::span<const double> grad_scores, RowMatrix& grad_keys, RowMatrix& grad_queries) const;

 private:
  void logits_row(std::size_t pixel, double* row) const;

  RowMatrix keys_;       // M x C, pre-scaled by 1/sqrt(C)
  RowMatrix queries_t_;  // C x N
  std::vector<double> log_norm_;
  ScoreVector scores_;
};

[[nodiscard]] ScoreVector attention_scores(const RowMatrix& features, const FeatureMap& f,
                                           const ScorerWeights& w);

// Distance-derived target: rays aimed close to the camera center score high.
// Scores sum to `pixels`. Throws ErrorCode::Domain for lambda <= 0.
[[nodiscard]] ScoreVector gt_scores(std::span<const Ray> rays, const Vec3& camera_center, double lambda,
                                    std::size_t pixels);

// Test double for a trained scorer: the target scores for a known pose.
[[nodiscard]] ScoreVector oracle_scorer(std::span<const Ray> rays, const Pose& gt_pose, double lambda,
                                        std::size_t pixels);

// sum_j (pred_j - gt_j)^2 / (pixels * N)
[[nodiscard]] double score_loss(const ScoreVector& pred, const ScoreVector& gt, std::size_t pixels);

// Loss of one (rays, image, target) instance and, when `grad` is non-null,
// its gradient w.r.t. every tensor (grad must have the shapes of w).
double loss_and_gradient(const ScorerWeights& w, std::span<const Ray> rays, const FeatureMap& f,
                         const ScoreVector& target, ScorerWeights* grad);

struct TrainView {
  FeatureMap features;
  Pose pose;
  CameraIntrinsics intrinsics;
};

struct TrainConfig {
  int iterations = 1500;
  int subsample = 2000;   // ellipsoids per iteration
  double weight_decay = 1e-3;
  double learning_rate = 1e-3;
  double lambda = 0.1;
  std::uint64_t seed = 0;
  int width = 512;
  int pe_freqs = 6;
  int cells = 100;        // G
  int normal_neighbors = 16;

  void validate() const;
};

struct TrainResult {
  ScorerWeights weights;
  std::vector<double> loss_curve;
};

// Called after every iteration with (iteration, loss).
using TrainObserver = std::function<void(int, double)>;

// `rays` may hold the cloud's precomputed Ellicell rays; they are generated
// from cfg when empty.
[[nodiscard]] TrainResult train_scorer(const GaussianCloud& cloud, std::span<const TrainView> views,
                                       const TrainConfig& cfg, std::span<const Ray> rays = {},
                                       const TrainObserver& observer = {});

// Decoupled-weight-decay Adam over every tensor of a ScorerWeights.
class AdamW {
 public:
  AdamW(const ScorerWeights& like, double learning_rate, double weight_decay, double beta1 = 0.9,
        double beta2 = 0.999, double epsilon = 1e-8);
  void step(ScorerWeights& w, const ScorerWeights& grad);

 private:
  double lr_, wd_, beta1_, beta2_, eps_;
  long step_ = 0;
  ScorerWeights m_, v_;
};

// Sectioned binary ("6DGSWTS1"): u32 section count, then per section u32
// name length, name bytes, u32 rows, u32 cols, rows*cols f64 row-major.
// A JSON manifest with the dimensions and `manifest_extra` is written next to
// it as <path>.json.
void save_weights(const std::filesystem::path& path, const ScorerWeights& w,
                  const std::string& manifest_extra_json = "{}");
[[nodiscard]] ScorerWeights load_weights(const std::filesystem::path& path);

// Fingerprint of every tensor's bytes.
[[nodiscard]] std::uint64_t weights_hash(const ScorerWeights& w);

}  // namespace sixdgs
