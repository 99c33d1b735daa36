#pragma once
// Closed-form camera pose from scored rays: keep the best ray of each of the
// top-scoring ellipsoids, intersect the bundle by weighted least squares to
// get the optical center, then align world bearings with the bearings of the
// matched pixels to get the rotation.

#include <cstddef>
#include <functional>
#include <span>
#include <vector>

#include "sixdgs/gaussian_model.hpp"
#include "sixdgs/ray.hpp"
#include "sixdgs/scorer.hpp"

namespace sixdgs {

struct SelectedBundle {
  std::vector<std::size_t> indices;  // positions in the input ray list
  std::vector<Ray> rays;
  std::vector<double> weights;
  std::vector<Vec2> matched_pixels;  // image coordinates; empty until assigned
};

struct CenterEstimate {
  Vec3 center = Vec3::Zero();
  double residual = 0.0;  // sqrt of the weighted mean squared perpendicular distance
  double condition = 0.0; // of the normal matrix
};

struct PoseEstimate {
  Pose pose;
  double residual = 0.0;
  std::size_t inliers = 0;  // rays passing within kInlierDistance of the center
  bool flagged = false;     // residual above kResidualThreshold
};

struct PoseError {
  double mae = 0.0;  // degrees
  double mte = 0.0;  // scene units
};

inline constexpr std::size_t kDefaultTopRays = 100;
inline constexpr double kInlierDistance = 0.1;
inline constexpr double kResidualThreshold = 0.15;

// Highest scores first (ties to the lower index), at most one ray per source
// ellipsoid, rays with non-positive score skipped. Throws
// ErrorCode::InsufficientBundle when fewer than two sources remain and
// ErrorCode::Config when n_top < 2.
[[nodiscard]] SelectedBundle select_top_rays(std::span<const Ray> rays, const ScoreVector& scores,
                                             std::size_t n_top = kDefaultTopRays);

// Throws DegenerateGeometryError when the smallest eigenvalue of the
// (weight-normalized) normal matrix is below 1e-9.
[[nodiscard]] CenterEstimate intersect_rays_wls(const SelectedBundle& bundle);

// Rotation (world -> camera) best aligning the world bearings from `center`
// with the camera bearings of the matched pixels. Throws
// ErrorCode::DegenerateRotation for rank-deficient bearing sets.
[[nodiscard]] Mat3 estimate_rotation(const Vec3& center, const SelectedBundle& bundle, const CameraIntrinsics& k);

// Weighted orthogonal Procrustes: R minimizing sum w |c - R v|^2, det R = +1.
[[nodiscard]] Mat3 procrustes(std::span<const Vec3> from, std::span<const Vec3> to, std::span<const double> weights);

// Pixel lookup for the rays of a bundle (e.g. attention argmax); called with
// the bundle's ray indices.
using PixelMatcher = std::function<std::vector<Vec2>(std::span<const std::size_t>)>;

[[nodiscard]] PoseEstimate estimate_pose(std::span<const Ray> rays, const ScoreVector& scores,
                                         const PixelMatcher& match, const CameraIntrinsics& k,
                                         std::size_t n_top = kDefaultTopRays);

// Matched pixels for the oracle path: the ground-truth projection of each
// ray's source center, snapped to the nearest feature-cell center.
[[nodiscard]] PixelMatcher oracle_matcher(std::span<const Ray> rays, const GaussianCloud& cloud,
                                          const Pose& gt_pose, const CameraIntrinsics& k,
                                          const FeatureMap& grid);

// Matched pixels from an attention map: argmax over pixels, at the cell center.
[[nodiscard]] PixelMatcher attention_matcher(const AttentionMap& attention, const FeatureMap& grid);

[[nodiscard]] PoseError pose_error(const Pose& estimate, const Pose& truth);

}  // namespace sixdgs
