#include "sixdgs/pose_solver.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>
#include <unordered_set>

namespace sixdgs {

SelectedBundle select_top_rays(std::span<const Ray> rays, const ScoreVector& scores, std::size_t n_top) {
  if (n_top < 2) throw Error(ErrorCode::Config, "N_top must be at least 2");
  if (rays.empty()) throw Error(ErrorCode::InsufficientBundle, "no rays to select from");
  if (scores.size() != rays.size()) throw Error(ErrorCode::Config, "score count does not match ray count");
  std::vector<std::size_t> order(rays.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&scores](std::size_t a, std::size_t b) {
    return scores[a] > scores[b] || (scores[a] == scores[b] && a < b);
  });
  SelectedBundle bundle;
  std::unordered_set<std::uint32_t> used;
  for (std::size_t j : order) {
    if (bundle.rays.size() == n_top) break;
    if (!(scores[j] > 0.0)) break;
    if (!used.insert(rays[j].source).second) continue;
    bundle.indices.push_back(j);
    bundle.rays.push_back(rays[j]);
    bundle.weights.push_back(scores[j]);
  }
  if (bundle.rays.size() < 2)
    throw Error(ErrorCode::InsufficientBundle, "bundle spans " + std::to_string(bundle.rays.size()) +
                                                   " source ellipsoid(s); at least 2 are required");
  return bundle;
}

CenterEstimate intersect_rays_wls(const SelectedBundle& bundle) {
  if (bundle.rays.size() < 2 || bundle.weights.size() != bundle.rays.size())
    throw Error(ErrorCode::InsufficientBundle, "weighted intersection needs at least two weighted rays");
  const double total = std::accumulate(bundle.weights.begin(), bundle.weights.end(), 0.0);
  if (!(total > 0.0)) throw Error(ErrorCode::Config, "bundle weights must be positive");
  Mat3 a = Mat3::Zero();
  Vec3 b = Vec3::Zero();
  std::vector<Mat3> projectors(bundle.rays.size());
  for (std::size_t f = 0; f < bundle.rays.size(); ++f) {
    const Vec3 d = bundle.rays[f].direction.normalized();
    projectors[f] = Mat3::Identity() - d * d.transpose();
    const double w = bundle.weights[f] / total;
    a += w * projectors[f];
    b += w * projectors[f] * bundle.rays[f].origin;
  }
  const Eigen::SelfAdjointEigenSolver<Mat3> eig(a);
  const Vec3 lambda = eig.eigenvalues();  // ascending
  const double condition = lambda(0) > 0.0 ? lambda(2) / lambda(0) : std::numeric_limits<double>::infinity();
  if (!(lambda(0) >= 1e-9))
    throw DegenerateGeometryError("ray bundle is near-parallel (normal-matrix condition number " +
                                      std::to_string(condition) + ")",
                                  condition);
  CenterEstimate out;
  const Mat3& v = eig.eigenvectors();
  out.center = v * (v.transpose() * b).cwiseQuotient(lambda);
  out.condition = condition;
  double sq = 0.0;
  for (std::size_t f = 0; f < bundle.rays.size(); ++f)
    sq += bundle.weights[f] / total * (projectors[f] * (out.center - bundle.rays[f].origin)).squaredNorm();
  out.residual = std::sqrt(sq);
  return out;
}

Mat3 procrustes(std::span<const Vec3> from, std::span<const Vec3> to, std::span<const double> weights) {
  if (from.size() != to.size() || from.size() != weights.size())
    throw Error(ErrorCode::Config, "procrustes inputs differ in length");
  Mat3 h = Mat3::Zero();
  for (std::size_t f = 0; f < from.size(); ++f) h += weights[f] * to[f] * from[f].transpose();
  const Eigen::JacobiSVD<Mat3> svd(h, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const Vec3 s = svd.singularValues();
  if (!(s(0) > 0.0) || s(1) < 1e-9 * s(0))
    throw Error(ErrorCode::DegenerateRotation, "bearing set has rank < 2");
  const Mat3& u = svd.matrixU();
  const Mat3& v = svd.matrixV();
  Vec3 fix(1.0, 1.0, (u * v.transpose()).determinant() < 0.0 ? -1.0 : 1.0);
  return u * fix.asDiagonal() * v.transpose();
}

Mat3 estimate_rotation(const Vec3& center, const SelectedBundle& bundle, const CameraIntrinsics& k) {
  if (bundle.rays.size() < 3) throw Error(ErrorCode::DegenerateRotation, "rotation needs at least 3 rays");
  if (bundle.matched_pixels.size() != bundle.rays.size())
    throw Error(ErrorCode::Config, "every bundle ray needs a matched pixel");
  const Mat3 k_inv = k.matrix().inverse();
  std::vector<Vec3> world(bundle.rays.size()), camera(bundle.rays.size());
  for (std::size_t f = 0; f < bundle.rays.size(); ++f) {
    const Vec3 w = bundle.rays[f].origin - center;
    if (!(w.norm() > 0.0)) throw Error(ErrorCode::DegenerateRotation, "ray origin coincides with the center");
    world[f] = w.normalized();
    camera[f] = (k_inv * bundle.matched_pixels[f].homogeneous()).normalized();
  }
  return procrustes(world, camera, bundle.weights);
}

PoseEstimate estimate_pose(std::span<const Ray> rays, const ScoreVector& scores, const PixelMatcher& match,
                           const CameraIntrinsics& k, std::size_t n_top) {
  SelectedBundle bundle = select_top_rays(rays, scores, n_top);
  const CenterEstimate c = intersect_rays_wls(bundle);
  bundle.matched_pixels = match(bundle.indices);
  PoseEstimate out;
  out.pose.center = c.center;
  out.pose.rotation = estimate_rotation(c.center, bundle, k);
  out.residual = c.residual;
  for (const Ray& r : bundle.rays) {
    const Vec3 d = r.direction.normalized();
    const Vec3 off = c.center - r.origin;
    if ((off - off.dot(d) * d).norm() < kInlierDistance) ++out.inliers;
  }
  out.flagged = c.residual > kResidualThreshold;
  return out;
}

PixelMatcher oracle_matcher(std::span<const Ray> rays, const GaussianCloud& cloud, const Pose& gt_pose,
                            const CameraIntrinsics& k, const FeatureMap& grid) {
  return [rays, &cloud, gt_pose, k, &grid](std::span<const std::size_t> idx) {
    std::vector<Vec2> out;
    out.reserve(idx.size());
    for (std::size_t j : idx) {
      const Vec3 p = gt_pose.to_camera(cloud.ellipsoids.at(rays[j].source).center);
      const double z = std::max(p.z(), 1e-9);
      const Vec2 px(k.fx * p.x() / z + k.cx, k.fy * p.y() / z + k.cy);
      out.push_back(grid.cell_center(grid.cell_at(px)));
    }
    return out;
  };
}

PixelMatcher attention_matcher(const AttentionMap& attention, const FeatureMap& grid) {
  return [&attention, &grid](std::span<const std::size_t> idx) {
    std::vector<Vec2> out;
    out.reserve(idx.size());
    for (std::size_t i : attention.best_pixels(idx)) out.push_back(grid.cell_center(i));
    return out;
  };
}

PoseError pose_error(const Pose& estimate, const Pose& truth) {
  const Mat3 d = estimate.rotation * truth.rotation.transpose();
  const Vec3 axis(d(2, 1) - d(1, 2), d(0, 2) - d(2, 0), d(1, 0) - d(0, 1));
  const double angle = std::atan2(axis.norm(), d.trace() - 1.0);
  return {angle * 180.0 / std::numbers::pi, (estimate.center - truth.center).norm()};
}

}  // namespace sixdgs
