#pragma once
// Scene model and splatting math: 3D Gaussians (ellipsoids), their projection
// to image-plane ellipses, the per-pixel compositing function and per-ray
// color synthesis.

#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "sixdgs/common.hpp"
#include "sixdgs/ray.hpp"

namespace sixdgs {

struct Ellipsoid {
  Vec3 center = Vec3::Zero();
  Quat rotation = Quat::Identity();  // unit quaternion, local -> world
  Vec3 scale = Vec3::Ones();         // semi-axis lengths, all > 0
  double opacity = 1.0;              // [0, 1]
  Vec3 color = Vec3::Zero();         // RGB in [0, 1] (degree-0 SH term)
};

struct GaussianCloud {
  std::vector<Ellipsoid> ellipsoids;
  // Normalized = (source - scene_offset) / scene_scale.
  double scene_scale = 1.0;
  Vec3 scene_offset = Vec3::Zero();

  [[nodiscard]] std::size_t size() const noexcept { return ellipsoids.size(); }
};

struct CameraIntrinsics {
  double fx = 1.0;
  double fy = 1.0;
  double cx = 0.5;
  double cy = 0.5;
  int width = 1;
  int height = 1;

  [[nodiscard]] Mat3 matrix() const;
  // Throws ErrorCode::Config when fx, fy <= 0 or the principal point lies
  // outside the image.
  void validate() const;
};

// Extrinsics. rotation maps world directions into the camera frame
// (x right, y down, z forward); center is the optical center in world units.
struct Pose {
  Mat3 rotation = Mat3::Identity();
  Vec3 center = Vec3::Zero();

  [[nodiscard]] Vec3 to_camera(const Vec3& world) const { return rotation * (world - center); }
};

// Splatted ellipsoid. Pixel coordinates put the center of pixel (i, j) at
// (i, j).
struct Ellipse {
  Vec2 center = Vec2::Zero();
  Mat2 covariance = Mat2::Identity();
  double depth = 0.0;
  Vec3 color = Vec3::Zero();
  double opacity = 0.0;
};

struct Image {
  int width = 0;
  int height = 0;
  std::vector<double> rgb;  // row-major, interleaved, values in [0, 1]

  Image() = default;
  Image(int w, int h) : width(w), height(h), rgb(static_cast<std::size_t>(w) * h * 3, 0.0) {}

  [[nodiscard]] double& at(int x, int y, int c) {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
  [[nodiscard]] double at(int x, int y, int c) const {
    return rgb[(static_cast<std::size_t>(y) * width + x) * 3 + c];
  }
};

struct RenderOptions {
  // Splats contribute only where the 2D Mahalanobis distance is <= cull_sigma.
  double cull_sigma = 3.0;
  // Compositing stops once accumulated transmittance drops below this.
  double min_transmittance = 1e-4;
};

// Degree-0 spherical-harmonic constant used by the PLY color encoding.
inline constexpr double kShC0 = 0.28209479177387814;

// Translate and uniformly scale so the bounding box of centers is centered at
// the origin with largest extent 1. Ellipsoid scales follow the same factor.
[[nodiscard]] GaussianCloud normalize_scene(const GaussianCloud& cloud);

// Sigma = R U U^T R^T
[[nodiscard]] Mat3 covariance(const Ellipsoid& e);

// nullopt when the center is not in front of the camera (z <= 1e-6).
[[nodiscard]] std::optional<Ellipse> project_ellipsoid(const Ellipsoid& e, const Pose& pose,
                                                       const CameraIntrinsics& k);

// 1/2 d^T E^-1 d, d = p - center. Throws ErrorCode::SingularEllipse when the
// condition number of E reaches 1e12.
[[nodiscard]] double tau(const Ellipse& ellipse, const Vec2& p);

// Front-to-back compositing of depth-sorted splats at pixel p. The caller is
// responsible for footprint culling.
[[nodiscard]] Vec3 render_pixel(std::span<const Ellipse> splats, const Vec2& p,
                                const RenderOptions& opts = {});

[[nodiscard]] Image render_image(const GaussianCloud& cloud, const Pose& pose,
                                 const CameraIntrinsics& k, const RenderOptions& opts = {});

// Reference ray color: linear scan over every ellipsoid.
[[nodiscard]] Vec3 ray_color(const GaussianCloud& cloud, const Ray& ray,
                             const RenderOptions& opts = {});

// Same result as ray_color, with a bounding-volume hierarchy over the 3-sigma
// boxes. Holds a reference to the cloud; the cloud must outlive it.
class RayColorizer {
 public:
  explicit RayColorizer(const GaussianCloud& cloud, RenderOptions opts = {});
  ~RayColorizer();
  RayColorizer(const RayColorizer&) = delete;
  RayColorizer& operator=(const RayColorizer&) = delete;

  [[nodiscard]] Vec3 operator()(const Ray& ray) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace sixdgs
