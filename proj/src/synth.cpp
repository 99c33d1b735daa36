#include "sixdgs/synth.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>

#include "sixdgs/image_io.hpp"
#include "sixdgs/ply.hpp"

namespace sixdgs {

namespace {

Quat random_rotation(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Quat q(n(rng), n(rng), n(rng), n(rng));
  q.normalize();
  if (q.w() < 0.0) q.coeffs() *= -1.0;
  return q;
}

Vec3 random_direction(std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Vec3 d;
  do {
    d = Vec3(n(rng), n(rng), n(rng));
  } while (d.norm() < 1e-9);
  return d.normalized();
}

Vec3 clamp01(const Vec3& c) { return c.cwiseMax(0.0).cwiseMin(1.0); }

GaussianCloud sphere_shell(std::size_t count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  // Sized so neighbours overlap into an opaque surface: the far side of the
  // shell must not show through.
  const double spacing = 2.5 * std::sqrt(std::numbers::pi / static_cast<double>(count));
  GaussianCloud cloud;
  cloud.ellipsoids.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Ellipsoid e;
    const Vec3 dir = random_direction(rng);
    e.center = (0.5 + 0.04 * (u(rng) - 0.5)) * dir;
    e.rotation = random_rotation(rng);
    e.scale = spacing * Vec3(0.35 + 0.25 * u(rng), 0.25 + 0.2 * u(rng), 0.1 + 0.1 * u(rng));
    e.opacity = 0.75 + 0.23 * u(rng);
    e.color = clamp01(Vec3::Constant(0.5) + 0.45 * dir + 0.03 * Vec3(u(rng) - 0.5, u(rng) - 0.5, u(rng) - 0.5));
    cloud.ellipsoids.push_back(e);
  }
  return cloud;
}

GaussianCloud box_cluster(std::size_t count, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  std::normal_distribution<double> n(0.0, 0.08);
  std::vector<Vec3> seeds(8);
  for (auto& s : seeds) s = Vec3(u(rng), u(rng), u(rng)) * 0.8 - Vec3::Constant(0.4);
  const double spacing = std::cbrt(0.25 / static_cast<double>(count));
  GaussianCloud cloud;
  cloud.ellipsoids.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    Ellipsoid e;
    const Vec3& s = seeds[i % seeds.size()];
    e.center = (s + Vec3(n(rng), n(rng), n(rng))).cwiseMax(-0.5).cwiseMin(0.5);
    e.rotation = random_rotation(rng);
    e.scale = spacing * Vec3(0.4 + 0.3 * u(rng), 0.3 + 0.2 * u(rng), 0.15 + 0.1 * u(rng));
    e.opacity = 0.75 + 0.23 * u(rng);
    e.color = clamp01(Vec3::Constant(0.5) + 0.9 * e.center);
    cloud.ellipsoids.push_back(e);
  }
  return cloud;
}

std::string view_id(int v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03d", v);
  return buf;
}

}  // namespace

SynthLayout parse_layout(const std::string& name) {
  if (name == "sphere-shell") return SynthLayout::SphereShell;
  if (name == "box-cluster") return SynthLayout::BoxCluster;
  throw Error(ErrorCode::Config, "unknown layout '" + name + "' (expected sphere-shell or box-cluster)");
}

std::string layout_name(SynthLayout layout) {
  return layout == SynthLayout::SphereShell ? "sphere-shell" : "box-cluster";
}

Pose look_at(const Vec3& eye, const Vec3& target) {
  const Vec3 forward = (target - eye).normalized();
  Vec3 right = forward.cross(Vec3::UnitZ());
  if (right.norm() < 1e-9) right = forward.cross(Vec3::UnitY());
  right.normalize();
  const Vec3 down = forward.cross(right);
  Pose p;
  p.rotation.row(0) = right.transpose();
  p.rotation.row(1) = down.transpose();
  p.rotation.row(2) = forward.transpose();
  p.center = eye;
  return p;
}

SynthScene make_synth_scene(const SynthConfig& cfg) {
  if (cfg.ellipsoids < 2) throw Error(ErrorCode::Config, "synthetic scene needs at least 2 ellipsoids");
  if (cfg.views < 1) throw Error(ErrorCode::Config, "synthetic scene needs at least one view");
  if (cfg.image_size <= 0 || cfg.feature_stride <= 0 || cfg.image_size % cfg.feature_stride != 0)
    throw Error(ErrorCode::Config, "image size must be a positive multiple of the feature stride");
  if (!(cfg.camera_distance > 0.9))
    throw Error(ErrorCode::Config, "cameras must stay outside the unit box (distance > 0.9)");
  std::mt19937_64 rng(cfg.seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);

  SynthScene scene;
  scene.cloud = normalize_scene(cfg.layout == SynthLayout::SphereShell ? sphere_shell(cfg.ellipsoids, rng)
                                                                       : box_cluster(cfg.ellipsoids, rng));
  // Present the generated frame as the source frame.
  scene.cloud.scene_offset = Vec3::Zero();
  scene.cloud.scene_scale = 1.0;

  CameraIntrinsics& k = scene.cameras.intrinsics;
  k.width = k.height = cfg.image_size;
  k.fx = k.fy = 0.5 * cfg.image_size / std::tan(0.5 * cfg.fov_degrees * std::numbers::pi / 180.0);
  k.cx = k.cy = 0.5 * (cfg.image_size - 1);

  const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
  for (int v = 0; v < cfg.views; ++v) {
    const double t = (v + 0.5) / cfg.views;
    const double elevation = (10.0 + 55.0 * t) * std::numbers::pi / 180.0 + 0.05 * (u(rng) - 0.5);
    const double azimuth = v * golden + 0.1 * (u(rng) - 0.5);
    const Vec3 eye = cfg.camera_distance * Vec3(std::cos(elevation) * std::cos(azimuth),
                                                std::cos(elevation) * std::sin(azimuth), std::sin(elevation));
    CameraFrame f;
    f.id = view_id(v);
    f.pose = look_at(eye, Vec3::Zero());
    f.image = "images/" + f.id + ".png";
    f.features = "features/" + f.id + ".6dfeat";
    f.split = cfg.test_every > 0 && v % cfg.test_every == cfg.test_every - 1 ? "test" : "train";
    scene.cameras.frames.push_back(std::move(f));
  }
  return scene;
}

SynthScene write_synth(const std::filesystem::path& dir, const SynthConfig& cfg) {
  SynthScene scene = make_synth_scene(cfg);
  scene.cameras.base = dir;
  std::error_code ec;
  for (const char* sub : {"images", "features"}) {
    std::filesystem::create_directories(dir / sub, ec);
    if (ec) throw Error(ErrorCode::Io, "cannot create " + (dir / sub).string() + ": " + ec.message());
  }
  write_ply(dir / "model.ply", scene.cloud);
  for (const auto& f : scene.cameras.frames) {
    const Image img = render_image(scene.cloud, f.pose, scene.cameras.intrinsics);
    write_png(dir / f.image, img);
    write_features(dir / f.features, features_from_image(img, cfg.feature_stride));
  }
  write_transforms(dir / "transforms.json", scene.cameras);
  return scene;
}

}  // namespace sixdgs
