#pragma once
// Seeded synthetic scenes: a Gaussian cloud in the unit box, cameras on a
// viewing hemisphere around it, rendered views and RGB-as-features grids.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "sixdgs/features.hpp"
#include "sixdgs/gaussian_model.hpp"
#include "sixdgs/scene_io.hpp"

namespace sixdgs {

enum class SynthLayout { SphereShell, BoxCluster };

[[nodiscard]] SynthLayout parse_layout(const std::string& name);
[[nodiscard]] std::string layout_name(SynthLayout layout);

struct SynthConfig {
  std::size_t ellipsoids = 500;
  SynthLayout layout = SynthLayout::SphereShell;
  int views = 12;
  int test_every = 0;          // every n-th view goes to the test split; 0 = all train
  int image_size = 448;        // square images
  int feature_stride = 14;
  double camera_distance = 1.0;
  double fov_degrees = 65.0;
  std::uint64_t seed = 7;
};

struct SynthScene {
  GaussianCloud cloud;  // normalized
  CameraSet cameras;    // poses in the cloud's frame, paths filled in
};

// Deterministic in cfg; no files touched.
[[nodiscard]] SynthScene make_synth_scene(const SynthConfig& cfg);

// Writes model.ply, transforms.json, images/<id>.png and features/<id>.6dfeat
// under `dir`. Returns the scene as written.
SynthScene write_synth(const std::filesystem::path& dir, const SynthConfig& cfg);

// Look-at pose with world +z as up.
[[nodiscard]] Pose look_at(const Vec3& eye, const Vec3& target);

}  // namespace sixdgs
