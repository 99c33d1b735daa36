#pragma once
// Camera sets (NeRF-style transforms JSON) and pose JSON.
//
// transforms JSON: {"fl_x", "fl_y", "cx", "cy", "w", "h", "frames": [{"id",
// "file_path", "features", "split", "transform_matrix"}]}. transform_matrix is
// camera-to-world, 4x4 row-major, with the OpenGL camera axes (x right, y up,
// looking down -z). Relative paths resolve against the JSON's directory.

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "sixdgs/gaussian_model.hpp"
#include "sixdgs/pose_solver.hpp"

namespace sixdgs {

struct CameraFrame {
  std::string id;
  Pose pose;
  std::string image;     // as written in the file
  std::string features;  // as written in the file
  std::string split = "train";
};

struct CameraSet {
  CameraIntrinsics intrinsics;
  std::vector<CameraFrame> frames;
  std::filesystem::path base;  // directory relative paths resolve against

  [[nodiscard]] std::filesystem::path resolve(const std::string& p) const;
  [[nodiscard]] std::vector<const CameraFrame*> split(const std::string& name) const;
};

[[nodiscard]] CameraSet load_transforms(const std::filesystem::path& path);
void write_transforms(const std::filesystem::path& path, const CameraSet& set);

// OpenGL camera-to-world <-> Pose (world-to-camera rotation, OpenCV axes).
[[nodiscard]] Pose pose_from_c2w(const Eigen::Matrix4d& c2w);
[[nodiscard]] Eigen::Matrix4d c2w_from_pose(const Pose& pose);

// Same frame change normalize_scene applied to the model.
[[nodiscard]] Pose normalize_pose(const Pose& pose, const GaussianCloud& normalized);

// {"rotation": 9 row-major, "center": 3, "residual", "mae"?, "mte"?}
[[nodiscard]] std::string pose_json(const PoseEstimate& est, const std::optional<PoseError>& err = {});
void write_pose(const std::filesystem::path& path, const PoseEstimate& est,
                const std::optional<PoseError>& err = {});
[[nodiscard]] Pose read_pose(const std::filesystem::path& path);

}  // namespace sixdgs
