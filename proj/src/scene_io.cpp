#include "sixdgs/scene_io.hpp"

#include <fstream>

#include <json.hpp>

namespace sixdgs {

using nlohmann::json;

namespace {

const Mat3 kFlipYZ = Vec3(1.0, -1.0, -1.0).asDiagonal();

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::Io, "cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, path.string() + ": " + e.what());
  }
}

template <typename T>
T field(const json& j, const char* name, const std::filesystem::path& path) {
  if (!j.contains(name)) throw Error(ErrorCode::Format, path.string() + ": missing field '" + name + "'");
  try {
    return j.at(name).get<T>();
  } catch (const json::exception& e) {
    throw Error(ErrorCode::Format, path.string() + ": field '" + name + "': " + e.what());
  }
}

}  // namespace

std::filesystem::path CameraSet::resolve(const std::string& p) const {
  const std::filesystem::path fp(p);
  return fp.is_absolute() ? fp : base / fp;
}

std::vector<const CameraFrame*> CameraSet::split(const std::string& name) const {
  std::vector<const CameraFrame*> out;
  for (const auto& f : frames)
    if (f.split == name) out.push_back(&f);
  return out;
}

Pose pose_from_c2w(const Eigen::Matrix4d& c2w) {
  Pose p;
  p.rotation = (c2w.topLeftCorner<3, 3>() * kFlipYZ).transpose();
  p.center = c2w.topRightCorner<3, 1>();
  return p;
}

Eigen::Matrix4d c2w_from_pose(const Pose& pose) {
  Eigen::Matrix4d m = Eigen::Matrix4d::Identity();
  m.topLeftCorner<3, 3>() = pose.rotation.transpose() * kFlipYZ;
  m.topRightCorner<3, 1>() = pose.center;
  return m;
}

Pose normalize_pose(const Pose& pose, const GaussianCloud& normalized) {
  return {pose.rotation, (pose.center - normalized.scene_offset) / normalized.scene_scale};
}

CameraSet load_transforms(const std::filesystem::path& path) {
  const json j = read_json(path);
  CameraSet set;
  set.base = path.parent_path();
  set.intrinsics.fx = field<double>(j, "fl_x", path);
  set.intrinsics.fy = j.contains("fl_y") ? field<double>(j, "fl_y", path) : set.intrinsics.fx;
  set.intrinsics.width = field<int>(j, "w", path);
  set.intrinsics.height = field<int>(j, "h", path);
  set.intrinsics.cx = j.contains("cx") ? field<double>(j, "cx", path) : (set.intrinsics.width - 1) / 2.0;
  set.intrinsics.cy = j.contains("cy") ? field<double>(j, "cy", path) : (set.intrinsics.height - 1) / 2.0;
  try {
    set.intrinsics.validate();
  } catch (const Error& e) {
    throw Error(ErrorCode::Format, path.string() + ": " + e.what());
  }
  const auto frames = field<json>(j, "frames", path);
  if (!frames.is_array()) throw Error(ErrorCode::Format, path.string() + ": 'frames' must be an array");
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const json& fj = frames[i];
    CameraFrame f;
    f.id = fj.value("id", "view_" + std::to_string(i));
    f.image = fj.value("file_path", "");
    f.features = fj.value("features", "");
    f.split = fj.value("split", "train");
    const auto m = field<std::vector<std::vector<double>>>(fj, "transform_matrix", path);
    if (m.size() < 3 || m[0].size() != 4 || m[1].size() != 4 || m[2].size() != 4)
      throw Error(ErrorCode::Format, path.string() + ": frame " + f.id + " transform_matrix must be 4x4");
    Eigen::Matrix4d c2w = Eigen::Matrix4d::Identity();
    for (int r = 0; r < 3; ++r)
      for (int c = 0; c < 4; ++c) c2w(r, c) = m[r][c];
    f.pose = pose_from_c2w(c2w);
    const Mat3 rr = f.pose.rotation * f.pose.rotation.transpose();
    if (!(rr - Mat3::Identity()).isZero(1e-4) || !(f.pose.rotation.determinant() > 0.0))
      throw Error(ErrorCode::Format, path.string() + ": frame " + f.id + " rotation is not orthonormal");
    // re-orthonormalize what survived the text round-trip
    const Eigen::JacobiSVD<Mat3> svd(f.pose.rotation, Eigen::ComputeFullU | Eigen::ComputeFullV);
    f.pose.rotation = svd.matrixU() * svd.matrixV().transpose();
    set.frames.push_back(std::move(f));
  }
  return set;
}

void write_transforms(const std::filesystem::path& path, const CameraSet& set) {
  json j;
  j["fl_x"] = set.intrinsics.fx;
  j["fl_y"] = set.intrinsics.fy;
  j["cx"] = set.intrinsics.cx;
  j["cy"] = set.intrinsics.cy;
  j["w"] = set.intrinsics.width;
  j["h"] = set.intrinsics.height;
  json frames = json::array();
  for (const auto& f : set.frames) {
    const Eigen::Matrix4d m = c2w_from_pose(f.pose);
    json rows = json::array();
    for (int r = 0; r < 4; ++r) rows.push_back({m(r, 0), m(r, 1), m(r, 2), m(r, 3)});
    frames.push_back({{"id", f.id},
                      {"file_path", f.image},
                      {"features", f.features},
                      {"split", f.split},
                      {"transform_matrix", rows}});
  }
  j["frames"] = frames;
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << j.dump(2) << '\n';
}

std::string pose_json(const PoseEstimate& est, const std::optional<PoseError>& err) {
  json j;
  json rot = json::array();
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) rot.push_back(est.pose.rotation(r, c));
  j["rotation"] = rot;
  j["center"] = {est.pose.center.x(), est.pose.center.y(), est.pose.center.z()};
  j["residual"] = est.residual;
  j["inliers"] = est.inliers;
  j["flagged"] = est.flagged;
  if (err) {
    j["mae"] = err->mae;
    j["mte"] = err->mte;
  }
  return j.dump(2);
}

void write_pose(const std::filesystem::path& path, const PoseEstimate& est, const std::optional<PoseError>& err) {
  std::ofstream out(path);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + path.string());
  out << pose_json(est, err) << '\n';
}

Pose read_pose(const std::filesystem::path& path) {
  const json j = read_json(path);
  const auto rot = field<std::vector<double>>(j, "rotation", path);
  const auto center = field<std::vector<double>>(j, "center", path);
  if (rot.size() != 9 || center.size() != 3)
    throw Error(ErrorCode::Format, path.string() + ": rotation needs 9 values and center 3");
  Pose p;
  for (int r = 0; r < 3; ++r)
    for (int c = 0; c < 3; ++c) p.rotation(r, c) = rot[r * 3 + c];
  p.center = Vec3(center[0], center[1], center[2]);
  return p;
}

}  // namespace sixdgs
