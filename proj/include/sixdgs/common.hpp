#pragma once

#include <Eigen/Core>
#include <Eigen/Geometry>

#include <cstdint>
#include <stdexcept>
#include <string>

namespace sixdgs {

using Vec2 = Eigen::Vector2d;
using Vec3 = Eigen::Vector3d;
using Mat2 = Eigen::Matrix2d;
using Mat3 = Eigen::Matrix3d;
using Quat = Eigen::Quaterniond;

// Stable classification of failures. The CLI maps these onto process exit
// codes (see cli.hpp), so the enumerators must not be renumbered.
enum class ErrorCode {
  Format,               // malformed or truncated input file
  EmptyModel,           // model with zero ellipsoids
  Config,               // invalid knob or precondition on sizes
  Domain,               // numeric argument outside the operation's domain
  Io,                   // file could not be opened/written
  SingularEllipse,      // projected 2D covariance not invertible
  DegenerateExtent,     // all centers coincide, cannot normalize
  DegenerateGeometry,   // ray bundle cannot be intersected
  InsufficientBundle,   // fewer than two distinct source ellipsoids
  DegenerateRotation,   // bearing set has rank < 2
  Training,             // loss diverged
};

class Error : public std::runtime_error {
 public:
  Error(ErrorCode code, const std::string& what) : std::runtime_error(what), code_(code) {}
  [[nodiscard]] ErrorCode code() const noexcept { return code_; }

 private:
  ErrorCode code_;
};

// Raised by intersect_rays_wls; carries the normal-matrix condition number.
class DegenerateGeometryError : public Error {
 public:
  DegenerateGeometryError(const std::string& what, double condition)
      : Error(ErrorCode::DegenerateGeometry, what), condition_(condition) {}
  [[nodiscard]] double condition_number() const noexcept { return condition_; }

 private:
  double condition_;
};

// Raised by train_scorer when the loss stops being finite.
class TrainingError : public Error {
 public:
  TrainingError(const std::string& what, int iteration)
      : Error(ErrorCode::Training, what), iteration_(iteration) {}
  [[nodiscard]] int iteration() const noexcept { return iteration_; }

 private:
  int iteration_;
};

}  // namespace sixdgs
