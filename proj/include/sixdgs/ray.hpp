#pragma once

#include <cstdint>

#include "sixdgs/common.hpp"

namespace sixdgs {

// One pose hypothesis: a half-line cast from an ellipsoid center.
struct Ray {
  Vec3 origin = Vec3::Zero();
  Vec3 direction = Vec3::UnitZ();  // unit norm
  Vec3 color = Vec3::Zero();
  std::uint32_t source = 0;  // index of the emitting ellipsoid
};

}  // namespace sixdgs
