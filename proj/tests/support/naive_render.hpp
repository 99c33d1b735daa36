#pragma once
// Per-pixel reference renderer: every splat is tested at every pixel, no
// tiling or bounding boxes. Slow, used only to produce and check the golden
// image.

#include <algorithm>
#include <vector>

#include "sixdgs/gaussian_model.hpp"

namespace sixdgs::testing {

inline Image naive_render(const GaussianCloud& cloud, const Pose& pose, const CameraIntrinsics& k,
                          const RenderOptions& opts = {}) {
  struct Item {
    Ellipse e;
    std::size_t index;
  };
  std::vector<Item> splats;
  for (std::size_t i = 0; i < cloud.size(); ++i)
    if (auto e = project_ellipsoid(cloud.ellipsoids[i], pose, k)) splats.push_back({*e, i});
  std::sort(splats.begin(), splats.end(), [](const Item& a, const Item& b) {
    return a.e.depth != b.e.depth ? a.e.depth < b.e.depth : a.index < b.index;
  });

  const double max_tau = 0.5 * opts.cull_sigma * opts.cull_sigma;
  Image img(k.width, k.height);
  for (int y = 0; y < k.height; ++y) {
    for (int x = 0; x < k.width; ++x) {
      Vec3 out = Vec3::Zero();
      double t = 1.0;
      for (const auto& s : splats) {
        double q;
        try {
          q = tau(s.e, Vec2(x, y));
        } catch (const Error&) {
          continue;
        }
        if (q > max_tau) continue;
        const double alpha = s.e.opacity * std::exp(-q);
        out += s.e.color * (alpha * t);
        t *= 1.0 - alpha;
        if (t < opts.min_transmittance) break;
      }
      for (int c = 0; c < 3; ++c) img.at(x, y, c) = std::clamp(out[c], 0.0, 1.0);
    }
  }
  return img;
}

}  // namespace sixdgs::testing
