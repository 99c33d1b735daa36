#pragma once
// Radiant Ellicell: split an ellipsoid surface into approximately equal-area
// cells, ring by ring along the major axis, and cast one ray from the
// ellipsoid center through every cell center.

#include <array>
#include <cstdint>
#include <optional>
#include <vector>

#include "sixdgs/gaussian_model.hpp"
#include "sixdgs/ray.hpp"

namespace sixdgs {

struct EllicellConfig {
  int cells = 100;          // G, cells cast per ellipsoid before hemisphere filtering
  int arc_samples = 4096;   // trapezoid intervals for the ring arc-length table
  int normal_neighbors = 16;
};

struct RingRecord {
  int index = 0;
  double scale = 0.0;   // ribbon scale in (0, 1]
  double r = 0.0;       // semi-axis along the middle ellipsoid axis
  double w = 0.0;       // semi-axis along the minor ellipsoid axis
  std::uint32_t cell_count = 0;
};

struct CellGrid {
  std::uint32_t ellipsoid_id = 0;
  // Sorted semi-axes a >= b >= c and the ellipsoid-frame axis of each.
  Vec3 axes = Vec3::Ones();
  std::array<int, 3> axis_of = {0, 1, 2};
  // Cell centers in the sorted frame: x along c, y along b, z along a.
  std::vector<Vec3> local;
  std::vector<Vec3> world;
  std::vector<RingRecord> rings;
  double target_area = 0.0;  // mu = h / G
  double side = 0.0;         // z = sqrt(mu)
  int ring_count = 0;        // e
  double ring_spacing = 0.0; // meridian arc length between ring centerlines
};

struct NormalField {
  std::vector<Vec3> normals;
  std::vector<bool> low_confidence;  // rank-deficient neighborhood
  int k_neighbors = 0;
};

// Ramanujan-style approximation of the ellipsoid surface area.
[[nodiscard]] double surface_area(double a, double b, double c);

// Ramanujan's second approximation of the ellipse perimeter.
[[nodiscard]] double ellipse_perimeter(double a, double b);

// sqrt(1 - (0.5 dr + n dr - a)^2 / b^2); nullopt when the radicand is
// negative (ring outside the surface).
[[nodiscard]] std::optional<double> ribbon_scale(int n, double ring_spacing, double a, double b);

// Cells on ring n of `rings` for sorted semi-axes a >= b >= c and cell side
// `side`; at least one. Ring centerlines are equally spaced in arc length
// along the (a, b) meridian.
[[nodiscard]] std::uint32_t cells_per_ring(int n, int rings, double a, double b, double c,
                                           double side);

// Angles theta_g, g = 0..count-1, splitting the closed curve
// (x_axis cos t, y_axis sin t) into `count` arcs of equal length. Uses the
// inverse of the cumulative arc length, tabulated with `samples` trapezoids.
[[nodiscard]] std::vector<double> arc_positions(double x_axis, double y_axis, int count,
                                                int samples = 4096);

// Throws ErrorCode::Config for cells < 4.
[[nodiscard]] CellGrid build_cells(const Ellipsoid& e, int cells, std::uint32_t id = 0,
                                   int arc_samples = 4096);

// Per-centroid normal from the k nearest centroids, oriented away from their
// centroid. Throws ErrorCode::Config unless size > k >= 3.
[[nodiscard]] NormalField estimate_normals(const GaussianCloud& cloud, int k);

// Rays through every cell center that point into the normal's hemisphere,
// concatenated in ellipsoid order, each colored by ray_color.
[[nodiscard]] std::vector<Ray> generate_rays(const GaussianCloud& cloud, int cells,
                                             const NormalField& normals, int arc_samples = 4096);

}  // namespace sixdgs
