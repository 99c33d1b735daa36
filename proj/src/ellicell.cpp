#include "sixdgs/ellicell.hpp"

#include <Eigen/Eigenvalues>

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <string>

namespace sixdgs {

double surface_area(double a, double b, double c) {
  if (!(a > 0.0 && b > 0.0 && c > 0.0))
    throw Error(ErrorCode::Domain, "surface_area: semi-axes must be positive");
  constexpr double p = 1.6;
  const double mean = (std::pow(a * b, p) + std::pow(a * c, p) + std::pow(b * c, p)) / 3.0;
  return 4.0 * std::numbers::pi * std::pow(mean, 1.0 / p);
}

double ellipse_perimeter(double a, double b) {
  if (!(a > 0.0 && b > 0.0)) throw Error(ErrorCode::Domain, "ellipse_perimeter: semi-axes must be positive");
  if (a < b) std::swap(a, b);
  const double diff = a - b;
  const double sum = a + b;
  return std::numbers::pi *
         (sum + 3.0 * diff * diff / (10.0 * sum + std::sqrt(a * a + 14.0 * a * b + b * b)));
}

std::optional<double> ribbon_scale(int n, double ring_spacing, double a, double b) {
  const double offset = 0.5 * ring_spacing + n * ring_spacing - a;
  const double radicand = 1.0 - offset * offset / (b * b);
  if (radicand < 0.0) return std::nullopt;
  return std::sqrt(radicand);
}

namespace {

struct RingPlacement {
  double height = 0.0;  // along the major axis
  double scale = 0.0;   // ring semi-axes are scale * b and scale * c
};

// Ring centerlines sit at equal arc length along the (a, b) meridian, so every
// ribbon is about one cell side wide. The cross-section at a ring is the
// (b, c) equator shrunk by sin of the meridian angle.
std::vector<RingPlacement> ring_placements(int rings, double a, double b, int samples) {
  const std::vector<double> theta = arc_positions(a, b, 4 * rings, samples);
  std::vector<RingPlacement> out(static_cast<std::size_t>(rings));
  for (int n = 0; n < rings; ++n) {
    const double t = theta[static_cast<std::size_t>(2 * n + 1)];
    out[static_cast<std::size_t>(n)] = {-a * std::cos(t), std::sin(t)};
  }
  return out;
}

std::uint32_t cells_for_scale(double scale, double b, double c, double side) {
  if (!(scale > 0.0)) return 1;
  const double count = std::floor(ellipse_perimeter(scale * b, scale * c) / side);
  return static_cast<std::uint32_t>(std::max(1.0, count));
}

}  // namespace

std::uint32_t cells_per_ring(int n, int rings, double a, double b, double c, double side) {
  if (rings < 1 || n < 0 || n >= rings) throw Error(ErrorCode::Config, "cells_per_ring: ring index out of range");
  return cells_for_scale(ring_placements(rings, a, b, 4096)[static_cast<std::size_t>(n)].scale, b, c, side);
}

std::vector<double> arc_positions(double x_axis, double y_axis, int count, int samples) {
  if (count < 1) throw Error(ErrorCode::Config, "arc_positions: count must be >= 1");
  if (samples < 1) throw Error(ErrorCode::Config, "arc_positions: samples must be >= 1");
  const double two_pi = 2.0 * std::numbers::pi;
  const double step = two_pi / samples;
  auto speed = [&](double t) {
    const double s = std::sin(t);
    const double c = std::cos(t);
    return std::sqrt(x_axis * x_axis * s * s + y_axis * y_axis * c * c);
  };

  std::vector<double> cumulative(static_cast<std::size_t>(samples) + 1, 0.0);
  double prev = speed(0.0);
  for (int i = 1; i <= samples; ++i) {
    const double cur = speed(i * step);
    cumulative[i] = cumulative[i - 1] + 0.5 * (prev + cur) * step;
    prev = cur;
  }
  const double total = cumulative.back();

  std::vector<double> angles(static_cast<std::size_t>(count));
  for (int g = 0; g < count; ++g) {
    const double target = total * g / count;
    auto it = std::upper_bound(cumulative.begin(), cumulative.end(), target);
    const auto hi = static_cast<std::size_t>(std::min<std::ptrdiff_t>(
        std::distance(cumulative.begin(), it), samples));
    const std::size_t lo = hi - 1;
    const double span = cumulative[hi] - cumulative[lo];
    const double frac = span > 0.0 ? (target - cumulative[lo]) / span : 0.0;
    angles[g] = (lo + frac) * step;
  }
  return angles;
}

CellGrid build_cells(const Ellipsoid& e, int cells, std::uint32_t id, int arc_samples) {
  if (cells < 4) throw Error(ErrorCode::Config, "build_cells: at least 4 cells required, got " + std::to_string(cells));

  CellGrid grid;
  grid.ellipsoid_id = id;
  std::array<int, 3> order = {0, 1, 2};
  std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return e.scale[i] > e.scale[j]; });
  // order = {major, middle, minor}
  grid.axis_of = order;
  const double a = e.scale[order[0]];
  const double b = e.scale[order[1]];
  const double c = e.scale[order[2]];
  grid.axes = Vec3(a, b, c);

  grid.target_area = surface_area(a, b, c) / cells;
  grid.side = std::sqrt(grid.target_area);
  grid.ring_count = std::max(1, static_cast<int>(std::floor(ellipse_perimeter(a, b) / (2.0 * grid.side))));
  grid.ring_spacing = ellipse_perimeter(a, b) / (2.0 * grid.ring_count);

  const Mat3 rot = e.rotation.toRotationMatrix();
  const std::vector<RingPlacement> placements = ring_placements(grid.ring_count, a, b, arc_samples);
  for (int n = 0; n < grid.ring_count; ++n) {
    const RingPlacement& place = placements[static_cast<std::size_t>(n)];
    RingRecord ring;
    ring.index = n;
    ring.scale = place.scale;
    ring.r = place.scale * b;
    ring.w = place.scale * c;
    ring.cell_count = cells_for_scale(place.scale, b, c, grid.side);
    const double height = place.height;
    for (double theta : arc_positions(ring.w, ring.r, static_cast<int>(ring.cell_count), arc_samples)) {
      const Vec3 u(ring.w * std::cos(theta), ring.r * std::sin(theta), height);
      Vec3 p;
      p[order[2]] = u.x();
      p[order[1]] = u.y();
      p[order[0]] = u.z();
      grid.local.push_back(u);
      grid.world.push_back(e.center + rot * p);
    }
    grid.rings.push_back(ring);
  }
  return grid;
}

NormalField estimate_normals(const GaussianCloud& cloud, int k) {
  const auto count = static_cast<int>(cloud.size());
  if (k < 3 || count <= k)
    throw Error(ErrorCode::Config, "estimate_normals: need size > k >= 3 (size " + std::to_string(count) +
                                       ", k " + std::to_string(k) + ")");
  NormalField field;
  field.k_neighbors = k;
  field.normals.assign(cloud.size(), Vec3::UnitZ());
  std::vector<char> low(cloud.size(), 0);

#pragma omp parallel
  {
    std::vector<std::pair<double, int>> dist(cloud.size());
#pragma omp for schedule(static)
    for (int i = 0; i < count; ++i) {
      const Vec3& x = cloud.ellipsoids[i].center;
      for (int j = 0; j < count; ++j) dist[j] = {(cloud.ellipsoids[j].center - x).squaredNorm(), j};
      dist[i].first = std::numeric_limits<double>::infinity();
      std::partial_sort(dist.begin(), dist.begin() + k, dist.end());

      Vec3 mean = Vec3::Zero();
      for (int j = 0; j < k; ++j) mean += cloud.ellipsoids[dist[j].second].center;
      mean /= k;
      Mat3 scatter = Mat3::Zero();
      for (int j = 0; j < k; ++j) {
        const Vec3 d = cloud.ellipsoids[dist[j].second].center - mean;
        scatter += d * d.transpose();
      }
      const Eigen::SelfAdjointEigenSolver<Mat3> solver(scatter);
      const Vec3 ev = solver.eigenvalues();
      Vec3 n = solver.eigenvectors().col(0).normalized();
      low[i] = !(ev[1] > 1e-9 * ev[2]) ? 1 : 0;

      const Vec3 outward = x - mean;
      const double side = n.dot(outward);
      const double tol = 1e-9 * std::max(outward.norm(), std::sqrt(std::max(ev[2], 0.0)));
      if (std::abs(side) > tol) {
        if (side < 0.0) n = -n;
      } else {
        for (int c = 0; c < 3; ++c) {
          if (std::abs(n[c]) > 1e-12) {
            if (n[c] < 0.0) n = -n;
            break;
          }
        }
      }
      field.normals[i] = n;
    }
  }
  field.low_confidence.assign(low.begin(), low.end());
  return field;
}

std::vector<Ray> generate_rays(const GaussianCloud& cloud, int cells, const NormalField& normals,
                               int arc_samples) {
  if (normals.normals.size() != cloud.size())
    throw Error(ErrorCode::Config, "generate_rays: normal field does not cover every ellipsoid");
  const RayColorizer colorize(cloud);
  const auto count = static_cast<int>(cloud.size());
  std::vector<std::vector<Ray>> per(cloud.size());

#pragma omp parallel for schedule(dynamic, 16)
  for (int i = 0; i < count; ++i) {
    const Ellipsoid& e = cloud.ellipsoids[i];
    const CellGrid grid = build_cells(e, cells, static_cast<std::uint32_t>(i), arc_samples);
    const Vec3& normal = normals.normals[i];
    auto& out = per[i];
    for (const Vec3& u : grid.world) {
      Ray ray;
      ray.origin = e.center;
      ray.direction = (u - e.center).normalized();
      if (!(ray.direction.dot(normal) > 0.0)) continue;
      ray.source = static_cast<std::uint32_t>(i);
      ray.color = colorize(ray);
      out.push_back(ray);
    }
  }

  std::size_t total = 0;
  for (const auto& v : per) total += v.size();
  std::vector<Ray> rays;
  rays.reserve(total);
  for (auto& v : per) rays.insert(rays.end(), v.begin(), v.end());
  return rays;
}

}  // namespace sixdgs
