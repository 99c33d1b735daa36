#pragma once
// Independent numerical references used by the unit and acceptance tests.

#include <algorithm>
#include <cmath>
#include <numbers>
#include <random>
#include <vector>

#include "sixdgs/ellicell.hpp"

namespace sixdgs::testing {

// Arc length of (a cos t, b sin t) over [0, 2 pi], composite Simpson.
inline double ellipse_arc_length(double a, double b, int intervals = 200000) {
  const double h = 2.0 * std::numbers::pi / intervals;
  auto f = [&](double t) { return std::sqrt(a * a * std::sin(t) * std::sin(t) + b * b * std::cos(t) * std::cos(t)); };
  double s = f(0.0) + f(2.0 * std::numbers::pi);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(i * h);
  return s * h / 3.0;
}

// Arc length of the same curve between two angles.
inline double ellipse_arc_between(double a, double b, double t0, double t1, int intervals = 2000) {
  const double h = (t1 - t0) / intervals;
  auto f = [&](double t) { return std::sqrt(a * a * std::sin(t) * std::sin(t) + b * b * std::cos(t) * std::cos(t)); };
  double s = f(t0) + f(t1);
  for (int i = 1; i < intervals; ++i) s += (i % 2 ? 4.0 : 2.0) * f(t0 + i * h);
  return s * h / 3.0;
}

// Ellipsoid surface area by midpoint quadrature of |r_theta x r_phi| over the
// (theta, phi) parametrization.
inline double ellipsoid_area_quadrature(double a, double b, double c, int n = 1500) {
  const double dt = std::numbers::pi / n;
  const double dp = 2.0 * std::numbers::pi / (2 * n);
  double sum = 0.0;
  for (int i = 0; i < n; ++i) {
    const double t = (i + 0.5) * dt;
    const double st = std::sin(t), ct = std::cos(t);
    for (int j = 0; j < 2 * n; ++j) {
      const double p = (j + 0.5) * dp;
      const double sp = std::sin(p), cp = std::cos(p);
      const Vec3 rt(a * ct * cp, b * ct * sp, -c * st);
      const Vec3 rp(-a * st * sp, b * st * cp, 0.0);
      sum += rt.cross(rp).norm();
    }
  }
  return sum * dt * dp;
}

// Monte-Carlo cell areas: area-uniform samples on the ellipsoid surface in
// the grid's sorted local frame (x along c, y along b, z along a), each
// assigned to the nearest cell center. Returns relative std of the counts.
inline double cell_area_relative_std(const CellGrid& grid, int samples, std::uint64_t seed) {
  const double a = grid.axes[0], b = grid.axes[1], c = grid.axes[2];
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> n(0.0, 1.0);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const std::size_t cells = grid.local.size();
  std::vector<double> cx(cells), cy(cells), cz(cells);
  for (std::size_t i = 0; i < cells; ++i) {
    cx[i] = grid.local[i].x();
    cy[i] = grid.local[i].y();
    cz[i] = grid.local[i].z();
  }
  std::vector<long> counts(cells, 0);
  int accepted = 0;
  while (accepted < samples) {
    Vec3 v(n(rng), n(rng), n(rng));
    v.normalize();
    // Area element of the map sphere -> ellipsoid, relative to its maximum 1/c.
    const double w = std::sqrt(v.x() * v.x() / (c * c) + v.y() * v.y() / (b * b) + v.z() * v.z() / (a * a)) * c;
    if (u(rng) > w) continue;
    ++accepted;
    const double px = c * v.x(), py = b * v.y(), pz = a * v.z();
    std::size_t best = 0;
    double best_d = 1e300;
    for (std::size_t i = 0; i < cells; ++i) {
      const double dx = px - cx[i], dy = py - cy[i], dz = pz - cz[i];
      const double d = dx * dx + dy * dy + dz * dz;
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    ++counts[best];
  }
  const double mean = static_cast<double>(samples) / cells;
  double var = 0.0;
  for (long k : counts) var += (k - mean) * (k - mean);
  return std::sqrt(var / cells) / mean;
}

}  // namespace sixdgs::testing
