#include "sixdgs/gaussian_model.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cassert>
#include <cmath>
#include <numeric>

namespace sixdgs {

Mat3 CameraIntrinsics::matrix() const {
  Mat3 k = Mat3::Identity();
  k(0, 0) = fx;
  k(1, 1) = fy;
  k(0, 2) = cx;
  k(1, 2) = cy;
  return k;
}

void CameraIntrinsics::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) throw Error(ErrorCode::Config, "focal lengths must be positive");
  if (width <= 0 || height <= 0) throw Error(ErrorCode::Config, "image size must be positive");
  if (!(cx > 0.0 && cx < width && cy > 0.0 && cy < height))
    throw Error(ErrorCode::Config, "principal point outside the image");
}

GaussianCloud normalize_scene(const GaussianCloud& cloud) {
  if (cloud.ellipsoids.empty()) throw Error(ErrorCode::EmptyModel, "cannot normalize an empty model");
  Vec3 lo = cloud.ellipsoids.front().center;
  Vec3 hi = lo;
  for (const auto& e : cloud.ellipsoids) {
    lo = lo.cwiseMin(e.center);
    hi = hi.cwiseMax(e.center);
  }
  const double extent = (hi - lo).maxCoeff();
  const double magnitude = std::max({1.0, lo.cwiseAbs().maxCoeff(), hi.cwiseAbs().maxCoeff()});
  if (!(extent > 1e-12 * magnitude))
    throw Error(ErrorCode::DegenerateExtent, "all ellipsoid centers coincide; scene extent is zero");

  const Vec3 mid = 0.5 * (lo + hi);
  const double factor = 1.0 / extent;
  GaussianCloud out = cloud;
  for (auto& e : out.ellipsoids) {
    e.center = (e.center - mid) * factor;
    e.scale *= factor;
  }
  out.scene_offset = cloud.scene_offset + cloud.scene_scale * mid;
  out.scene_scale = cloud.scene_scale * extent;
  return out;
}

Mat3 covariance(const Ellipsoid& e) {
  const Mat3 r = e.rotation.toRotationMatrix();
  const Mat3 u = e.scale.asDiagonal();
  return r * u * u.transpose() * r.transpose();
}

std::optional<Ellipse> project_ellipsoid(const Ellipsoid& e, const Pose& pose,
                                         const CameraIntrinsics& k) {
  const Vec3 t = pose.to_camera(e.center);
  if (!(t.z() > 1e-6)) return std::nullopt;

  const double inv_z = 1.0 / t.z();
  Eigen::Matrix<double, 2, 3> jac;
  jac << k.fx * inv_z, 0.0, -k.fx * t.x() * inv_z * inv_z,  //
      0.0, k.fy * inv_z, -k.fy * t.y() * inv_z * inv_z;

  // Local affine approximation of the projection in homogeneous form. The
  // translation column is zero because covariances are translation invariant.
  Eigen::Matrix<double, 3, 4> proj = Eigen::Matrix<double, 3, 4>::Zero();
  proj.topLeftCorner<2, 3>() = jac * pose.rotation;
  proj(2, 3) = 1.0;
  Eigen::Matrix4d sigma_h = Eigen::Matrix4d::Zero();
  sigma_h.topLeftCorner<3, 3>() = covariance(e);
  sigma_h(3, 3) = 1.0;
  const Mat3 ellipse_h = proj * sigma_h * proj.transpose();

  Ellipse out;
  out.center = Vec2(k.fx * t.x() * inv_z + k.cx, k.fy * t.y() * inv_z + k.cy);
  out.covariance = ellipse_h.topLeftCorner<2, 2>() / ellipse_h(2, 2);
  out.covariance(0, 1) = out.covariance(1, 0) = 0.5 * (out.covariance(0, 1) + out.covariance(1, 0));
  out.depth = t.z();
  out.color = e.color;
  out.opacity = e.opacity;
  return out;
}

namespace {

constexpr double kMaxCondition = 1e12;

struct Eigen2 {
  double lo;
  double hi;
};

Eigen2 symmetric_eigenvalues(const Mat2& m) {
  const double mean = 0.5 * (m(0, 0) + m(1, 1));
  const double half_diff = 0.5 * (m(0, 0) - m(1, 1));
  const double radius = std::sqrt(half_diff * half_diff + m(0, 1) * m(0, 1));
  return {mean - radius, mean + radius};
}

bool invertible(const Mat2& cov) {
  const auto ev = symmetric_eigenvalues(cov);
  return ev.lo > 0.0 && ev.hi / ev.lo < kMaxCondition;
}

Mat2 conic_of(const Mat2& cov) {
  const double det = cov(0, 0) * cov(1, 1) - cov(0, 1) * cov(1, 0);
  Mat2 inv;
  inv << cov(1, 1) / det, -cov(0, 1) / det, -cov(1, 0) / det, cov(0, 0) / det;
  return inv;
}

inline double quad_form(const Mat2& conic, const Vec2& d) {
  return 0.5 * (d.x() * (conic(0, 0) * d.x() + conic(0, 1) * d.y()) +
                d.y() * (conic(1, 0) * d.x() + conic(1, 1) * d.y()));
}

}  // namespace

double tau(const Ellipse& ellipse, const Vec2& p) {
  if (!invertible(ellipse.covariance))
    throw Error(ErrorCode::SingularEllipse, "ellipse covariance is singular or ill-conditioned");
  return quad_form(conic_of(ellipse.covariance), p - ellipse.center);
}

Vec3 render_pixel(std::span<const Ellipse> splats, const Vec2& p, const RenderOptions& opts) {
  Vec3 out = Vec3::Zero();
  double transmittance = 1.0;
  for (std::size_t i = 0; i < splats.size(); ++i) {
    assert(i == 0 || splats[i - 1].depth <= splats[i].depth);
    const double alpha = splats[i].opacity * std::exp(-tau(splats[i], p));
    out += splats[i].color * (alpha * transmittance);
    transmittance *= 1.0 - alpha;
    if (transmittance < opts.min_transmittance) break;
  }
  return out.cwiseMax(0.0).cwiseMin(1.0);
}

Image render_image(const GaussianCloud& cloud, const Pose& pose, const CameraIntrinsics& k,
                   const RenderOptions& opts) {
  struct Splat {
    Ellipse ellipse;
    Mat2 conic;
    int x0, x1, y0, y1;  // inclusive pixel bounds
    std::size_t index;
  };

  std::vector<Splat> splats;
  splats.reserve(cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    auto ellipse = project_ellipsoid(cloud.ellipsoids[i], pose, k);
    if (!ellipse || !invertible(ellipse->covariance)) continue;
    const double radius = opts.cull_sigma * std::sqrt(symmetric_eigenvalues(ellipse->covariance).hi);
    const double fx0 = std::ceil(ellipse->center.x() - radius);
    const double fx1 = std::floor(ellipse->center.x() + radius);
    const double fy0 = std::ceil(ellipse->center.y() - radius);
    const double fy1 = std::floor(ellipse->center.y() + radius);
    if (fx1 < 0.0 || fy1 < 0.0 || fx0 > k.width - 1 || fy0 > k.height - 1) continue;
    Splat s{*ellipse, conic_of(ellipse->covariance),
            static_cast<int>(std::max(fx0, 0.0)), static_cast<int>(std::min<double>(fx1, k.width - 1)),
            static_cast<int>(std::max(fy0, 0.0)), static_cast<int>(std::min<double>(fy1, k.height - 1)),
            i};
    splats.push_back(s);
  }
  std::sort(splats.begin(), splats.end(), [](const Splat& a, const Splat& b) {
    return a.ellipse.depth != b.ellipse.depth ? a.ellipse.depth < b.ellipse.depth : a.index < b.index;
  });

  Image img(k.width, k.height);
  const double max_tau = 0.5 * opts.cull_sigma * opts.cull_sigma;
  constexpr int kBand = 16;
  const int bands = (k.height + kBand - 1) / kBand;

#pragma omp parallel for schedule(dynamic, 1)
  for (int band = 0; band < bands; ++band) {
    const int row0 = band * kBand;
    const int row1 = std::min(k.height, row0 + kBand) - 1;
    std::vector<double> trans(static_cast<std::size_t>(row1 - row0 + 1) * k.width, 1.0);
    for (const auto& s : splats) {
      const int y0 = std::max(s.y0, row0);
      const int y1 = std::min(s.y1, row1);
      for (int y = y0; y <= y1; ++y) {
        for (int x = s.x0; x <= s.x1; ++x) {
          double& t = trans[static_cast<std::size_t>(y - row0) * k.width + x];
          if (t < opts.min_transmittance) continue;
          const double q = quad_form(s.conic, Vec2(x, y) - s.ellipse.center);
          if (q > max_tau) continue;
          const double alpha = s.ellipse.opacity * std::exp(-q);
          const double w = alpha * t;
          for (int c = 0; c < 3; ++c) img.at(x, y, c) += s.ellipse.color[c] * w;
          t *= 1.0 - alpha;
        }
      }
    }
  }
  for (double& v : img.rgb) v = std::clamp(v, 0.0, 1.0);
  return img;
}

// ---------------------------------------------------------------------------
// Ray color

namespace {

struct Whitened {
  Mat3 to_unit;  // diag(1/s) R^T : world offsets -> unit-sphere frame
};

Whitened whiten(const Ellipsoid& e) {
  const Mat3 r = e.rotation.toRotationMatrix();
  return {e.scale.cwiseInverse().asDiagonal() * r.transpose()};
}

struct Hit {
  double t;
  double alpha;
  std::size_t index;
};

// Closest approach (in the ellipsoid's Mahalanobis metric) of the half-line to
// the ellipsoid center.
std::optional<Hit> ray_hit(const Ellipsoid& e, const Whitened& w, const Ray& ray, double cull_sigma,
                           std::size_t index) {
  const Vec3 o = w.to_unit * (ray.origin - e.center);
  const Vec3 d = w.to_unit * ray.direction;
  const double dd = d.squaredNorm();
  const double t = std::max(0.0, -o.dot(d) / dd);
  const double m2 = (o + t * d).squaredNorm();
  if (m2 > cull_sigma * cull_sigma) return std::nullopt;
  return Hit{t, e.opacity * std::exp(-0.5 * m2), index};
}

Vec3 composite_hits(std::vector<Hit>& hits, const GaussianCloud& cloud, const RenderOptions& opts) {
  std::sort(hits.begin(), hits.end(),
            [](const Hit& a, const Hit& b) { return a.t != b.t ? a.t < b.t : a.index < b.index; });
  Vec3 out = Vec3::Zero();
  double transmittance = 1.0;
  for (const auto& h : hits) {
    out += cloud.ellipsoids[h.index].color * (h.alpha * transmittance);
    transmittance *= 1.0 - h.alpha;
    if (transmittance < opts.min_transmittance) break;
  }
  return out.cwiseMax(0.0).cwiseMin(1.0);
}

}  // namespace

Vec3 ray_color(const GaussianCloud& cloud, const Ray& ray, const RenderOptions& opts) {
  std::vector<Hit> hits;
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    const auto& e = cloud.ellipsoids[i];
    if (auto h = ray_hit(e, whiten(e), ray, opts.cull_sigma, i)) hits.push_back(*h);
  }
  return composite_hits(hits, cloud, opts);
}

struct RayColorizer::Impl {
  struct Node {
    Eigen::AlignedBox3d box;
    int left = -1;  // children, or -1 for a leaf
    int right = -1;
    std::uint32_t first = 0;  // leaf range into order
    std::uint32_t count = 0;
  };

  const GaussianCloud& cloud;
  RenderOptions opts;
  std::vector<Whitened> whitened;
  std::vector<Eigen::AlignedBox3d> boxes;
  std::vector<std::uint32_t> order;
  std::vector<Node> nodes;

  Impl(const GaussianCloud& c, RenderOptions o) : cloud(c), opts(o) {
    whitened.reserve(c.size());
    boxes.reserve(c.size());
    for (const auto& e : c.ellipsoids) {
      whitened.push_back(whiten(e));
      const Vec3 half = opts.cull_sigma * covariance(e).diagonal().cwiseSqrt();
      // Padding keeps floating-point borderline hits on the conservative side.
      const Vec3 pad = Vec3::Constant(1e-9) + 1e-9 * half;
      boxes.emplace_back(e.center - half - pad, e.center + half + pad);
    }
    order.resize(c.size());
    std::iota(order.begin(), order.end(), 0u);
    if (!order.empty()) build(0, static_cast<std::uint32_t>(order.size()));
  }

  int build(std::uint32_t first, std::uint32_t last) {
    const int id = static_cast<int>(nodes.size());
    nodes.emplace_back();
    Eigen::AlignedBox3d box;
    Eigen::AlignedBox3d centroids;
    for (std::uint32_t i = first; i < last; ++i) {
      box.extend(boxes[order[i]]);
      centroids.extend(boxes[order[i]].center());
    }
    nodes[id].box = box;
    if (last - first <= 4) {
      nodes[id].first = first;
      nodes[id].count = last - first;
      return id;
    }
    int axis = 0;
    centroids.sizes().maxCoeff(&axis);
    const std::uint32_t mid = first + (last - first) / 2;
    std::nth_element(order.begin() + first, order.begin() + mid, order.begin() + last,
                     [&](std::uint32_t a, std::uint32_t b) {
                       const double ca = boxes[a].center()[axis];
                       const double cb = boxes[b].center()[axis];
                       return ca != cb ? ca < cb : a < b;
                     });
    const int left = build(first, mid);
    const int right = build(mid, last);
    nodes[id].left = left;
    nodes[id].right = right;
    return id;
  }

  static bool slab_hit(const Eigen::AlignedBox3d& box, const Vec3& origin, const Vec3& inv_dir) {
    double t0 = 0.0;
    double t1 = std::numeric_limits<double>::infinity();
    for (int a = 0; a < 3; ++a) {
      double ta = (box.min()[a] - origin[a]) * inv_dir[a];
      double tb = (box.max()[a] - origin[a]) * inv_dir[a];
      if (std::isnan(ta) || std::isnan(tb)) {
        // Direction component is zero and origin lies on a slab plane.
        if (origin[a] < box.min()[a] || origin[a] > box.max()[a]) return false;
        continue;
      }
      if (ta > tb) std::swap(ta, tb);
      t0 = std::max(t0, ta);
      t1 = std::min(t1, tb);
      if (t0 > t1) return false;
    }
    return true;
  }

  Vec3 color(const Ray& ray) const {
    std::vector<Hit> hits;
    if (nodes.empty()) return Vec3::Zero();
    const Vec3 inv_dir = ray.direction.cwiseInverse();
    std::vector<int> stack{0};
    while (!stack.empty()) {
      const Node& node = nodes[stack.back()];
      stack.pop_back();
      if (!slab_hit(node.box, ray.origin, inv_dir)) continue;
      if (node.left < 0) {
        for (std::uint32_t i = node.first; i < node.first + node.count; ++i) {
          const std::uint32_t idx = order[i];
          if (auto h = ray_hit(cloud.ellipsoids[idx], whitened[idx], ray, opts.cull_sigma, idx))
            hits.push_back(*h);
        }
      } else {
        stack.push_back(node.left);
        stack.push_back(node.right);
      }
    }
    return composite_hits(hits, cloud, opts);
  }
};

RayColorizer::RayColorizer(const GaussianCloud& cloud, RenderOptions opts)
    : impl_(std::make_unique<Impl>(cloud, opts)) {}
RayColorizer::~RayColorizer() = default;

Vec3 RayColorizer::operator()(const Ray& ray) const { return impl_->color(ray); }

}  // namespace sixdgs
