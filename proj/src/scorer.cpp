#include "sixdgs/scorer.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <random>
#include <string>

#include "sixdgs/ellicell.hpp"
#include "sixdgs/simd/kernels.hpp"

namespace sixdgs {

namespace {

constexpr int kHidden = 3;
constexpr std::size_t kRayChunk = 128;
// Reductions are split into this many fixed slices and summed in slice order,
// so results do not depend on the number of threads.
constexpr std::size_t kSlices = 8;

struct Range {
  std::size_t begin, end;
};

Range slice(std::size_t n, std::size_t s) { return {n * s / kSlices, n * (s + 1) / kSlices}; }

// C += A * B
void gemm_acc(const RowMatrix& a, const RowMatrix& b, RowMatrix& c) {
  simd::active().gemm(static_cast<std::size_t>(a.rows()), static_cast<std::size_t>(b.cols()),
                      static_cast<std::size_t>(a.cols()), a.data(), static_cast<std::size_t>(a.cols()),
                      b.data(), static_cast<std::size_t>(b.cols()), c.data(),
                      static_cast<std::size_t>(c.cols()));
}

RowMatrix broadcast_rows(const Eigen::VectorXd& bias, Eigen::Index rows) {
  RowMatrix out(rows, bias.size());
  for (Eigen::Index r = 0; r < rows; ++r) out.row(r) = bias.transpose();
  return out;
}

struct MlpTrace {
  RowMatrix input;
  std::array<RowMatrix, kHidden> act;    // silu(z)
  std::array<RowMatrix, kHidden> slope;  // silu'(z)
};

RowMatrix mlp_forward(const ScorerWeights& w, RowMatrix input, MlpTrace* trace) {
  const auto& k = simd::active();
  RowMatrix cur = std::move(input);
  if (trace) trace->input = cur;
  for (int l = 0; l < kHidden; ++l) {
    RowMatrix z = broadcast_rows(w.mlp[l].bias, cur.rows());
    gemm_acc(cur, w.mlp[l].weight, z);
    RowMatrix y(z.rows(), z.cols());
    RowMatrix dy(z.rows(), z.cols());
    k.silu(z.data(), y.data(), dy.data(), static_cast<std::size_t>(z.size()));
    if (trace) {
      trace->act[l] = y;
      trace->slope[l] = std::move(dy);
    }
    cur = std::move(y);
  }
  RowMatrix out = broadcast_rows(w.mlp[kHidden].bias, cur.rows());
  gemm_acc(cur, w.mlp[kHidden].weight, out);
  return out;
}

// Accumulates the MLP part of the gradient for one chunk.
void mlp_backward(const ScorerWeights& w, const std::vector<RowMatrix>& weight_t, const MlpTrace& trace,
                  RowMatrix delta, ScorerWeights& grad) {
  for (int l = kHidden; l >= 0; --l) {
    const RowMatrix& below = l == 0 ? trace.input : trace.act[l - 1];
    const RowMatrix below_t = below.transpose();
    gemm_acc(below_t, delta, grad.mlp[l].weight);
    grad.mlp[l].bias += delta.colwise().sum().transpose();
    if (l == 0) break;
    RowMatrix up = RowMatrix::Zero(delta.rows(), w.mlp[l].weight.rows());
    gemm_acc(delta, weight_t[l], up);
    delta = up.cwiseProduct(trace.slope[l - 1]);
  }
}

void add_into(ScorerWeights& dst, const ScorerWeights& src) {
  auto d = dst.tensors();
  const auto s = src.tensors();
  for (std::size_t t = 0; t < d.size(); ++t)
    for (std::size_t i = 0; i < d[t].size(); ++i) d[t][i] += s[t][i];
}

RowMatrix feature_matrix(const FeatureMap& f) {
  RowMatrix m(static_cast<Eigen::Index>(f.cells()), f.channels);
  for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = f.data[static_cast<std::size_t>(i)];
  return m;
}

void check_channels(const FeatureMap& f, const ScorerWeights& w) {
  if (f.channels != w.channels)
    throw Error(ErrorCode::Config, "feature channels (" + std::to_string(f.channels) +
                                       ") do not match scorer channels (" + std::to_string(w.channels) + ")");
}

}  // namespace

// ---------------------------------------------------------------- weights

ScorerWeights ScorerWeights::init(int channels, int width, int pe_freqs, std::uint64_t seed) {
  if (channels <= 0 || width <= 0 || pe_freqs < 0)
    throw Error(ErrorCode::Config, "scorer dimensions must be positive");
  ScorerWeights w;
  w.channels = channels;
  w.width = width;
  w.pe_freqs = pe_freqs;
  std::mt19937_64 rng(seed);
  const auto glorot = [&rng](int in, int out) {
    const double limit = std::sqrt(6.0 / (in + out));
    std::uniform_real_distribution<double> u(-limit, limit);
    RowMatrix m(in, out);
    for (Eigen::Index i = 0; i < m.size(); ++i) m.data()[i] = u(rng);
    return m;
  };
  const int dims[] = {w.input_dim(), width, width, width, channels};
  for (int l = 0; l <= kHidden; ++l)
    w.mlp.push_back({glorot(dims[l], dims[l + 1]), Eigen::VectorXd::Zero(dims[l + 1])});
  w.query = glorot(channels, channels);
  w.key = glorot(channels, channels);
  return w;
}

ScorerWeights ScorerWeights::zeros_like(const ScorerWeights& like) {
  ScorerWeights w = like;
  for (auto t : w.tensors()) std::fill(t.begin(), t.end(), 0.0);
  return w;
}

std::vector<std::span<double>> ScorerWeights::tensors() {
  std::vector<std::span<double>> out;
  for (auto& layer : mlp) {
    out.emplace_back(layer.weight.data(), static_cast<std::size_t>(layer.weight.size()));
    out.emplace_back(layer.bias.data(), static_cast<std::size_t>(layer.bias.size()));
  }
  out.emplace_back(query.data(), static_cast<std::size_t>(query.size()));
  out.emplace_back(key.data(), static_cast<std::size_t>(key.size()));
  return out;
}

std::vector<std::span<const double>> ScorerWeights::tensors() const {
  std::vector<std::span<const double>> out;
  for (auto t : const_cast<ScorerWeights*>(this)->tensors()) out.emplace_back(t.data(), t.size());
  return out;
}

std::vector<std::string> ScorerWeights::tensor_names() const {
  std::vector<std::string> names;
  for (std::size_t l = 0; l < mlp.size(); ++l) {
    names.push_back("mlp." + std::to_string(l) + ".weight");
    names.push_back("mlp." + std::to_string(l) + ".bias");
  }
  names.emplace_back("query");
  names.emplace_back("key");
  return names;
}

void ScorerWeights::validate() const {
  if (channels <= 0 || width <= 0 || pe_freqs < 0)
    throw Error(ErrorCode::Config, "scorer dimensions must be positive");
  if (mlp.size() != kHidden + 1)
    throw Error(ErrorCode::Config, "scorer MLP must have " + std::to_string(kHidden + 1) + " layers");
  Eigen::Index in = input_dim();
  for (std::size_t l = 0; l < mlp.size(); ++l) {
    const Eigen::Index out = l + 1 == mlp.size() ? channels : width;
    if (mlp[l].weight.rows() != in || mlp[l].weight.cols() != out || mlp[l].bias.size() != out)
      throw Error(ErrorCode::Config, "scorer layer " + std::to_string(l) + " has shape " +
                                         std::to_string(mlp[l].weight.rows()) + "x" +
                                         std::to_string(mlp[l].weight.cols()) + ", expected " +
                                         std::to_string(in) + "x" + std::to_string(out));
    in = out;
  }
  if (query.rows() != channels || query.cols() != channels || key.rows() != channels ||
      key.cols() != channels)
    throw Error(ErrorCode::Config, "query/key projections must be CxC");
  for (auto t : tensors())
    for (double v : t)
      if (!std::isfinite(v)) throw Error(ErrorCode::Config, "scorer weights contain non-finite values");
}

// ---------------------------------------------------------------- features

std::vector<double> positional_encoding(std::span<const double> x, int pe_freqs) {
  std::vector<double> out(x.begin(), x.end());
  out.reserve(x.size() * (1 + 2 * static_cast<std::size_t>(pe_freqs)));
  for (double v : x) {
    double freq = std::numbers::pi;
    for (int k = 0; k < pe_freqs; ++k, freq *= 2.0) {
      out.push_back(std::sin(freq * v));
      out.push_back(std::cos(freq * v));
    }
  }
  return out;
}

RowMatrix encode_rays(std::span<const Ray> rays, int pe_freqs) {
  const Eigen::Index dim = 9 * (1 + 2 * pe_freqs);
  RowMatrix m(static_cast<Eigen::Index>(rays.size()), dim);
  for (std::size_t r = 0; r < rays.size(); ++r) {
    const double raw[9] = {rays[r].origin.x(),    rays[r].origin.y(),    rays[r].origin.z(),
                           rays[r].direction.x(), rays[r].direction.y(), rays[r].direction.z(),
                           rays[r].color.x(),     rays[r].color.y(),     rays[r].color.z()};
    const auto enc = positional_encoding(raw, pe_freqs);
    std::copy(enc.begin(), enc.end(), m.row(static_cast<Eigen::Index>(r)).data());
  }
  return m;
}

RowMatrix featurize_rays(std::span<const Ray> rays, const ScorerWeights& w) {
  w.validate();
  RowMatrix out(static_cast<Eigen::Index>(rays.size()), w.channels);
  const std::size_t chunks = (rays.size() + kRayChunk - 1) / kRayChunk;
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t c = 0; c < chunks; ++c) {
    const std::size_t b = c * kRayChunk;
    const std::size_t n = std::min(kRayChunk, rays.size() - b);
    const RowMatrix v = mlp_forward(w, encode_rays(rays.subspan(b, n), w.pe_freqs), nullptr);
    out.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(n)) = v;
  }
  return out;
}

RowMatrix project_queries(const RowMatrix& features, const ScorerWeights& w) {
  if (features.cols() != w.channels) throw Error(ErrorCode::Config, "ray features do not have C columns");
  RowMatrix q = RowMatrix::Zero(features.rows(), w.channels);
  gemm_acc(features, w.query, q);
  return q;
}

RowMatrix project_keys(const FeatureMap& f, const ScorerWeights& w) {
  check_channels(f, w);
  RowMatrix k = RowMatrix::Zero(static_cast<Eigen::Index>(f.cells()), w.channels);
  gemm_acc(feature_matrix(f), w.key, k);
  return k;
}

// ---------------------------------------------------------------- attention

AttentionMap::AttentionMap(RowMatrix keys, const RowMatrix& queries)
    : keys_(std::move(keys)), queries_t_(queries.transpose()) {
  if (keys_.cols() != queries.cols()) throw Error(ErrorCode::Config, "key and query widths differ");
  if (queries.rows() == 0) throw Error(ErrorCode::Config, "attention needs at least one ray");
  keys_ /= std::sqrt(static_cast<double>(keys_.cols()));
  const std::size_t m = pixels(), n = rays();
  log_norm_.assign(m, 0.0);
  std::vector<std::vector<double>> partial(kSlices);
  const auto& k = simd::active();
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t s = 0; s < kSlices; ++s) {
    const Range r = slice(m, s);
    std::vector<double>& acc = partial[s];
    acc.assign(n, 0.0);
    std::vector<double> row(n);
    for (std::size_t i = r.begin; i < r.end; ++i) {
      logits_row(i, row.data());
      const double mx = k.max(row.data(), n);
      const double z = k.exp_shift_sum(row.data(), n, mx);
      log_norm_[i] = mx + std::log(z);
      k.axpy(1.0 / z, row.data(), acc.data(), n);
    }
  }
  scores_.values.assign(n, 0.0);
  for (const auto& p : partial)
    for (std::size_t j = 0; j < n; ++j) scores_.values[j] += p[j];
}

void AttentionMap::logits_row(std::size_t pixel, double* row) const {
  const auto& k = simd::active();
  const std::size_t n = rays();
  std::fill(row, row + n, 0.0);
  for (Eigen::Index c = 0; c < keys_.cols(); ++c)
    k.axpy(keys_(static_cast<Eigen::Index>(pixel), c), queries_t_.row(c).data(), row, n);
}

double AttentionMap::weight(std::size_t pixel, std::size_t ray) const {
  double logit = 0.0;
  for (Eigen::Index c = 0; c < keys_.cols(); ++c)
    logit += keys_(static_cast<Eigen::Index>(pixel), c) * queries_t_(c, static_cast<Eigen::Index>(ray));
  return std::exp(logit - log_norm_[pixel]);
}

std::size_t AttentionMap::best_pixel(std::size_t ray) const {
  std::size_t best = 0;
  double best_value = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < pixels(); ++i) {
    double logit = 0.0;
    for (Eigen::Index c = 0; c < keys_.cols(); ++c)
      logit += keys_(static_cast<Eigen::Index>(i), c) * queries_t_(c, static_cast<Eigen::Index>(ray));
    const double v = logit - log_norm_[i];
    if (v > best_value) {
      best_value = v;
      best = i;
    }
  }
  return best;
}

std::vector<std::size_t> AttentionMap::best_pixels(std::span<const std::size_t> rays) const {
  std::vector<std::size_t> out(rays.size());
#pragma omp parallel for schedule(static)
  for (std::size_t r = 0; r < rays.size(); ++r) out[r] = best_pixel(rays[r]);
  return out;
}

void AttentionMap::backward(std::span<const double> grad_scores, RowMatrix& grad_keys,
                            RowMatrix& grad_queries) const {
  const std::size_t m = pixels(), n = rays();
  const Eigen::Index ch = keys_.cols();
  if (grad_scores.size() != n) throw Error(ErrorCode::Config, "score gradient length mismatch");
  const double inv_sqrt = 1.0 / std::sqrt(static_cast<double>(ch));
  grad_keys = RowMatrix::Zero(static_cast<Eigen::Index>(m), ch);
  std::vector<RowMatrix> partial(kSlices);
  const auto& k = simd::active();
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t s = 0; s < kSlices; ++s) {
    const Range r = slice(m, s);
    RowMatrix& dqt = partial[s];
    dqt = RowMatrix::Zero(ch, static_cast<Eigen::Index>(n));
    std::vector<double> row(n), dlogit(n);
    for (std::size_t i = r.begin; i < r.end; ++i) {
      logits_row(i, row.data());
      k.exp_shift_sum(row.data(), n, log_norm_[i]);
      const double g_mean = k.dot(row.data(), grad_scores.data(), n);
      k.scaled_residual(row.data(), grad_scores.data(), g_mean, dlogit.data(), n);
      for (Eigen::Index c = 0; c < ch; ++c) {
        grad_keys(static_cast<Eigen::Index>(i), c) = k.dot(dlogit.data(), queries_t_.row(c).data(), n) * inv_sqrt;
        k.axpy(keys_(static_cast<Eigen::Index>(i), c), dlogit.data(), dqt.row(c).data(), n);
      }
    }
  }
  RowMatrix dqt = RowMatrix::Zero(ch, static_cast<Eigen::Index>(n));
  for (const auto& p : partial) dqt += p;
  grad_queries = dqt.transpose();
}

ScoreVector attention_scores(const RowMatrix& features, const FeatureMap& f, const ScorerWeights& w) {
  return AttentionMap(project_keys(f, w), project_queries(features, w)).scores();
}

// ---------------------------------------------------------------- targets

ScoreVector gt_scores(std::span<const Ray> rays, const Vec3& camera_center, double lambda,
                      std::size_t pixels) {
  if (!(lambda > 0.0)) throw Error(ErrorCode::Domain, "lambda must be positive");
  ScoreVector s;
  s.values.resize(rays.size());
  double total = 0.0;
  for (std::size_t j = 0; j < rays.size(); ++j) {
    const Ray& r = rays[j];
    const double l = std::max((camera_center - r.origin).dot(r.direction), 0.0);
    const double h = (r.origin + l * r.direction - camera_center).norm();
    // 1 - tanh(x) without cancellation
    const double delta = 2.0 / (1.0 + std::exp(2.0 * h / lambda));
    s.values[j] = delta;
    total += delta;
  }
  const double m = static_cast<double>(pixels);
  if (!(total > 0.0)) {
    s.uniform_fallback = true;
    std::fill(s.values.begin(), s.values.end(), m / static_cast<double>(rays.size()));
    return s;
  }
  for (double& v : s.values) v *= m / total;
  return s;
}

ScoreVector oracle_scorer(std::span<const Ray> rays, const Pose& gt_pose, double lambda, std::size_t pixels) {
  return gt_scores(rays, gt_pose.center, lambda, pixels);
}

double score_loss(const ScoreVector& pred, const ScoreVector& gt, std::size_t pixels) {
  if (pred.size() != gt.size()) throw Error(ErrorCode::Config, "score vectors differ in length");
  if (pred.size() == 0 || pixels == 0) return 0.0;
  double sum = 0.0;
  for (std::size_t j = 0; j < pred.size(); ++j) {
    const double d = pred[j] - gt[j];
    sum += d * d;
  }
  return sum / (static_cast<double>(pixels) * static_cast<double>(pred.size()));
}

// ---------------------------------------------------------------- training

double loss_and_gradient(const ScorerWeights& w, std::span<const Ray> rays, const FeatureMap& f,
                         const ScoreVector& target, ScorerWeights* grad) {
  check_channels(f, w);
  const RowMatrix v = featurize_rays(rays, w);
  const RowMatrix fm = feature_matrix(f);
  RowMatrix keys = RowMatrix::Zero(fm.rows(), w.channels);
  gemm_acc(fm, w.key, keys);
  const RowMatrix queries = project_queries(v, w);
  const AttentionMap att(keys, queries);
  const std::size_t m = f.cells(), n = rays.size();
  const double loss = score_loss(att.scores(), target, m);
  if (!grad) return loss;

  *grad = ScorerWeights::zeros_like(w);
  std::vector<double> g(n);
  const double scale = 2.0 / (static_cast<double>(m) * static_cast<double>(n));
  for (std::size_t j = 0; j < n; ++j) g[j] = scale * (att.scores()[j] - target[j]);

  RowMatrix d_keys, d_queries;
  att.backward(g, d_keys, d_queries);
  const RowMatrix fm_t = fm.transpose();
  gemm_acc(fm_t, d_keys, grad->key);
  const RowMatrix v_t = v.transpose();
  gemm_acc(v_t, d_queries, grad->query);
  RowMatrix d_v = RowMatrix::Zero(static_cast<Eigen::Index>(n), w.channels);
  const RowMatrix query_t = w.query.transpose();
  gemm_acc(d_queries, query_t, d_v);

  std::vector<RowMatrix> weight_t;
  for (const auto& layer : w.mlp) weight_t.emplace_back(layer.weight.transpose());
  const std::size_t chunks = (n + kRayChunk - 1) / kRayChunk;
  std::vector<ScorerWeights> partial(kSlices);
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t s = 0; s < kSlices; ++s) {
    partial[s] = ScorerWeights::zeros_like(w);
    const Range r = slice(chunks, s);
    for (std::size_t c = r.begin; c < r.end; ++c) {
      const std::size_t b = c * kRayChunk;
      const std::size_t len = std::min(kRayChunk, n - b);
      MlpTrace trace;
      mlp_forward(w, encode_rays(rays.subspan(b, len), w.pe_freqs), &trace);
      mlp_backward(w, weight_t, trace,
                   d_v.middleRows(static_cast<Eigen::Index>(b), static_cast<Eigen::Index>(len)), partial[s]);
    }
  }
  for (const auto& p : partial) add_into(*grad, p);
  return loss;
}

void TrainConfig::validate() const {
  if (iterations <= 0 || subsample <= 0 || width <= 0 || pe_freqs < 0)
    throw Error(ErrorCode::Config, "iterations, subsample and width must be positive");
  if (!(learning_rate >= 0.0) || !(weight_decay >= 0.0))
    throw Error(ErrorCode::Config, "learning rate and weight decay must be non-negative");
  if (!(lambda > 0.0)) throw Error(ErrorCode::Config, "lambda must be positive");
  if (cells < 4) throw Error(ErrorCode::Config, "G must be at least 4");
  if (normal_neighbors < 3) throw Error(ErrorCode::Config, "normal estimation needs k >= 3");
}

AdamW::AdamW(const ScorerWeights& like, double learning_rate, double weight_decay, double beta1, double beta2,
             double epsilon)
    : lr_(learning_rate),
      wd_(weight_decay),
      beta1_(beta1),
      beta2_(beta2),
      eps_(epsilon),
      m_(ScorerWeights::zeros_like(like)),
      v_(ScorerWeights::zeros_like(like)) {}

void AdamW::step(ScorerWeights& w, const ScorerWeights& grad) {
  ++step_;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(step_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(step_));
  auto wt = w.tensors();
  const auto gt = grad.tensors();
  auto mt = m_.tensors();
  auto vt = v_.tensors();
  for (std::size_t t = 0; t < wt.size(); ++t) {
    for (std::size_t i = 0; i < wt[t].size(); ++i) {
      const double g = gt[t][i];
      mt[t][i] = beta1_ * mt[t][i] + (1.0 - beta1_) * g;
      vt[t][i] = beta2_ * vt[t][i] + (1.0 - beta2_) * g * g;
      const double update = (mt[t][i] / c1) / (std::sqrt(vt[t][i] / c2) + eps_) + wd_ * wt[t][i];
      wt[t][i] -= lr_ * update;
    }
  }
}

TrainResult train_scorer(const GaussianCloud& cloud, std::span<const TrainView> views, const TrainConfig& cfg,
                         std::span<const Ray> rays, const TrainObserver& observer) {
  cfg.validate();
  if (cloud.size() == 0) throw Error(ErrorCode::EmptyModel, "cannot train on an empty model");
  if (views.size() < 2) throw Error(ErrorCode::Config, "training needs at least two views");
  const int channels = views.front().features.channels;
  for (const auto& v : views) {
    v.features.validate();
    if (v.features.channels != channels)
      throw Error(ErrorCode::Config, "training views disagree on feature channels");
  }

  std::vector<Ray> generated;
  if (rays.empty()) {
    generated = generate_rays(cloud, cfg.cells, estimate_normals(cloud, cfg.normal_neighbors));
    rays = generated;
  }
  // Rays are grouped by source ellipsoid; first[e]..first[e+1] spans ellipsoid e.
  std::vector<std::size_t> first(cloud.size() + 1, 0);
  for (const Ray& r : rays) {
    if (r.source >= cloud.size()) throw Error(ErrorCode::Config, "ray source outside the model");
    ++first[r.source + 1];
  }
  for (std::size_t e = 0; e < cloud.size(); ++e) first[e + 1] += first[e];
  std::vector<std::size_t> order(rays.size());
  {
    std::vector<std::size_t> cursor(first.begin(), first.end() - 1);
    for (std::size_t j = 0; j < rays.size(); ++j) order[cursor[rays[j].source]++] = j;
  }

  TrainResult result;
  result.weights = ScorerWeights::init(channels, cfg.width, cfg.pe_freqs, cfg.seed);
  AdamW opt(result.weights, cfg.learning_rate, cfg.weight_decay);
  ScorerWeights grad;
  std::mt19937_64 rng(cfg.seed ^ 0x9e3779b97f4a7c15ull);
  const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(cfg.subsample), cloud.size());
  std::vector<std::size_t> pool(cloud.size());
  std::vector<Ray> batch;

  for (int it = 0; it < cfg.iterations; ++it) {
    const std::size_t vi = std::uniform_int_distribution<std::size_t>(0, views.size() - 1)(rng);
    std::iota(pool.begin(), pool.end(), std::size_t{0});
    for (std::size_t i = 0; i < take; ++i) {
      const std::size_t pick = std::uniform_int_distribution<std::size_t>(i, pool.size() - 1)(rng);
      std::swap(pool[i], pool[pick]);
    }
    std::sort(pool.begin(), pool.begin() + static_cast<std::ptrdiff_t>(take));
    batch.clear();
    for (std::size_t i = 0; i < take; ++i)
      for (std::size_t p = first[pool[i]]; p < first[pool[i] + 1]; ++p) batch.push_back(rays[order[p]]);
    if (batch.empty()) throw Error(ErrorCode::Config, "sampled ellipsoids produced no rays");

    const TrainView& view = views[vi];
    const ScoreVector target = gt_scores(batch, view.pose.center, cfg.lambda, view.features.cells());
    const double loss = loss_and_gradient(result.weights, batch, view.features, target, &grad);
    bool finite = std::isfinite(loss);
    for (auto t : std::as_const(grad).tensors())
      for (double g : t) finite = finite && std::isfinite(g);
    if (!finite) throw TrainingError("training loss diverged at iteration " + std::to_string(it), it);
    opt.step(result.weights, grad);
    result.loss_curve.push_back(loss);
    if (observer) observer(it, loss);
  }
  return result;
}

}  // namespace sixdgs
