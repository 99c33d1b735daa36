#include <doctest.h>

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>

#include <json.hpp>

#include "sixdgs/ellicell.hpp"
#include "sixdgs/scorer.hpp"
#include "sixdgs/synth.hpp"

using namespace sixdgs;

namespace {

std::vector<Ray> random_rays(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::vector<Ray> rays(n);
  for (std::size_t j = 0; j < n; ++j) {
    rays[j].origin = 0.5 * Vec3(u(rng), u(rng), u(rng));
    rays[j].direction = Vec3(u(rng), u(rng), u(rng)).normalized();
    rays[j].color = Vec3(u(rng), u(rng), u(rng)).cwiseAbs();
    rays[j].source = static_cast<std::uint32_t>(j);
  }
  return rays;
}

FeatureMap random_features(int w, int h, int c, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FeatureMap f{w, h, c, 14 * w, 14 * h, {}};
  for (std::size_t i = 0; i < f.cells() * static_cast<std::size_t>(c); ++i) f.data.push_back(static_cast<float>(u(rng)));
  return f;
}

// Dense softmax over rays of K Q^T / sqrt(C), M x N.
RowMatrix dense_attention(const RowMatrix& k, const RowMatrix& q) {
  RowMatrix logits = k * q.transpose() / std::sqrt(static_cast<double>(k.cols()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i) {
    const double mx = logits.row(i).maxCoeff();
    double sum = 0.0;
    for (Eigen::Index j = 0; j < logits.cols(); ++j) sum += logits(i, j) = std::exp(logits(i, j) - mx);
    logits.row(i) /= sum;
  }
  return logits;
}

ScorerWeights perturbed(ScorerWeights w, double amount, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-amount, amount);
  for (auto t : w.tensors())
    for (double& x : t) x += u(rng);
  return w;
}

struct SmallScene {
  GaussianCloud cloud;
  std::vector<Ray> rays;
  std::vector<TrainView> views;
};

SmallScene small_scene(std::size_t ellipsoids, int views, int image_size, int stride) {
  SynthConfig cfg;
  cfg.ellipsoids = ellipsoids;
  cfg.views = views;
  cfg.image_size = image_size;
  cfg.feature_stride = stride;
  const auto s = make_synth_scene(cfg);
  SmallScene out{s.cloud, generate_rays(s.cloud, 100, estimate_normals(s.cloud, 8)), {}};
  for (const auto& f : s.cameras.frames)
    out.views.push_back({features_from_image(render_image(s.cloud, f.pose, s.cameras.intrinsics), stride), f.pose,
                         s.cameras.intrinsics});
  return out;
}

}  // namespace

TEST_CASE("positional encoding") {
  const std::vector<double> zero{0.0};
  CHECK(positional_encoding(zero, 2) == std::vector<double>{0, 0, 1, 0, 1});
  const std::vector<double> xs{0.3, -0.7, 2.0};
  CHECK(positional_encoding(xs, 0) == xs);
  const std::vector<double> half{0.5};
  const auto e = positional_encoding(half, 1);
  REQUIRE(e.size() == 3);
  CHECK(e[0] == 0.5);
  CHECK(e[1] == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(std::abs(e[2]) < 1e-15);
  CHECK(positional_encoding(xs, 6).size() == 3 * 13);

  ScorerWeights w;
  CHECK(w.input_dim() == 117);
  const auto rays = random_rays(3, 1);
  const RowMatrix enc = encode_rays(rays, 6);
  CHECK(enc.rows() == 3);
  CHECK(enc.cols() == 117);
  std::vector<double> raw{rays[1].origin.x(), rays[1].origin.y(), rays[1].origin.z(), rays[1].direction.x(),
                          rays[1].direction.y(), rays[1].direction.z(), rays[1].color.x(), rays[1].color.y(),
                          rays[1].color.z()};
  const auto want = positional_encoding(raw, 6);
  for (std::size_t i = 0; i < want.size(); ++i) CHECK(enc(1, static_cast<Eigen::Index>(i)) == want[i]);
}

TEST_CASE("weights initialization and validation") {
  const auto w = ScorerWeights::init(3, 16, 6, 5);
  REQUIRE(w.mlp.size() == 4);
  CHECK(w.mlp[0].weight.rows() == 117);
  CHECK(w.mlp[0].weight.cols() == 16);
  CHECK(w.mlp[3].weight.cols() == 3);
  CHECK(w.query.rows() == 3);
  CHECK(w.key.cols() == 3);
  CHECK(w.tensors().size() == w.tensor_names().size());
  CHECK_NOTHROW(w.validate());
  const auto same = ScorerWeights::init(3, 16, 6, 5);
  CHECK(weights_hash(w) == weights_hash(same));
  CHECK(weights_hash(w) != weights_hash(ScorerWeights::init(3, 16, 6, 6)));

  auto broken = w;
  broken.mlp[1].weight.resize(5, 16);
  CHECK_THROWS_AS(broken.validate(), Error);
  broken = w;
  broken.key(0, 0) = std::nan("");
  CHECK_THROWS_AS(broken.validate(), Error);
  CHECK_THROWS_AS(ScorerWeights::init(0, 16, 6, 1), Error);
}

TEST_CASE("featurize_rays") {
  const auto rays = random_rays(20, 2);
  const auto zero = ScorerWeights::zeros_like(ScorerWeights::init(3, 8, 2, 1));
  CHECK(featurize_rays(rays, zero).isZero(0.0));

  const auto w = perturbed(ScorerWeights::init(3, 8, 2, 1), 0.1, 3);
  const RowMatrix v = featurize_rays(rays, w);
  CHECK(v.rows() == 20);
  CHECK(v.cols() == 3);
  std::vector<std::size_t> perm(rays.size());
  std::iota(perm.begin(), perm.end(), std::size_t{0});
  std::shuffle(perm.begin(), perm.end(), std::mt19937_64(4));
  std::vector<Ray> shuffled;
  for (auto p : perm) shuffled.push_back(rays[p]);
  const RowMatrix vs = featurize_rays(shuffled, w);
  for (std::size_t i = 0; i < perm.size(); ++i)
    CHECK(vs.row(static_cast<Eigen::Index>(i)) == v.row(static_cast<Eigen::Index>(perm[i])));

  // A single-ray forward pass equals that row of the batch.
  const std::vector<Ray> one{rays[7]};
  CHECK((featurize_rays(one, w).row(0) - v.row(7)).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("attention scores") {
  const auto w = perturbed(ScorerWeights::init(3, 8, 2, 7), 0.2, 8);
  const auto f = random_features(4, 2, 3, 9);

  const auto one = random_rays(1, 10);
  const auto s1 = attention_scores(featurize_rays(one, w), f, w);
  REQUIRE(s1.size() == 1);
  CHECK(s1[0] == doctest::Approx(8.0).epsilon(1e-12));

  auto flat = w;
  flat.key.setZero();
  const auto five = random_rays(5, 11);
  const auto s5 = attention_scores(featurize_rays(five, flat), f, flat);
  for (std::size_t j = 0; j < 5; ++j) CHECK(s5[j] == doctest::Approx(8.0 / 5.0).epsilon(1e-12));

  // 8 pixels x 4 rays against a dense evaluation.
  const auto four = random_rays(4, 12);
  const RowMatrix k = project_keys(f, w);
  const RowMatrix q = project_queries(featurize_rays(four, w), w);
  const RowMatrix a = dense_attention(k, q);
  const AttentionMap att(k, q);
  for (Eigen::Index j = 0; j < 4; ++j) {
    CHECK(att.scores()[static_cast<std::size_t>(j)] == doctest::Approx(a.col(j).sum()).epsilon(1e-6));
    Eigen::Index best = 0;
    a.col(j).maxCoeff(&best);
    CHECK(att.best_pixel(static_cast<std::size_t>(j)) == static_cast<std::size_t>(best));
    for (Eigen::Index i = 0; i < 8; ++i)
      CHECK(att.weight(static_cast<std::size_t>(i), static_cast<std::size_t>(j)) == doctest::Approx(a(i, j)).epsilon(1e-9));
  }

  // Row stochasticity at a larger size, including large logits.
  auto hot = perturbed(w, 3.0, 13);
  const auto many = random_rays(300, 14);
  const auto fm = random_features(7, 5, 3, 15);
  const AttentionMap big(project_keys(fm, hot), project_queries(featurize_rays(many, hot), hot));
  double total = 0.0;
  for (double s : big.scores().values) total += s;
  CHECK(total == doctest::Approx(35.0).epsilon(1e-4 / 35.0));
  for (std::size_t i = 0; i < big.pixels(); ++i) {
    double row = 0.0;
    for (std::size_t j = 0; j < big.rays(); ++j) row += big.weight(i, j);
    CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
  }

  const auto f5 = random_features(2, 2, 5, 16);
  CHECK_THROWS_AS(attention_scores(featurize_rays(four, w), f5, w), Error);
}

TEST_CASE("target scores") {
  Ray through;
  through.origin = Vec3(0, 0, 0);
  through.direction = Vec3(1, 0, 0);
  Ray away;
  away.origin = Vec3(0, 0.3, 0);
  away.direction = Vec3(-1, 0, 0);
  Ray side;
  side.origin = Vec3(0, 0, 0.1);
  side.direction = Vec3(1, 0, 0);
  const Vec3 o(2, 0, 0);
  const double lambda = 0.1;
  const std::vector<Ray> rays{through, away, side};
  const auto s = gt_scores(rays, o, lambda, 100);
  const double d_away = 1.0 - std::tanh(Vec3(2, -0.3, 0).norm() / lambda);
  const double d_side = 1.0 - std::tanh(0.1 / lambda);
  const double total = 1.0 + d_away + d_side;
  CHECK(s[0] == doctest::Approx(100.0 / total).epsilon(1e-12));
  CHECK(s[1] == doctest::Approx(100.0 * d_away / total).epsilon(1e-9));
  CHECK(s[2] == doctest::Approx(100.0 * d_side / total).epsilon(1e-12));
  CHECK_FALSE(s.uniform_fallback);

  const auto rr = random_rays(500, 20);
  for (double lam : {0.01, 0.1, 1.0}) {
    const auto g = gt_scores(rr, Vec3(0.3, -0.2, 1.0), lam, 1024);
    CHECK(std::accumulate(g.values.begin(), g.values.end(), 0.0) == doctest::Approx(1024.0).epsilon(1e-12));
  }

  // Strictly decreasing in h, and rays within lambda beat rays beyond 5 lambda.
  std::vector<Ray> fan;
  for (int i = 0; i < 30; ++i) {
    Ray r;
    r.origin = Vec3(0, 0.02 * i, 0);
    r.direction = Vec3(1, 0, 0);
    fan.push_back(r);
  }
  const auto gf = gt_scores(fan, Vec3(1, 0, 0), 0.1, 64);
  for (std::size_t i = 1; i < fan.size(); ++i) CHECK(gf[i] < gf[i - 1]);
  for (std::size_t i = 0; i < fan.size(); ++i)
    for (std::size_t j = 0; j < fan.size(); ++j)
      if (0.02 * i < 0.1 && 0.02 * j > 0.5) CHECK(gf[i] > gf[j]);

  Ray far;
  far.origin = Vec3(1e6, 0, 0);
  far.direction = Vec3(1, 0, 0);
  const std::vector<Ray> fars{far, far};
  const auto fb = gt_scores(fars, Vec3::Zero(), 0.1, 10);
  CHECK(fb.uniform_fallback);
  CHECK(fb[0] == 5.0);
  CHECK_THROWS_AS(gt_scores(rays, o, 0.0, 10), Error);

  Pose p;
  p.center = o;
  const auto os = oracle_scorer(rays, p, lambda, 100);
  CHECK(os.values == s.values);
}

TEST_CASE("score loss") {
  ScoreVector a, b;
  a.values = {1, 2, 3, 4};
  CHECK(score_loss(a, a, 10) == 0.0);
  b.values = {2, 3, 4, 5};
  CHECK(score_loss(b, a, 10) == doctest::Approx(1.0 / 10.0));
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(0.0, 5.0);
  ScoreVector x, y;
  for (int i = 0; i < 77; ++i) {
    x.values.push_back(u(rng));
    y.values.push_back(u(rng));
  }
  double loop = 0.0;
  for (int i = 0; i < 77; ++i) loop += (x[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)]) * (x[static_cast<std::size_t>(i)] - y[static_cast<std::size_t>(i)]);
  CHECK(score_loss(x, y, 9) == doctest::Approx(loop / (9.0 * 77.0)).epsilon(1e-12));
  b.values.pop_back();
  CHECK_THROWS_AS(score_loss(a, b, 10), Error);
}

TEST_CASE("analytic gradient matches central differences") {
  // 5 rays, 4 pixels, every entry of every tensor.
  const auto rays = random_rays(5, 30);
  const auto f = random_features(2, 2, 3, 31);
  auto w = perturbed(ScorerWeights::init(3, 6, 2, 32), 0.3, 33);
  ScoreVector target;
  target.values = {0.2, 1.5, 0.1, 1.9, 0.3};
  ScorerWeights grad;
  loss_and_gradient(w, rays, f, target, &grad);

  const auto names = w.tensor_names();
  auto wt = w.tensors();
  const auto gt = std::as_const(grad).tensors();
  double scale = 0.0;
  for (const auto& t : gt)
    for (double g : t) scale = std::max(scale, std::abs(g));
  REQUIRE(scale > 0.0);
  for (std::size_t t = 0; t < wt.size(); ++t) {
    for (std::size_t i = 0; i < wt[t].size(); ++i) {
      const double orig = wt[t][i];
      const double h = 1e-4;
      wt[t][i] = orig + h;
      const double up = loss_and_gradient(w, rays, f, target, nullptr);
      wt[t][i] = orig - h;
      const double down = loss_and_gradient(w, rays, f, target, nullptr);
      wt[t][i] = orig;
      const double fd = (up - down) / (2 * h);
      CAPTURE(names[t]);
      CAPTURE(i);
      CHECK(std::abs(fd - gt[t][i]) <= 1e-3 * std::max(std::abs(fd), std::abs(gt[t][i])) + 1e-7 * scale);
    }
  }
}

TEST_CASE("AdamW first step") {
  auto w = ScorerWeights::init(3, 4, 1, 1);
  const auto start = w;
  auto g = ScorerWeights::zeros_like(w);
  for (auto t : g.tensors())
    for (std::size_t i = 0; i < t.size(); ++i) t[i] = (i % 2 ? 0.5 : -2.0);
  AdamW opt(w, 0.01, 0.1);
  opt.step(w, g);
  const auto a = std::as_const(w).tensors();
  const auto b = std::as_const(start).tensors();
  const auto gg = std::as_const(g).tensors();
  for (std::size_t t = 0; t < a.size(); ++t)
    for (std::size_t i = 0; i < a[t].size(); ++i) {
      const double sign = gg[t][i] > 0 ? 1.0 : -1.0;
      const double want = b[t][i] - 0.01 * (sign * std::abs(gg[t][i]) / (std::abs(gg[t][i]) + 1e-8) + 0.1 * b[t][i]);
      CHECK(a[t][i] == doctest::Approx(want).epsilon(1e-12));
    }
}

TEST_CASE("training contracts") {
  const auto scene = small_scene(60, 3, 56, 14);
  TrainConfig cfg;
  cfg.iterations = 20;
  cfg.width = 16;
  cfg.subsample = 30;
  cfg.seed = 4;

  SUBCASE("lr = 0 leaves the weights unchanged bitwise") {
    cfg.learning_rate = 0.0;
    const auto r = train_scorer(scene.cloud, scene.views, cfg, scene.rays);
    const auto init = ScorerWeights::init(3, cfg.width, cfg.pe_freqs, cfg.seed);
    const auto a = r.weights.tensors();
    const auto b = init.tensors();
    for (std::size_t t = 0; t < a.size(); ++t) CHECK(std::memcmp(a[t].data(), b[t].data(), a[t].size_bytes()) == 0);
    CHECK(r.loss_curve.size() == 20);
  }
  SUBCASE("fixed seed gives identical loss curves for any thread count") {
    omp_set_num_threads(1);
    const auto a = train_scorer(scene.cloud, scene.views, cfg, scene.rays);
    omp_set_num_threads(3);
    const auto b = train_scorer(scene.cloud, scene.views, cfg, scene.rays);
    omp_set_num_threads(omp_get_num_procs());
    CHECK(a.loss_curve == b.loss_curve);
    CHECK(weights_hash(a.weights) == weights_hash(b.weights));
    cfg.seed = 5;
    const auto c = train_scorer(scene.cloud, scene.views, cfg, scene.rays);
    CHECK(c.loss_curve != a.loss_curve);
  }
  SUBCASE("observer sees every iteration") {
    std::vector<int> seen;
    const auto r = train_scorer(scene.cloud, scene.views, cfg, scene.rays, [&](int it, double) { seen.push_back(it); });
    CHECK(seen.size() == 20);
    CHECK(seen.back() == 19);
  }
  SUBCASE("divergence reports the iteration") {
    cfg.learning_rate = 1e300;
    try {
      (void)train_scorer(scene.cloud, scene.views, cfg, scene.rays);
      FAIL("divergence not detected");
    } catch (const TrainingError& e) {
      CHECK(e.code() == ErrorCode::Training);
      CHECK(e.iteration() >= 0);
      CHECK(e.iteration() < 20);
    }
  }
  SUBCASE("preconditions") {
    std::vector<TrainView> one{scene.views.front()};
    CHECK_THROWS_AS(train_scorer(scene.cloud, one, cfg, scene.rays), Error);
    cfg.lambda = 0.0;
    CHECK_THROWS_AS(train_scorer(scene.cloud, scene.views, cfg, scene.rays), Error);
    cfg.lambda = 0.1;
    cfg.iterations = 0;
    CHECK_THROWS_AS(train_scorer(scene.cloud, scene.views, cfg, scene.rays), Error);
    auto mixed = scene.views;
    mixed[1].features = random_features(4, 4, 5, 1);
    cfg.iterations = 2;
    CHECK_THROWS_AS(train_scorer(scene.cloud, mixed, cfg, scene.rays), Error);
  }
}

TEST_CASE("training on a small synthetic scene lowers the windowed loss") {
  const auto scene = small_scene(200, 8, 112, 14);
  TrainConfig cfg;
  cfg.iterations = 300;
  cfg.width = 32;
  cfg.subsample = 200;
  cfg.seed = 1;
  const auto r = train_scorer(scene.cloud, scene.views, cfg, scene.rays);
  const auto window = [&](std::size_t begin) {
    return std::accumulate(r.loss_curve.begin() + static_cast<std::ptrdiff_t>(begin),
                           r.loss_curve.begin() + static_cast<std::ptrdiff_t>(begin + 50), 0.0) /
           50.0;
  };
  CHECK(window(250) < window(0));
}

TEST_CASE("a frozen tiny instance is fit to under 10% of its initial loss") {
  SynthConfig sc;
  sc.ellipsoids = 12;
  sc.views = 1;
  sc.image_size = 56;
  sc.feature_stride = 14;
  const auto s = make_synth_scene(sc);
  const auto rays = generate_rays(s.cloud, 20, estimate_normals(s.cloud, 4));
  const auto& frame = s.cameras.frames.front();
  const TrainView v{features_from_image(render_image(s.cloud, frame.pose, s.cameras.intrinsics), 14), frame.pose,
                    s.cameras.intrinsics};
  const std::vector<TrainView> views{v, v};
  TrainConfig cfg;
  cfg.iterations = 2000;
  cfg.width = 32;
  cfg.subsample = 12;  // every ellipsoid, every iteration
  const auto r = train_scorer(s.cloud, views, cfg, rays);
  CHECK(r.loss_curve.back() < 0.1 * r.loss_curve.front());
}

TEST_CASE("weights files") {
  const auto dir = std::filesystem::temp_directory_path() / "sixdgs_test_scorer";
  std::filesystem::create_directories(dir);
  const auto w = perturbed(ScorerWeights::init(3, 12, 3, 2), 0.01, 3);
  save_weights(dir / "w.bin", w, R"({"seed": 2, "note": "x"})");
  const auto back = load_weights(dir / "w.bin");
  CHECK(back.width == 12);
  CHECK(back.pe_freqs == 3);
  CHECK(back.channels == 3);
  const auto a = w.tensors();
  const auto b = back.tensors();
  REQUIRE(a.size() == b.size());
  for (std::size_t t = 0; t < a.size(); ++t) CHECK(std::memcmp(a[t].data(), b[t].data(), a[t].size_bytes()) == 0);
  CHECK(weights_hash(w) == weights_hash(back));

  std::ifstream mf(dir / "w.bin.json");
  const auto manifest = nlohmann::json::parse(mf);
  CHECK(manifest["width"] == 12);
  CHECK(manifest["run"]["seed"] == 2);

  CHECK_THROWS_AS(save_weights(dir / "bad.bin", w, "{not json"), Error);

  const auto full = std::filesystem::file_size(dir / "w.bin");
  std::filesystem::copy_file(dir / "w.bin", dir / "cut.bin", std::filesystem::copy_options::overwrite_existing);
  std::filesystem::resize_file(dir / "cut.bin", full - 8);
  CHECK_THROWS_AS(load_weights(dir / "cut.bin"), Error);
  {
    std::ofstream out(dir / "cut.bin", std::ios::binary | std::ios::app);
    out << std::string(16, 'x');
  }
  CHECK_THROWS_AS(load_weights(dir / "cut.bin"), Error);
  {
    std::ofstream out(dir / "junk.bin", std::ios::binary);
    out << "not weights at all";
  }
  CHECK_THROWS_AS(load_weights(dir / "junk.bin"), Error);
}
