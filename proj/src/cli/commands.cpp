#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <omp.h>

#include <json.hpp>

#include "../binary_io.hpp"
#include "plots.hpp"
#include "sixdgs/cli.hpp"
#include "sixdgs/image_io.hpp"
#include "sixdgs/pipeline.hpp"
#include "sixdgs/ply.hpp"
#include "sixdgs/ray_io.hpp"
#include "sixdgs/scene_io.hpp"
#include "sixdgs/simd/kernels.hpp"
#include "sixdgs/synth.hpp"

namespace sixdgs::cli {

namespace {

using nlohmann::json;
using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

std::string hex(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << v;
  return s.str();
}

std::uint64_t file_hash(const std::filesystem::path& p) {
  const std::vector<char> bytes = detail::read_file(p);
  return detail::fnv1a(bytes.data(), bytes.size());
}

void require_path(const std::filesystem::path& p, const char* flag) {
  if (p.empty()) throw Error(ErrorCode::Config, std::string(flag) + " is required");
  if (!std::filesystem::exists(p)) throw Error(ErrorCode::Io, std::string(flag) + ": " + p.string() + " does not exist");
}

void require_out(const std::filesystem::path& p) {
  if (p.empty()) throw Error(ErrorCode::Config, "--out is required");
}

// Every setting, then only those the command reads.
json knobs(const RunConfig& c) {
  const json all = {{"model", c.model.string()},
                    {"features", c.features.string()},
                    {"transforms", c.transforms.string()},
                    {"weights", c.weights.string()},
                    {"out", c.out.string()},
                    {"view", c.view},
                    {"split", c.split},
                    {"oracle", c.oracle},
                    {"g_cells", c.g_cells},
                    {"neighbors", c.neighbors},
                    {"n_top", c.n_top},
                    {"lambda", c.lambda},
                    {"mlp_width", c.mlp_width},
                    {"iters", c.iters},
                    {"subsample", c.subsample},
                    {"learning_rate", c.learning_rate},
                    {"weight_decay", c.weight_decay},
                    {"seed", c.seed},
                    {"count", c.count},
                    {"layout", c.layout},
                    {"views", c.views},
                    {"test_every", c.test_every},
                    {"image_size", c.image_size},
                    {"stride", c.stride},
                    {"distance", c.distance},
                    {"fov", c.fov}};
  static const std::map<std::string, std::vector<std::string>> used = {
      {"synth", {"out", "count", "layout", "views", "test_every", "image_size", "stride", "distance", "fov", "seed"}},
      {"rays", {"model", "out", "g_cells", "neighbors"}},
      {"train",
       {"model", "transforms", "features", "out", "g_cells", "neighbors", "lambda", "mlp_width", "iters", "subsample",
        "learning_rate", "weight_decay", "seed"}},
      {"estimate",
       {"model", "transforms", "features", "weights", "out", "view", "oracle", "g_cells", "neighbors", "n_top",
        "lambda"}},
      {"eval",
       {"model", "transforms", "features", "weights", "out", "split", "oracle", "g_cells", "neighbors", "n_top",
        "lambda", "seed"}},
      {"render", {"model", "transforms", "view", "out"}}};
  json echo = {{"command", c.command}, {"threads", omp_get_max_threads()}, {"simd", simd::active().name}};
  if (const auto it = used.find(c.command); it != used.end())
    for (const auto& key : it->second) echo[key] = all[key];
  return echo;
}

// Knobs plus fingerprints of every input file that exists.
json config_echo(const RunConfig& c) {
  json echo = knobs(c);
  json inputs = json::object();
  for (const auto& [name, p] : {std::pair{"model", c.model}, std::pair{"transforms", c.transforms},
                                std::pair{"weights", c.weights}, std::pair{"pose", c.pose}})
    if (!p.empty() && std::filesystem::is_regular_file(p)) inputs[name] = hex(file_hash(p));
  if (!c.features.empty() && std::filesystem::is_regular_file(c.features))
    inputs["features"] = hex(file_hash(c.features));
  echo["inputs"] = inputs;
  return echo;
}

void write_json(const std::filesystem::path& p, const json& j) {
  std::ofstream out(p);
  if (!out) throw Error(ErrorCode::Io, "cannot write " + p.string());
  out << j.dump(2) << '\n';
}

struct Model {
  GaussianCloud cloud;  // normalized
  std::uint64_t hash = 0;
};

Model load_model(const RunConfig& c) {
  require_path(c.model, "--model");
  return {normalize_scene(load_ply(c.model)), file_hash(c.model)};
}

CameraSet load_cameras(const RunConfig& c) {
  require_path(c.transforms, "--transforms");
  return load_transforms(c.transforms);
}

const CameraFrame& find_view(const CameraSet& set, const std::string& id) {
  for (const auto& f : set.frames)
    if (f.id == id) return f;
  throw Error(ErrorCode::Config, "view '" + id + "' not found in the transforms file");
}

std::filesystem::path features_path(const RunConfig& c, const CameraSet& set, const CameraFrame& f) {
  if (!c.features.empty() && std::filesystem::is_directory(c.features)) return c.features / (f.id + ".6dfeat");
  if (f.features.empty()) throw Error(ErrorCode::Config, "view '" + f.id + "' has no features path");
  return set.resolve(f.features);
}

void check_grid(const FeatureMap& f, const CameraIntrinsics& k, const std::string& what) {
  if (f.image_width != k.width || f.image_height != k.height)
    throw Error(ErrorCode::Config, what + ": features were extracted from a " + std::to_string(f.image_width) + "x" +
                                       std::to_string(f.image_height) + " image, cameras are " +
                                       std::to_string(k.width) + "x" + std::to_string(k.height));
}

Pose to_source_frame(const Pose& p, const GaussianCloud& cloud) {
  return {p.rotation, p.center * cloud.scene_scale + cloud.scene_offset};
}

std::filesystem::path bank_path(const std::filesystem::path& weights) { return weights.string() + ".bank"; }

// Cached bank when it matches the model, weights and G; rebuilt otherwise.
QueryBank obtain_bank(const RunConfig& c, const Model& m, const ScorerWeights& w) {
  const auto path = bank_path(c.weights);
  if (std::filesystem::exists(path)) {
    QueryBank bank = load_query_bank(path);
    if (bank.model_hash == m.hash && bank.weights_hash == weights_hash(w) && bank.cells == c.g_cells &&
        bank.queries.cols() == w.channels)
      return bank;
    std::cerr << "query bank " << path << " does not match the inputs; recomputing\n";
  }
  return build_query_bank(scene_rays(m.cloud, c.g_cells, c.neighbors), w, m.hash, c.g_cells);
}

// ------------------------------------------------------------------ synth

void cmd_synth(const RunConfig& c) {
  require_out(c.out);
  SynthConfig s;
  s.ellipsoids = c.count;
  s.layout = parse_layout(c.layout);
  s.views = c.views;
  s.test_every = c.test_every;
  s.image_size = c.image_size;
  s.feature_stride = c.stride;
  s.camera_distance = c.distance;
  s.fov_degrees = c.fov;
  s.seed = c.seed;
  const SynthScene scene = write_synth(c.out, s);
  write_json(c.out / "run.json", config_echo(c));
  std::cout << "wrote " << scene.cloud.size() << " ellipsoids and " << scene.cameras.frames.size() << " views to "
            << c.out.string() << '\n';
}

// ------------------------------------------------------------------ rays

void cmd_rays(const RunConfig& c) {
  require_out(c.out);
  const Model m = load_model(c);
  const std::vector<Ray> rays = scene_rays(m.cloud, c.g_cells, c.neighbors);
  write_rays(c.out, rays);
  if (!c.csv.empty()) write_rays_csv(c.csv, rays);
  write_json(c.out.string() + ".run.json", config_echo(c));
  std::cout << "wrote " << rays.size() << " rays (" << static_cast<double>(rays.size()) / m.cloud.size()
            << " per ellipsoid) to " << c.out.string() << '\n';
}

// ------------------------------------------------------------------ train

void cmd_train(const RunConfig& c) {
  require_out(c.out);
  const Model m = load_model(c);
  const CameraSet set = load_cameras(c);
  std::vector<TrainView> views;
  for (const CameraFrame* f : set.split("train")) {
    TrainView v{load_features(features_path(c, set, *f)), normalize_pose(f->pose, m.cloud), set.intrinsics};
    check_grid(v.features, set.intrinsics, f->id);
    views.push_back(std::move(v));
  }
  if (views.empty()) throw Error(ErrorCode::Config, "no views in the train split");

  TrainConfig t;
  t.iterations = c.iters;
  t.subsample = c.subsample;
  t.weight_decay = c.weight_decay;
  t.learning_rate = c.learning_rate;
  t.lambda = c.lambda;
  t.seed = c.seed;
  t.width = c.mlp_width;
  t.cells = c.g_cells;
  t.normal_neighbors = c.neighbors;

  const auto t0 = Clock::now();
  std::vector<Ray> rays = scene_rays(m.cloud, c.g_cells, c.neighbors);
  std::cerr << "training on " << views.size() << " views, " << rays.size() << " rays\n";
  const TrainResult result = train_scorer(m.cloud, views, t, rays, [&](int it, double loss) {
    if (it % 50 == 0 || it + 1 == t.iterations)
      std::cerr << "iter " << it << " loss " << loss << " (" << seconds_since(t0) << " s)\n";
  });

  json echo = config_echo(c);
  echo["train_seconds"] = seconds_since(t0);
  save_weights(c.out, result.weights, echo.dump());
  {
    std::ofstream csv(c.out.string() + ".loss.csv");
    if (!csv) throw Error(ErrorCode::Io, "cannot write loss curve next to " + c.out.string());
    csv << "iteration,loss\n";
    csv.precision(12);
    for (std::size_t i = 0; i < result.loss_curve.size(); ++i) csv << i << ',' << result.loss_curve[i] << '\n';
  }
  save_query_bank(bank_path(c.out), build_query_bank(std::move(rays), result.weights, m.hash, c.g_cells));
  std::cout << "wrote " << c.out.string() << " (final loss " << result.loss_curve.back() << ")\n";
}

// ------------------------------------------------------------------ estimate

void cmd_estimate(const RunConfig& c) {
  const auto t0 = Clock::now();
  const Model m = load_model(c);
  const CameraSet set = load_cameras(c);
  require_path(c.features, "--features");
  const FeatureMap f = load_features(c.features);
  check_grid(f, set.intrinsics, c.features.string());

  std::optional<Pose> truth;
  if (!c.view.empty()) truth = normalize_pose(find_view(set, c.view).pose, m.cloud);

  PoseEstimate est;
  if (c.oracle) {
    if (!truth) throw Error(ErrorCode::Config, "--oracle needs --view to supply the ground-truth pose");
    const std::vector<Ray> rays = scene_rays(m.cloud, c.g_cells, c.neighbors);
    est = estimate_oracle(m.cloud, rays, f, *truth, set.intrinsics, c.lambda, c.n_top);
  } else {
    require_path(c.weights, "--weights");
    const ScorerWeights w = load_weights(c.weights);
    const QueryBank bank = obtain_bank(c, m, w);
    est = estimate_learned(bank, w, f, set.intrinsics, c.n_top);
  }
  std::optional<PoseError> err;
  if (truth) err = pose_error(est.pose, *truth);
  const double wall = seconds_since(t0);

  PoseEstimate out = est;
  out.pose = to_source_frame(est.pose, m.cloud);
  std::cout << pose_json(out, err) << '\n';
  std::cerr << "wall time " << wall << " s\n";
  if (!c.out.empty()) {
    write_pose(c.out, out, err);
    json echo = config_echo(c);
    echo["wall_seconds"] = wall;
    write_json(c.out.string() + ".run.json", echo);
  }
}

// ------------------------------------------------------------------ eval

struct ViewRow {
  std::string id;
  bool missing = false;
  std::string error;
  PoseEstimate estimate;
  PoseError err;
  double seconds = 0.0;
  std::string features_hash;
};

void cmd_eval(const RunConfig& c) {
  require_out(c.out);
  const Model m = load_model(c);
  const CameraSet set = load_cameras(c);
  const std::vector<const CameraFrame*> frames = set.split(c.split);
  if (frames.empty()) throw Error(ErrorCode::Config, "no views in split '" + c.split + "'");

  std::vector<Ray> oracle_rays;
  std::optional<ScorerWeights> weights;
  std::optional<QueryBank> bank;
  if (c.oracle) {
    oracle_rays = scene_rays(m.cloud, c.g_cells, c.neighbors);
  } else {
    require_path(c.weights, "--weights");
    weights = load_weights(c.weights);
    bank = obtain_bank(c, m, *weights);
  }

  std::vector<ViewRow> rows(frames.size());
  const auto t0 = Clock::now();
#pragma omp parallel for schedule(dynamic, 1)
  for (std::size_t i = 0; i < frames.size(); ++i) {
    const CameraFrame& frame = *frames[i];
    ViewRow& row = rows[i];
    row.id = frame.id;
    const auto fp = features_path(c, set, frame);
    if (!std::filesystem::exists(fp)) {
      row.missing = true;
      continue;
    }
    const auto tv = Clock::now();
    try {
      const FeatureMap f = load_features(fp);
      check_grid(f, set.intrinsics, frame.id);
      const Pose truth = normalize_pose(frame.pose, m.cloud);
      row.estimate = c.oracle ? estimate_oracle(m.cloud, oracle_rays, f, truth, set.intrinsics, c.lambda, c.n_top)
                              : estimate_learned(*bank, *weights, f, set.intrinsics, c.n_top);
      row.err = pose_error(row.estimate.pose, truth);
      row.features_hash = hex(file_hash(fp));
    } catch (const Error& e) {
      row.error = error_name(e.code()) + ": " + e.what();
    }
    row.seconds = seconds_since(tv);
  }
  const double total = seconds_since(t0);

  json views = json::array(), missing = json::array(), failed = json::array();
  std::vector<Point> scatter;
  std::vector<double> maes;
  std::vector<Pose> truths;
  double sum_mae = 0.0, sum_mte = 0.0;
  std::size_t attempted = 0;
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const ViewRow& r = rows[i];
    if (r.missing) {
      missing.push_back(r.id);
      continue;
    }
    ++attempted;
    if (!r.error.empty()) {
      failed.push_back({{"view", r.id}, {"error", r.error}, {"seconds", r.seconds}});
      continue;
    }
    truths.push_back(normalize_pose(frames[i]->pose, m.cloud));
    views.push_back({{"view", r.id},
                     {"mae", r.err.mae},
                     {"mte", r.err.mte},
                     {"seconds", r.seconds},
                     {"residual", r.estimate.residual},
                     {"inliers", r.estimate.inliers},
                     {"flagged", r.estimate.flagged},
                     {"features_hash", r.features_hash}});
    sum_mae += r.err.mae;
    sum_mte += r.err.mte;
    scatter.push_back({r.err.mae, r.err.mte, r.id});
    maes.push_back(r.err.mae);
  }
  const double n = static_cast<double>(views.size());
  json report;
  report["config"] = config_echo(c);
  report["views"] = views;
  report["missing"] = missing;
  report["failed"] = failed;
  report["aggregate"] = {{"views", views.size()},
                         {"attempted", attempted},
                         {"mean_mae", n > 0 ? sum_mae / n : 0.0},
                         {"mean_mte", n > 0 ? sum_mte / n : 0.0},
                         {"total_seconds", total},
                         {"fps", total > 0.0 ? static_cast<double>(attempted) / total : 0.0}};
  const PoseError baseline = random_pose_baseline(truths, c.seed);
  report["random_baseline"] = {{"mae", baseline.mae}, {"mte", baseline.mte}};

  std::filesystem::create_directories(c.out);
  write_json(c.out / "report.json", report);
  write_scatter_svg(c.out / "errors.svg", scatter, "Per-view pose error", "MAE (degrees)", "MTE (u)");
  write_histogram_svg(c.out / "mae_histogram.svg", maes, 0.0, 180.0, 18, "MAE distribution", "MAE (degrees)");
  std::cout << "views " << views.size() << "/" << frames.size() << "  mean MAE " << report["aggregate"]["mean_mae"]
            << " deg  mean MTE " << report["aggregate"]["mean_mte"] << " u  fps " << report["aggregate"]["fps"]
            << '\n';
  if (!missing.empty()) std::cout << "missing views: " << missing.dump() << '\n';
  if (!failed.empty()) std::cout << "failed views: " << failed.size() << '\n';
}

// ------------------------------------------------------------------ render

void cmd_render(const RunConfig& c) {
  require_out(c.out);
  const Model m = load_model(c);
  const CameraSet set = load_cameras(c);
  Pose pose;
  if (!c.pose.empty()) {
    require_path(c.pose, "--pose");
    pose = read_pose(c.pose);
  } else if (!c.view.empty()) {
    pose = find_view(set, c.view).pose;
  } else {
    throw Error(ErrorCode::Config, "render needs --view or --pose");
  }
  write_png(c.out, render_image(m.cloud, normalize_pose(pose, m.cloud), set.intrinsics));
  write_json(c.out.string() + ".run.json", config_echo(c));
  std::cout << "wrote " << c.out.string() << '\n';
}

}  // namespace

int exit_code(ErrorCode code) {
  switch (code) {
    case ErrorCode::DegenerateGeometry:
    case ErrorCode::InsufficientBundle:
    case ErrorCode::DegenerateRotation:
      return kExitDegenerate;
    case ErrorCode::Training:
      return kExitTraining;
    default:
      return kExitBadInput;
  }
}

std::string error_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::Format: return "format";
    case ErrorCode::EmptyModel: return "empty_model";
    case ErrorCode::Config: return "config";
    case ErrorCode::Domain: return "domain";
    case ErrorCode::Io: return "io";
    case ErrorCode::SingularEllipse: return "singular_ellipse";
    case ErrorCode::DegenerateExtent: return "degenerate_extent";
    case ErrorCode::DegenerateGeometry: return "degenerate_geometry";
    case ErrorCode::InsufficientBundle: return "insufficient_bundle";
    case ErrorCode::DegenerateRotation: return "degenerate_rotation";
    case ErrorCode::Training: return "training_failure";
  }
  return "unknown";
}

void run(const RunConfig& c) {
  int threads = c.threads;
  if (threads <= 0)
    if (const char* env = std::getenv("SIXDGS_THREADS")) threads = std::atoi(env);
  if (threads > 0) omp_set_num_threads(threads);

  if (c.command == "synth") return cmd_synth(c);
  if (c.command == "rays") return cmd_rays(c);
  if (c.command == "train") return cmd_train(c);
  if (c.command == "estimate") return cmd_estimate(c);
  if (c.command == "eval") return cmd_eval(c);
  if (c.command == "render") return cmd_render(c);
  throw Error(ErrorCode::Config, "unknown command '" + c.command + "'");
}

}  // namespace sixdgs::cli
