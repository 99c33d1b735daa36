#include <doctest.h>

#include <filesystem>

#include <json.hpp>

#include "run_cli.hpp"
#include "sixdgs/cli.hpp"
#include "sixdgs/image_io.hpp"
#include "sixdgs/ray_io.hpp"
#include "sixdgs/scorer.hpp"

using namespace sixdgs;
using namespace sixdgs::testing;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

fs::path root() { return fs::temp_directory_path() / "sixdgs_test_cli"; }

// One small scene shared by every case; generated on first use.
const fs::path& scene() {
  static const fs::path dir = [] {
    const fs::path d = root() / "scene";
    fs::remove_all(d);
    const auto r = run_cli("synth --out " + d.string() +
                           " --count 200 --views 6 --test-every 3 --image-size 112 --stride 14 --seed 3");
    REQUIRE_MESSAGE(r.status == 0, r.err);
    return d;
  }();
  return dir;
}

std::string model_args() {
  return "--model " + (scene() / "model.ply").string() + " --transforms " + (scene() / "transforms.json").string();
}

json parse_error(const std::string& err) {
  const auto last = err.find_last_of('{');
  REQUIRE(last != std::string::npos);
  return json::parse(err.substr(err.rfind('\n', last) == std::string::npos ? 0 : err.rfind('\n', last) + 1));
}

}  // namespace

TEST_CASE("exit code mapping") {
  CHECK(cli::exit_code(ErrorCode::Format) == 2);
  CHECK(cli::exit_code(ErrorCode::Config) == 2);
  CHECK(cli::exit_code(ErrorCode::Io) == 2);
  CHECK(cli::exit_code(ErrorCode::EmptyModel) == 2);
  CHECK(cli::exit_code(ErrorCode::DegenerateGeometry) == 3);
  CHECK(cli::exit_code(ErrorCode::InsufficientBundle) == 3);
  CHECK(cli::exit_code(ErrorCode::DegenerateRotation) == 3);
  CHECK(cli::exit_code(ErrorCode::Training) == 4);
  CHECK(cli::error_name(ErrorCode::Training) == "training_failure");
}

TEST_CASE("argument errors") {
  CHECK(run_cli("").status == 2);
  CHECK(run_cli("frobnicate").status == 2);
  CHECK(run_cli("--help").status == 0);
  CHECK(run_cli("eval --n-top notanumber").status == 2);
  const auto r = run_cli("eval --oracle --out " + (root() / "x").string());
  CHECK(r.status == 2);
  CHECK(parse_error(r.err)["error"] == "config");
  const auto missing = run_cli("rays --model /nonexistent/model.ply --out " + (root() / "r.bin").string());
  CHECK(missing.status == 2);
  CHECK(parse_error(missing.err)["error"] == "io");
}

TEST_CASE("synth writes a complete scene") {
  const auto& d = scene();
  CHECK(fs::exists(d / "model.ply"));
  CHECK(fs::exists(d / "transforms.json"));
  CHECK(fs::exists(d / "images/view_000.png"));
  CHECK(fs::exists(d / "features/view_005.6dfeat"));
  const json run = json::parse(read_text(d / "run.json"));
  CHECK(run["command"] == "synth");
  CHECK(run["count"] == 200);
  CHECK(run["seed"] == 3);
  CHECK(run.contains("simd"));
}

TEST_CASE("rays") {
  const auto out = root() / "rays.bin", csv = root() / "rays.csv";
  const auto r = run_cli("rays --model " + (scene() / "model.ply").string() + " --g-cells 60 --out " + out.string() +
                         " --csv " + csv.string());
  REQUIRE_MESSAGE(r.status == 0, r.err);
  const auto rays = read_rays(out);
  CHECK(rays.size() > 200 * 15);
  CHECK(rays.size() < 200 * 45);
  const std::string text = read_text(csv);
  CHECK(text.rfind("ox,oy,oz,dx,dy,dz,r,g,b,source\n", 0) == 0);
  CHECK(std::count(text.begin(), text.end(), '\n') == static_cast<long>(rays.size()) + 1);
  CHECK(json::parse(read_text(out.string() + ".run.json"))["g_cells"] == 60);
}

TEST_CASE("oracle evaluation report") {
  const auto out = root() / "eval_oracle";
  fs::remove_all(out);
  const auto rr = run_cli("eval --oracle --split train --out " + out.string() + " " + model_args());
  REQUIRE_MESSAGE(rr.status == 0, rr.err);
  const json rep = json::parse(read_text(out / "report.json"));
  const auto& views = rep["views"];
  REQUIRE(views.size() == 4);
  double mae = 0.0, mte = 0.0;
  for (const auto& v : views) {
    mae += v["mae"].get<double>();
    mte += v["mte"].get<double>();
    CHECK(v["features_hash"].get<std::string>().size() > 0);
  }
  const auto& agg = rep["aggregate"];
  CHECK(agg["views"] == 4);
  CHECK(agg["attempted"] == 4);
  CHECK(agg["mean_mae"].get<double>() == doctest::Approx(mae / 4).epsilon(1e-12));
  CHECK(agg["mean_mte"].get<double>() == doctest::Approx(mte / 4).epsilon(1e-12));
  CHECK(agg["mean_mae"].get<double>() < 5.0);
  CHECK(agg["fps"].get<double>() == doctest::Approx(4.0 / agg["total_seconds"].get<double>()).epsilon(1e-9));
  CHECK(rep["random_baseline"]["mae"].get<double>() > 30.0);
  CHECK(rep["config"]["oracle"] == true);
  CHECK(rep["config"]["lambda"] == 0.1);
  CHECK(rep["config"]["n_top"] == 100);
  CHECK(rep["config"]["inputs"].contains("model"));
  CHECK(rep["missing"].empty());
  CHECK(fs::exists(out / "errors.svg"));
  CHECK(fs::exists(out / "mae_histogram.svg"));
  CHECK(rr.out.find("mean MAE") != std::string::npos);
}

TEST_CASE("evaluation lists missing views and rejects empty splits") {
  const auto feats = root() / "partial_features";
  fs::remove_all(feats);
  fs::create_directories(feats);
  fs::copy_file(scene() / "features/view_002.6dfeat", feats / "view_002.6dfeat");
  const auto out = root() / "eval_partial";
  const auto r = run_cli("eval --oracle --split test " + model_args() + " --features " + feats.string() + " --out " +
                         out.string());
  REQUIRE_MESSAGE(r.status == 0, r.err);
  const json rep = json::parse(read_text(out / "report.json"));
  CHECK(rep["views"].size() == 1);
  CHECK(rep["missing"] == json::array({"view_005"}));
  CHECK(rep["aggregate"]["attempted"] == 1);
  CHECK(r.out.find("view_005") != std::string::npos);

  const auto empty = run_cli("eval --oracle --split val " + model_args() + " --out " + out.string());
  CHECK(empty.status == 2);
  CHECK(empty.err.find("no views") != std::string::npos);
}

TEST_CASE("estimate with the oracle") {
  const auto out = root() / "pose.json";
  const auto r = run_cli("estimate --oracle " + model_args() + " --features " +
                         (scene() / "features/view_001.6dfeat").string() + " --view view_001 --out " + out.string());
  REQUIRE_MESSAGE(r.status == 0, r.err);
  const json j = json::parse(read_text(out));
  CHECK(j["mae"].get<double>() < 5.0);
  CHECK(j["mte"].get<double>() < 0.1);
  CHECK(j["rotation"].size() == 9);
  CHECK(json::parse(r.out) == j);
  const json run = json::parse(read_text(out.string() + ".run.json"));
  CHECK(run.contains("wall_seconds"));
  CHECK(run["n_top"] == 100);
  CHECK_FALSE(run.contains("mlp_width"));

  const auto no_view = run_cli("estimate --oracle " + model_args() + " --features " +
                               (scene() / "features/view_001.6dfeat").string());
  CHECK(no_view.status == 2);

  const auto bad_top = run_cli("estimate --oracle --n-top 1 " + model_args() + " --features " +
                               (scene() / "features/view_001.6dfeat").string() + " --view view_001");
  CHECK(bad_top.status == 2);
}

TEST_CASE("degenerate inputs exit with 3") {
  // Two rays fix a center but not a rotation.
  const auto r = run_cli("estimate --oracle --n-top 2 " + model_args() + " --features " +
                         (scene() / "features/view_001.6dfeat").string() + " --view view_001");
  CHECK(r.status == 3);
  CHECK(parse_error(r.err)["error"] == "degenerate_rotation");
}

TEST_CASE("train, then estimate and evaluate with the weights") {
  const auto w = root() / "w.bin";
  const auto r = run_cli("train " + model_args() + " --iters 4 --mlp-width 16 --subsample 40 --seed 5 --out " +
                         w.string());
  REQUIRE_MESSAGE(r.status == 0, r.err);
  CHECK(fs::exists(w));
  CHECK(fs::exists(w.string() + ".bank"));
  const json manifest = json::parse(read_text(w.string() + ".json"));
  CHECK(manifest["width"] == 16);
  CHECK(manifest["run"]["iters"] == 4);
  const std::string curve = read_text(w.string() + ".loss.csv");
  CHECK(std::count(curve.begin(), curve.end(), '\n') == 5);
  CHECK(load_weights(w).width == 16);

  const auto est = run_cli("estimate " + model_args() + " --weights " + w.string() + " --features " +
                           (scene() / "features/view_002.6dfeat").string());
  CHECK(est.status != 1);
  CHECK(est.status != 2);
  if (est.status == 0) CHECK(json::parse(est.out).contains("center"));

  const auto out = root() / "eval_learned";
  const auto ev = run_cli("eval " + model_args() + " --weights " + w.string() + " --out " + out.string());
  REQUIRE_MESSAGE(ev.status == 0, ev.err);
  const json rep = json::parse(read_text(out / "report.json"));
  CHECK(rep["aggregate"]["attempted"] == 2);
  CHECK(rep["views"].size() + rep["failed"].size() == 2);

  const auto diverge = run_cli("train " + model_args() + " --iters 20 --mlp-width 16 --subsample 40 --lr 1e300 --out " +
                               (root() / "boom.bin").string());
  CHECK(diverge.status == 4);
  CHECK(parse_error(diverge.err).contains("iteration"));
}

TEST_CASE("render reproduces the synthetic views") {
  const auto out = root() / "view_000.png";
  const auto r = run_cli("render " + model_args() + " --view view_000 --out " + out.string());
  REQUIRE_MESSAGE(r.status == 0, r.err);
  const Image a = read_png(out), b = read_png(scene() / "images/view_000.png");
  REQUIRE(a.width == b.width);
  REQUIRE(a.height == b.height);
  double worst = 0.0;
  for (int y = 0; y < a.height; ++y)
    for (int x = 0; x < a.width; ++x)
      for (int c = 0; c < 3; ++c) worst = std::max(worst, std::abs(a.at(x, y, c) - b.at(x, y, c)));
  CHECK(worst <= 1.0 / 255.0 + 1e-9);
  CHECK(run_cli("render " + model_args() + " --out " + out.string()).status == 2);
}

TEST_CASE("thread count from the environment") {
  const auto out = root() / "render_threads.png";
  const auto r = run_cli("render " + model_args() + " --view view_000 --out " + out.string(), "SIXDGS_THREADS=2");
  REQUIRE_MESSAGE(r.status == 0, r.err);
  CHECK(json::parse(read_text(out.string() + ".run.json"))["threads"] == 2);
}
