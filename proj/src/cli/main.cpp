#include <iostream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sixdgs/cli.hpp"

namespace sixdgs::cli {

namespace {

void add_common(CLI::App* app, RunConfig& c) {
  app->add_option("--seed", c.seed, "random seed");
  app->add_option("--threads", c.threads, "worker threads (falls back to SIXDGS_THREADS)");
}

void add_model(CLI::App* app, RunConfig& c) { app->add_option("--model", c.model, "Gaussian cloud (PLY)"); }

void add_rays(CLI::App* app, RunConfig& c) {
  app->add_option("--g-cells", c.g_cells, "Ellicell cells per ellipsoid (G)");
  app->add_option("--neighbors", c.neighbors, "neighbors for normal estimation");
}

void add_solver(CLI::App* app, RunConfig& c) {
  app->add_option("--n-top", c.n_top, "rays kept for the pose solve");
  app->add_option("--lambda", c.lambda, "distance bandwidth of the target scores");
  app->add_option("--weights", c.weights, "trained scorer weights");
  app->add_flag("--oracle", c.oracle, "score rays from the ground-truth pose instead of the scorer");
}

}  // namespace

int main(int argc, char** argv) {
  RunConfig c;
  CLI::App app{"Closed-form camera pose from a Gaussian splatting model"};
  app.require_subcommand(1);

  auto* synth = app.add_subcommand("synth", "generate a synthetic scene, cameras, renders and features");
  synth->add_option("--out", c.out, "output directory");
  synth->add_option("--count", c.count, "ellipsoids");
  synth->add_option("--layout", c.layout, "sphere-shell or box-cluster");
  synth->add_option("--views", c.views, "cameras");
  synth->add_option("--test-every", c.test_every, "every n-th view goes to the test split (0: none)");
  synth->add_option("--image-size", c.image_size, "square image side in pixels");
  synth->add_option("--stride", c.stride, "feature cell size in pixels");
  synth->add_option("--distance", c.distance, "camera distance from the origin");
  synth->add_option("--fov", c.fov, "field of view in degrees");
  add_common(synth, c);

  auto* rays = app.add_subcommand("rays", "cast Ellicell rays and dump them");
  add_model(rays, c);
  rays->add_option("--out", c.out, "6DGSRAYS output");
  rays->add_option("--csv", c.csv, "optional CSV dump");
  add_rays(rays, c);
  add_common(rays, c);

  auto* train = app.add_subcommand("train", "train the ray scorer");
  add_model(train, c);
  train->add_option("--transforms", c.transforms, "cameras (transforms JSON)");
  train->add_option("--features", c.features, "directory of <view>.6dfeat overriding the per-frame paths");
  train->add_option("--out", c.out, "weights file");
  train->add_option("--iters", c.iters, "iterations");
  train->add_option("--subsample", c.subsample, "ellipsoids per iteration");
  train->add_option("--mlp-width", c.mlp_width, "hidden width");
  train->add_option("--lambda", c.lambda, "distance bandwidth of the target scores");
  train->add_option("--lr", c.learning_rate, "learning rate");
  train->add_option("--weight-decay", c.weight_decay, "decoupled weight decay");
  add_rays(train, c);
  add_common(train, c);

  auto* estimate = app.add_subcommand("estimate", "estimate the pose of one image");
  add_model(estimate, c);
  estimate->add_option("--features", c.features, "6DFEAT file of the target image");
  estimate->add_option("--transforms", c.transforms, "intrinsics (and ground truth with --view)");
  estimate->add_option("--view", c.view, "frame id for ground truth");
  estimate->add_option("--out", c.out, "pose JSON");
  add_solver(estimate, c);
  add_rays(estimate, c);
  add_common(estimate, c);

  auto* eval = app.add_subcommand("eval", "evaluate every view of a split");
  add_model(eval, c);
  eval->add_option("--transforms", c.transforms, "cameras (transforms JSON)");
  eval->add_option("--features", c.features, "directory of <view>.6dfeat overriding the per-frame paths");
  eval->add_option("--split", c.split, "split to evaluate");
  eval->add_option("--out", c.out, "report directory");
  add_solver(eval, c);
  add_rays(eval, c);
  add_common(eval, c);

  auto* render = app.add_subcommand("render", "render the model from a camera");
  add_model(render, c);
  render->add_option("--transforms", c.transforms, "intrinsics (and poses with --view)");
  render->add_option("--view", c.view, "frame id");
  render->add_option("--pose", c.pose, "pose JSON");
  render->add_option("--out", c.out, "PNG output");
  add_common(render, c);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? kExitOk : kExitBadInput;
  }
  c.command = app.get_subcommands().front()->get_name();

  try {
    run(c);
    return kExitOk;
  } catch (const Error& e) {
    nlohmann::json j{{"error", error_name(e.code())}, {"message", e.what()}};
    if (const auto* d = dynamic_cast<const DegenerateGeometryError*>(&e)) j["condition_number"] = d->condition_number();
    if (const auto* t = dynamic_cast<const TrainingError*>(&e)) j["iteration"] = t->iteration();
    std::cerr << j.dump() << '\n';
    return exit_code(e.code());
  } catch (const std::exception& e) {
    std::cerr << nlohmann::json{{"error", "internal"}, {"message", e.what()}}.dump() << '\n';
    return 1;
  }
}

}  // namespace sixdgs::cli
