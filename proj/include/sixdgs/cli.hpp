#pragma once
// Command-line surface: synth, rays, train, estimate, eval, render.
//
// Exit codes: 0 success, 2 bad input, 3 degenerate geometry (including too
// few distinct rays and rank-deficient rotations), 4 training failure.

#include <cstdint>
#include <filesystem>
#include <string>

#include "sixdgs/common.hpp"

namespace sixdgs::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitBadInput = 2;
inline constexpr int kExitDegenerate = 3;
inline constexpr int kExitTraining = 4;

[[nodiscard]] int exit_code(ErrorCode code);
[[nodiscard]] std::string error_name(ErrorCode code);

struct RunConfig {
  std::string command;
  std::filesystem::path model;
  std::filesystem::path features;    // file (estimate) or directory (train/eval override)
  std::filesystem::path transforms;
  std::filesystem::path weights;
  std::filesystem::path out;
  std::filesystem::path pose;        // render from a pose JSON
  std::filesystem::path csv;         // rays: optional CSV dump
  std::string view;                  // frame id in the transforms file
  std::string split = "test";
  bool oracle = false;

  int g_cells = 100;
  int neighbors = 16;
  std::size_t n_top = 100;
  double lambda = 0.1;
  int mlp_width = 512;
  int iters = 1500;
  int subsample = 2000;
  double learning_rate = 1e-3;
  double weight_decay = 1e-3;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: SIXDGS_THREADS, else the OpenMP default

  // synth
  std::size_t count = 500;
  std::string layout = "sphere-shell";
  int views = 12;
  int test_every = 0;
  int image_size = 448;
  int stride = 14;
  double distance = 1.0;
  double fov = 65.0;
};

// Parses argv and runs the subcommand; never throws.
int main(int argc, char** argv);

// Runs an already-parsed configuration; throws sixdgs::Error.
void run(const RunConfig& cfg);

}  // namespace sixdgs::cli
