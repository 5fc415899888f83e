#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "famgp/datagen.hpp"
#include "famgp/optimizer.hpp"

namespace famgp {

struct BenchCase {
  std::string id;
  std::string method;
  std::uint64_t seed = 0;
  Eigen::Index n_samples = 0;
  int outputs = 1;
  int n_eigs = 0;
  int iters = 0;
  double seconds = -1.0;           // median timed-loop wall time
  double seconds_per_iter = -1.0;
  double phi_build_seconds = -1.0; // one-time basis build, fast paths only
  double rmse = -1.0;
  bool skipped = false;
  std::map<std::string, double> extra;  // converged parameters, masses, ...
};

struct BenchReport {
  std::string name;
  std::vector<BenchCase> cases;
  std::map<std::string, double> summary;
};

// {cases: [...], environment: {cpu_count, build_flags}}
void write_report_json(const std::string& path, const BenchReport& report);

// Per-iteration training cost vs N for the dense exact GP, the
// basis-recomputing approximations (se, pr), and the eigenvalue-only fast
// paths (ch, prcf). Timed loops evaluate LML + gradients at fixed
// hyperparameters; slopes come from a log-log least-squares fit.
struct ScalingConfig {
  std::vector<Eigen::Index> n_grid = {250, 500, 1000, 2000, 10000, 100000};
  Eigen::Index exact_cap = 2000;
  int iters = 100;
  int reps = 3;
  int n_eigs = 75;
  std::uint64_t seed = 1;
};
BenchReport bench_scaling(const ScalingConfig& cfg = {});

// Regression RMSE against the noise-free signal as N grows, n fixed.
struct RmseSamplesConfig {
  std::vector<Eigen::Index> n_grid = {500, 1000, 2000, 10000, 100000};
  Eigen::Index exact_cap = 2000;
  int n_eigs = 75;
  int seeds = 3;
  std::uint64_t seed0 = 1;
  double x_lo = -5.0, x_hi = 5.0;
  double noise_sd = 2.2360679774997896;  // variance 5
  int max_iters = 150;
};
BenchReport bench_rmse_vs_samples(const RmseSamplesConfig& cfg = {});

// Regression RMSE and converged hyperparameters as the truncation n grows,
// with the exact GP as the reference line.
struct RmseEigsConfig {
  std::vector<int> n_grid = {20, 30, 40, 50, 60, 70, 80, 90, 100};
  Eigen::Index n_samples = 1000;
  std::uint64_t seed = 1;
  double noise_sd = 0.1;
  int max_iters = 400;
};
BenchReport bench_rmse_vs_eigs(const RmseEigsConfig& cfg = {});

// Correlated two-output study: train kernel width and K_f on the first
// train_frac of the grid, then predict the truncated output across the rest,
// comparing the learned K_f against an identity K_f. Inputs stay in (-1,1)
// so learned widths are directly comparable to l_true.
struct CorrelationConfig {
  Eigen::Index n_total = 900;
  double train_frac = 2.0 / 3.0;
  double l_true = 0.1;
  double off_diag = -0.95;
  double noise_var = 0.05;
  double init_l = 0.5;
  int n_eigs = 75;
  int seeds = 3;
  std::uint64_t seed0 = 1;
  bool run_exact = true;        // dense oracle on the first seed
  bool exact_all_seeds = false;
  int max_iters = 600;
  std::string out_dir;          // when set, prediction CSVs land here
};
BenchReport bench_correlation(const CorrelationConfig& cfg = {});

}  // namespace famgp
