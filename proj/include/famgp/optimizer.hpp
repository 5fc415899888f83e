#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "famgp/exact_gp.hpp"
#include "famgp/multioutput.hpp"

namespace famgp {

// Map between a constrained model value and the unconstrained coordinate the
// optimizer walks in. Log for positive parameters (lengthscales, widths,
// noise, scale, coregionalization diagonal), LogitHalfOpen for a (domain
// (0,1], squashed onto (eps,1] with eps = 1e-6), Sigmoid for b in (0,1),
// Identity for coregionalization off-diagonals.
enum class ParamTransform { Log, LogitHalfOpen, Sigmoid, Identity };

double to_unconstrained(double value, ParamTransform t);
double to_constrained(double theta, ParamTransform t);
// d(value)/d(theta) at the given constrained value; multiplies model-space
// gradients into optimizer space.
double transform_chain(double value, ParamTransform t);

struct ParamVector {
  std::vector<std::string> names;
  Vec values;  // constrained model-space values
  std::vector<ParamTransform> transforms;

  Eigen::Index size() const { return values.size(); }
  double get(const std::string& name) const;
};

struct OptimizerConfig {
  int max_iters = 500;
  double initial_step = 1e-4;
  double grad_tol = 1e-5;
  double step_shrink = 0.5;
  double step_grow = 1.3;
  double min_step = 1e-16;
  std::uint64_t seed = 0;  // reserved for restart hooks
};

struct TraceRow {
  int iter = 0;
  double lml = 0.0;
  double grad_norm = 0.0;
  double step = 0.0;
  double wall_time_s = 0.0;
};
using TrainingTrace = std::vector<TraceRow>;

struct ObjectiveEval {
  double value = 0.0;
  Vec grad;  // model-space gradient, one entry per parameter
};
using Objective = std::function<double(const Vec&)>;
using Gradient = std::function<Vec(const Vec&)>;
using ValueAndGrad = std::function<ObjectiveEval(const Vec&)>;

struct OptimizeResult {
  ParamVector params;
  double value = 0.0;
  double grad_norm = 0.0;  // unconstrained-space norm at the stop point
  int iters = 0;
  bool converged = false;  // grad_tol reached
  TrainingTrace trace;
};

// Gradient ascent with an adaptive step: propose theta + s * grad, accept if
// the objective increases (then s *= step_grow), otherwise s *= step_shrink.
// Stops at grad_tol, max_iters, or step underflow. The trace records the
// initial point and every accepted step.
OptimizeResult optimize_joint(const ValueAndGrad& f, const ParamVector& init,
                              const OptimizerConfig& config);
OptimizeResult optimize(const Objective& objective, const Gradient& gradient,
                        const ParamVector& init, const OptimizerConfig& config);

// Spec'd starting point: l_se = w_pr = a = b = 0.5, f_pr left at its
// constructed default.
KernelParams default_train_init(KernelKind kind);
// var(Y)/10, the default initial noise variance.
double default_noise_init(const Vec& y);
// Cholesky factor of max(cov(Y) - noise I, floor), the default K_f start for
// multi-output training.
Mat empirical_coreg_init(const Mat& y, double noise_variance, double floor = 1e-3);

struct TrainOptions {
  OptimizerConfig config;
  bool train_noise = true;
  double init_noise = -1.0;  // <= 0: var(Y)/10
  bool train_scale = false;  // signal variance multiplier on the kernel
  double init_scale = 1.0;
  std::vector<std::string> fixed;  // kernel parameters held at their init
  const InputTransform* transform = nullptr;
  Eigen::Index chunk = 8192;
  double eig_floor = kDefaultEigFloor;
  bool record_trace = true;
};

struct TrainResult {
  FittedModel model;
  KernelParams params;
  double noise_variance = 0.0;
  double scale = 1.0;
  double lml = 0.0;
  int iters = 0;
  bool converged = false;
  TrainingTrace trace;
};

// General path: the basis (eigenvalues and eigenfunctions) is rebuilt every
// iteration. The eigenvalue floor is applied once at the init to fix the
// working truncation; the final model is refit at the requested n.
TrainResult train_general(const Dataset& data, KernelKind kind, const KernelParams& init,
                          int n, const TrainOptions& opt = {});

// Fast path: Phi is built once and only the eigenvalues move, so every
// trained kernel parameter must be eigenvalue-only (chebyshev a/b; periodic
// w_pr with f_pr in `fixed`). Per-iteration cost is independent of N.
TrainResult train_fast_path(const Dataset& data, KernelKind kind, const KernelParams& init,
                            int n, const TrainOptions& opt = {});

struct ExactTrainResult {
  ExactGP model;
  KernelParams params;
  double noise_variance = 0.0;
  double scale = 1.0;
  double lml = 0.0;
  int iters = 0;
  bool converged = false;
  TrainingTrace trace;
};

ExactTrainResult train_exact(const Dataset& data, KernelKind kind,
                             const KernelParams& init, const TrainOptions& opt = {});

struct MOTrainOptions {
  OptimizerConfig config;
  bool train_noise = false;  // correlation studies treat sigma2 as known
  double init_noise = -1.0;  // <= 0: pooled var(Y)/10
  Mat init_L;                // empty: empirical_coreg_init
  std::vector<std::string> fixed;
  const InputTransform* transform = nullptr;
  Eigen::Index chunk = 8192;
  double eig_floor = kDefaultEigFloor;
  bool record_trace = true;
};

struct MOTrainResult {
  MOFittedModel model;
  KernelParams params;
  Mat L;
  double noise_variance = 0.0;
  double lml = 0.0;
  int iters = 0;
  bool converged = false;
  TrainingTrace trace;
};

// Trains kernel parameters plus the Cholesky factor of K_f (diagonal in log
// space, off-diagonals raw) on isotopic data with separable noise.
MOTrainResult train_multioutput(const MODataset& data, KernelKind kind,
                                const KernelParams& init, int n,
                                const MOTrainOptions& opt = {});

struct ExactMOTrainResult {
  ExactMOGP model;
  KernelParams params;
  Mat L;
  double noise_variance = 0.0;
  double lml = 0.0;
  int iters = 0;
  bool converged = false;
  TrainingTrace trace;
};

ExactMOTrainResult train_exact_multioutput(const MODataset& data, KernelKind kind,
                                           const KernelParams& init,
                                           const MOTrainOptions& opt = {});

}  // namespace famgp
