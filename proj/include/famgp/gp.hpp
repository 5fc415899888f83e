#pragma once

#include <utility>

#include "famgp/basis.hpp"
#include "famgp/linalg.hpp"

namespace famgp {

// Affine map u = (x - shift) / scale taking raw inputs into the basis
// domain [-1,1]. Derivative predictions are corrected by 1/scale^k.
struct InputTransform {
  double shift = 0.0;
  double scale = 1.0;

  double apply(double x) const { return (x - shift) / scale; }
  Vec apply(const Vec& x) const { return (x.array() - shift) / scale; }

  static InputTransform from_range(double lo, double hi);
  static InputTransform from_data(const Vec& x);
};

struct Dataset {
  Vec X;
  Vec Y;
  Vec noise_variance;  // size 1 = shared across samples, size N = per sample

  bool homoscedastic() const { return noise_variance.size() == 1; }
  double noise_at(Eigen::Index i) const {
    return homoscedastic() ? noise_variance[0] : noise_variance[i];
  }
};

Dataset make_dataset(Vec x, Vec y, double noise_variance);

enum class CovMode { None, Diagonal, Full };

struct Posterior {
  Vec mean;
  Vec variance;    // filled in Diagonal mode
  Mat covariance;  // filled in Full mode
  CovMode mode = CovMode::None;
  int derivative_order = 0;
};

// G = Lambda - LambdaBar^{-1}; both kept because G is the serialized
// quantity while LambdaBar^{-1} drives the posterior covariance.
struct FittedModel {
  MercerBasis basis;
  InputTransform transform;
  Vec alpha_prime;
  Mat G;
  Mat lambda_bar_inv;
  Vec noise_variance;
};

struct FitOptions {
  Eigen::Index chunk = 8192;  // rows per accumulation block
  const InputTransform* transform = nullptr;  // null: derive from X range
  double eig_floor = kDefaultEigFloor;
};

FittedModel fit(const Dataset& data, KernelKind kind, const KernelParams& params,
                int n, const FitOptions& opt = {});
FittedModel fit(const Dataset& data, const MercerBasis& basis, const FitOptions& opt = {});

Posterior predict(const FittedModel& model, const Vec& x_star,
                  CovMode mode = CovMode::Diagonal);

// Mean and covariance of the k-th derivative of the latent function;
// k = 0 is the plain posterior.
Posterior predict_derivative(const FittedModel& model, const Vec& x_star, int k,
                             CovMode mode = CovMode::Diagonal);

double log_marginal_likelihood(const Dataset& data, KernelKind kind,
                               const KernelParams& params, int n,
                               const FitOptions& opt = {});
double log_marginal_likelihood(const Dataset& data, const MercerBasis& basis,
                               const FitOptions& opt = {});

// Batched value-and-gradient of the log marginal likelihood. Names may be
// kernel parameters, "noise_variance" (homoscedastic data only), or "scale"
// (treated as a multiplier already baked into basis.lambda; pass its current
// value so the chain rule can unscale).
struct LmlAndGrads {
  double lml = 0.0;
  Vec grads;
};
LmlAndGrads lml_value_and_grads(const Dataset& data, const MercerBasis& basis,
                                const std::vector<std::string>& names,
                                double scale = 1.0, const FitOptions& opt = {});

double lml_grad_general(const Dataset& data, KernelKind kind,
                        const KernelParams& params, int n, const std::string& name,
                        const FitOptions& opt = {});

// Sufficient statistics for eigenvalue-only training: Phi is built once and
// only Lambda changes afterwards. Homoscedastic datasets only; the stored
// statistics are at unit noise and sigma2 is applied per call.
struct FastCache {
  Mat B0;     // Phi^T Phi
  Vec r0;     // Phi^T Y
  double yy = 0.0;
  Eigen::Index N = 0;
};

FastCache make_fast_cache(const Dataset& data, const MercerBasis& basis,
                          const FitOptions& opt = {});

double lml_fast(const FastCache& cache, const MercerBasis& basis, double sigma2);

// Names: eigenvalue-only kernel parameters, "noise_variance", "scale".
// Eigenfunction-dependent parameters are rejected.
LmlAndGrads lml_fast_and_grads(const FastCache& cache, const MercerBasis& basis,
                               double sigma2, const std::vector<std::string>& names,
                               double scale = 1.0);

double lml_grad_fast(const FastCache& cache, const MercerBasis& basis, double sigma2,
                     const std::string& name);

}  // namespace famgp
