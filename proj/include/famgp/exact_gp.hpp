#pragma once

#include <utility>

#include "famgp/gp.hpp"
#include "famgp/multioutput_types.hpp"

namespace famgp {

// Dense reference GP. The kernel is either the closed form for (kind, params)
// or, when use_mercer is set, the truncated reconstruction Phi Lambda Phi^T of
// a given basis; the latter makes FAMGP comparisons exact identities instead
// of truncation-limited approximations.
struct ExactGP {
  KernelKind kind = KernelKind::SquaredExponential;
  KernelParams params;
  double scale = 1.0;  // output variance multiplier on the kernel
  bool use_mercer = false;
  MercerBasis mercer;
  InputTransform transform;
  Vec U;  // transformed training inputs
  Vec Y;
  Vec noise_variance;  // size 1 or N
  SpdFactor factor;    // of scale*K + Sigma
  Vec alpha;
};

struct ExactOptions {
  const InputTransform* transform = nullptr;
  Eigen::Index max_n = 4000;  // dense-path size guard
  double scale = 1.0;
};

ExactGP exact_fit(const Dataset& data, KernelKind kind, const KernelParams& params,
                  const ExactOptions& opt = {});
ExactGP exact_fit(const Dataset& data, const MercerBasis& basis,
                  const ExactOptions& opt = {});

Posterior exact_predict(const ExactGP& model, const Vec& x_star,
                        CovMode mode = CovMode::Diagonal);

// Derivative prediction is available in mercer mode only, where the
// cross-covariances follow from differentiating the basis.
Posterior exact_predict_derivative(const ExactGP& model, const Vec& x_star, int k,
                                   CovMode mode = CovMode::Diagonal);

double exact_lml(const ExactGP& model);

// Names: kernel parameters of the closed form, "noise_variance", "scale".
std::pair<double, double> exact_lml_and_grad(const ExactGP& model,
                                             const std::string& name);

// Dense multi-output reference over the observed (output, sample) pairs,
// covariance K_f[j,j'] k(u_i, u_i') + S[j,j'] [i == i'].
struct ExactMOGP {
  KernelKind kind = KernelKind::SquaredExponential;
  KernelParams params;
  bool use_mercer = false;
  MercerBasis mercer;
  Mat L;  // Cholesky factor of K_f
  InputTransform transform;
  std::vector<int> obs_output;
  Vec obs_u;
  Vec obs_y;
  Mat S;       // M x M noise covariance per sample
  Mat k0;      // kernel matrix over observed pairs, no K_f, no noise
  SpdFactor factor;
  Vec alpha;
};

struct ExactMOOptions {
  const InputTransform* transform = nullptr;
  Eigen::Index max_total = 6000;  // guard on total observed count
};

ExactMOGP exact_mo_fit(const MODataset& data, KernelKind kind,
                       const KernelParams& params, const Mat& L_kf,
                       const ExactMOOptions& opt = {});
ExactMOGP exact_mo_fit(const MODataset& data, const MercerBasis& basis,
                       const Mat& L_kf, const ExactMOOptions& opt = {});

Posterior exact_mo_predict(const ExactMOGP& model, const Vec& x_star, int output,
                           CovMode mode = CovMode::Diagonal);

struct ExactMOGrads {
  double lml = 0.0;
  double grad_kernel = 0.0;  // w.r.t. the requested kernel parameter
  Mat grad_L;                // lower triangle of dLML/dL
  double grad_noise = 0.0;   // w.r.t. shared sigma2 (S = sigma2 I)
};

ExactMOGrads exact_mo_lml_grads(const ExactMOGP& model,
                                const std::string& kernel_param, bool want_kf,
                                bool want_noise);

}  // namespace famgp
