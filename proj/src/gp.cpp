#include "famgp/gp.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>

namespace famgp {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

struct Accum {
  Mat B;
  Vec r;
  double yy = 0.0;
  double log_det_sigma = 0.0;
  std::vector<Mat> C;   // Phi^T W dPhi per eigenfunction-dependent name
  std::vector<Vec> rp;  // dPhi^T W Y
};

// One pass over the data in row blocks; W = Sigma^{-1} when fold_noise,
// identity otherwise. Nothing larger than chunk x n is ever alive.
Accum accumulate(const MercerBasis& basis, const InputTransform& tr,
                 const Dataset& data, const std::vector<std::string>& phi_names,
                 bool fold_noise, Eigen::Index chunk) {
  Eigen::Index N = data.X.size();
  if (N == 0) throw std::invalid_argument("empty dataset");
  if (data.Y.size() != N) throw std::invalid_argument("X and Y lengths differ");
  if (!data.homoscedastic() && data.noise_variance.size() != N)
    throw std::invalid_argument("noise_variance must be a scalar or length N");
  for (Eigen::Index i = 0; i < data.noise_variance.size(); ++i)
    if (!(data.noise_variance[i] > 0.0))
      throw std::invalid_argument("noise_variance must be positive");

  int n = basis.n;
  Accum acc;
  acc.B = Mat::Zero(n, n);
  acc.r = Vec::Zero(n);
  acc.C.assign(phi_names.size(), Mat::Zero(n, n));
  acc.rp.assign(phi_names.size(), Vec::Zero(n));
  if (chunk <= 0) chunk = 8192;

  for (Eigen::Index at = 0; at < N; at += chunk) {
    Eigen::Index len = std::min(chunk, N - at);
    Vec u = tr.apply(Vec(data.X.segment(at, len)));
    Mat phi = basis_matrix(basis, u).values;
    Vec y = data.Y.segment(at, len);
    Vec w = Vec::Ones(len);
    if (fold_noise) {
      if (data.homoscedastic())
        w.setConstant(1.0 / data.noise_variance[0]);
      else
        w = data.noise_variance.segment(at, len).cwiseInverse();
    }
    Mat wphi = phi.array().colwise() * w.array();
    Vec wy = w.cwiseProduct(y);
    acc.B.noalias() += phi.transpose() * wphi;
    acc.r.noalias() += wphi.transpose() * y;
    acc.yy += y.dot(wy);
    for (size_t k = 0; k < phi_names.size(); ++k) {
      Mat dphi = basis_matrix_grad(basis, u, phi_names[k]).values;
      acc.C[k].noalias() += wphi.transpose() * dphi;
      acc.rp[k].noalias() += dphi.transpose() * wy;
    }
  }

  if (fold_noise) {
    if (data.homoscedastic())
      acc.log_det_sigma = N * std::log(data.noise_variance[0]);
    else
      acc.log_det_sigma = data.noise_variance.array().log().sum();
  }
  return acc;
}

struct Core {
  SpdFactor factor;  // of LambdaBar = Lambda^{-1} + B
  Vec alpha_prime;
  double log_det_lambda = 0.0;
};

Core solve_core(const MercerBasis& basis, const Mat& B, const Vec& r) {
  Mat lambda_bar = B;
  lambda_bar.diagonal() += basis.lambda.cwiseInverse();
  Core core;
  core.factor = spd_factor(lambda_bar, "lambda_bar");
  core.alpha_prime = core.factor.solve(r);
  core.log_det_lambda = basis.lambda.array().log().sum();
  return core;
}

double lml_from_parts(const Core& core, const Accum& acc, Eigen::Index N) {
  return 0.5 * acc.r.dot(core.alpha_prime) - 0.5 * acc.yy -
         0.5 * (core.factor.log_det + core.log_det_lambda + acc.log_det_sigma) -
         0.5 * static_cast<double>(N) * kLog2Pi;
}

InputTransform resolve_transform(const Dataset& data, const FitOptions& opt) {
  if (opt.transform) return *opt.transform;
  return InputTransform::from_data(data.X);
}

void warn_extrapolation(const Vec& u, KernelKind kind) {
  double worst = 0.0;
  Eigen::Index count = 0;
  for (Eigen::Index i = 0; i < u.size(); ++i) {
    double m = std::abs(u[i]);
    if (m > 1.0) {
      ++count;
      worst = std::max(worst, m);
    }
  }
  if (count > 0)
    std::fprintf(stderr,
                 "famgp: %lld of %lld prediction points lie outside the training "
                 "range (worst |u| = %.4f, %s basis)\n",
                 static_cast<long long>(count), static_cast<long long>(u.size()),
                 worst, to_string(kind).c_str());
}

Posterior finish_posterior(const Mat& phi, const FittedModel& model, CovMode mode,
                           int order) {
  Posterior post;
  post.mode = mode;
  post.derivative_order = order;
  post.mean = phi * model.alpha_prime;
  if (mode == CovMode::Full) {
    Mat cov = phi * model.lambda_bar_inv * phi.transpose();
    post.covariance = 0.5 * (cov + cov.transpose());
  } else if (mode == CovMode::Diagonal) {
    post.variance = ((phi * model.lambda_bar_inv).cwiseProduct(phi)).rowwise().sum();
  }
  return post;
}

// Gradient of the LML w.r.t. sigma2 for homoscedastic data, from the folded
// accumulators: alpha = Sigma^{-1}(y - Phi t).
double noise_gradient(const Accum& acc, const Core& core, double sigma2,
                      Eigen::Index N, const Mat& solve_B) {
  const Vec& t = core.alpha_prime;
  double alpha_sq =
      (acc.yy - 2.0 * acc.r.dot(t) + t.dot(acc.B * t)) / sigma2;
  double trace_kinv = static_cast<double>(N) / sigma2 - solve_B.trace() / sigma2;
  return 0.5 * alpha_sq - 0.5 * trace_kinv;
}

}  // namespace

InputTransform InputTransform::from_range(double lo, double hi) {
  InputTransform tr;
  if (hi < lo) std::swap(lo, hi);
  tr.shift = 0.5 * (lo + hi);
  tr.scale = (hi > lo) ? 0.5 * (hi - lo) : 1.0;
  return tr;
}

InputTransform InputTransform::from_data(const Vec& x) {
  if (x.size() == 0) return {};
  return from_range(x.minCoeff(), x.maxCoeff());
}

Dataset make_dataset(Vec x, Vec y, double noise_variance) {
  if (x.size() == 0) throw std::invalid_argument("empty dataset");
  if (y.size() != x.size()) throw std::invalid_argument("X and Y lengths differ");
  if (!x.allFinite() || !y.allFinite())
    throw std::invalid_argument("dataset entries must be finite");
  if (!(noise_variance > 0.0))
    throw std::invalid_argument("noise_variance must be positive");
  Dataset data;
  data.X = std::move(x);
  data.Y = std::move(y);
  data.noise_variance = Vec::Constant(1, noise_variance);
  return data;
}

FittedModel fit(const Dataset& data, KernelKind kind, const KernelParams& params,
                int n, const FitOptions& opt) {
  return fit(data, make_basis(kind, params, n, opt.eig_floor), opt);
}

FittedModel fit(const Dataset& data, const MercerBasis& basis, const FitOptions& opt) {
  FittedModel model;
  model.basis = basis;
  model.transform = resolve_transform(data, opt);
  Accum acc = accumulate(basis, model.transform, data, {}, true, opt.chunk);
  Core core = solve_core(basis, acc.B, acc.r);
  model.alpha_prime = core.alpha_prime;
  model.lambda_bar_inv = core.factor.inverse();
  Mat g = Mat(basis.lambda.asDiagonal()) - model.lambda_bar_inv;
  model.G = 0.5 * (g + g.transpose());
  model.noise_variance = data.noise_variance;
  return model;
}

Posterior predict(const FittedModel& model, const Vec& x_star, CovMode mode) {
  if (x_star.size() == 0) {
    Posterior empty;
    empty.mode = mode;
    empty.mean = Vec(0);
    if (mode == CovMode::Diagonal) empty.variance = Vec(0);
    if (mode == CovMode::Full) empty.covariance = Mat(0, 0);
    return empty;
  }
  Vec u = model.transform.apply(x_star);
  warn_extrapolation(u, model.basis.kind);
  Mat phi = basis_matrix(model.basis, u).values;
  return finish_posterior(phi, model, mode, 0);
}

Posterior predict_derivative(const FittedModel& model, const Vec& x_star, int k,
                             CovMode mode) {
  if (k < 0) throw std::invalid_argument("derivative order must be non-negative");
  if (k == 0) return predict(model, x_star, mode);
  if (x_star.size() == 0) {
    Posterior empty;
    empty.mode = mode;
    empty.derivative_order = k;
    empty.mean = Vec(0);
    if (mode == CovMode::Diagonal) empty.variance = Vec(0);
    if (mode == CovMode::Full) empty.covariance = Mat(0, 0);
    return empty;
  }
  Vec u = model.transform.apply(x_star);
  warn_extrapolation(u, model.basis.kind);
  double chain = std::pow(1.0 / model.transform.scale, k);
  Mat phi = chain * basis_derivative(model.basis, u, k).values;
  return finish_posterior(phi, model, mode, k);
}

double log_marginal_likelihood(const Dataset& data, KernelKind kind,
                               const KernelParams& params, int n,
                               const FitOptions& opt) {
  return log_marginal_likelihood(data, make_basis(kind, params, n, opt.eig_floor), opt);
}

double log_marginal_likelihood(const Dataset& data, const MercerBasis& basis,
                               const FitOptions& opt) {
  InputTransform tr = resolve_transform(data, opt);
  Accum acc = accumulate(basis, tr, data, {}, true, opt.chunk);
  Core core = solve_core(basis, acc.B, acc.r);
  return lml_from_parts(core, acc, data.X.size());
}

LmlAndGrads lml_value_and_grads(const Dataset& data, const MercerBasis& basis,
                                const std::vector<std::string>& names,
                                double scale, const FitOptions& opt) {
  InputTransform tr = resolve_transform(data, opt);

  std::vector<std::string> phi_names;
  for (const auto& name : names)
    if (name != "noise_variance" && name != "scale" &&
        param_in_eigenfunctions(basis.kind, name))
      phi_names.push_back(name);

  Accum acc = accumulate(basis, tr, data, phi_names, true, opt.chunk);
  Core core = solve_core(basis, acc.B, acc.r);
  Eigen::Index N = data.X.size();

  const Vec& t = core.alpha_prime;
  Vec b = acc.r - acc.B * t;
  Mat solve_B = core.factor.solve(acc.B);       // LambdaBar^{-1} B
  Mat h = acc.B - acc.B * solve_B;              // B - B LambdaBar^{-1} B
  const Vec& lambda = basis.lambda;

  LmlAndGrads out;
  out.lml = lml_from_parts(core, acc, N);
  out.grads = Vec::Zero(static_cast<Eigen::Index>(names.size()));

  for (size_t k = 0; k < names.size(); ++k) {
    const std::string& name = names[k];
    if (name == "noise_variance") {
      if (!data.homoscedastic())
        throw std::invalid_argument(
            "noise_variance gradient requires homoscedastic data");
      out.grads[k] =
          noise_gradient(acc, core, data.noise_variance[0], N, solve_B);
      continue;
    }
    Vec dlambda;
    if (name == "scale") {
      if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
      dlambda = lambda / scale;
    } else {
      // lambda_grad differentiates the unscaled spectrum; the model uses
      // scale * lambda, so the chain rule reapplies the factor.
      dlambda = scale * lambda_grad(basis, name);
    }
    double g = 0.5 * b.dot(dlambda.cwiseProduct(b)) -
               0.5 * dlambda.dot(h.diagonal());
    auto at = std::find(phi_names.begin(), phi_names.end(), name);
    if (at != phi_names.end()) {
      size_t j = static_cast<size_t>(at - phi_names.begin());
      const Mat& C = acc.C[j];
      Vec a_vec = acc.rp[j] - C.transpose() * t;
      Mat solve_C = core.factor.solve(C);
      g += a_vec.dot(lambda.cwiseProduct(b));
      g -= lambda.dot((C - acc.B * solve_C).diagonal());
    }
    out.grads[k] = g;
  }
  return out;
}

double lml_grad_general(const Dataset& data, KernelKind kind,
                        const KernelParams& params, int n, const std::string& name,
                        const FitOptions& opt) {
  MercerBasis basis = make_basis(kind, params, n, opt.eig_floor);
  return lml_value_and_grads(data, basis, {name}, 1.0, opt).grads[0];
}

FastCache make_fast_cache(const Dataset& data, const MercerBasis& basis,
                          const FitOptions& opt) {
  if (!data.homoscedastic())
    throw std::invalid_argument("fast path requires homoscedastic noise");
  InputTransform tr = resolve_transform(data, opt);
  Accum acc = accumulate(basis, tr, data, {}, false, opt.chunk);
  FastCache cache;
  cache.B0 = std::move(acc.B);
  cache.r0 = std::move(acc.r);
  cache.yy = acc.yy;
  cache.N = data.X.size();
  return cache;
}

namespace {

struct FastParts {
  Accum acc;
  Core core;
};

FastParts fast_parts(const FastCache& cache, const MercerBasis& basis, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  if (cache.B0.rows() != basis.n)
    throw std::invalid_argument("cache built for a different truncation");
  FastParts parts;
  parts.acc.B = cache.B0 / sigma2;
  parts.acc.r = cache.r0 / sigma2;
  parts.acc.yy = cache.yy / sigma2;
  parts.acc.log_det_sigma = static_cast<double>(cache.N) * std::log(sigma2);
  parts.core = solve_core(basis, parts.acc.B, parts.acc.r);
  return parts;
}

}  // namespace

double lml_fast(const FastCache& cache, const MercerBasis& basis, double sigma2) {
  FastParts parts = fast_parts(cache, basis, sigma2);
  return lml_from_parts(parts.core, parts.acc, cache.N);
}

LmlAndGrads lml_fast_and_grads(const FastCache& cache, const MercerBasis& basis,
                               double sigma2, const std::vector<std::string>& names,
                               double scale) {
  FastParts parts = fast_parts(cache, basis, sigma2);
  const Vec& t = parts.core.alpha_prime;
  Vec b = parts.acc.r - parts.acc.B * t;
  Mat solve_B = parts.core.factor.solve(parts.acc.B);
  Mat h = parts.acc.B - parts.acc.B * solve_B;

  LmlAndGrads out;
  out.lml = lml_from_parts(parts.core, parts.acc, cache.N);
  out.grads = Vec::Zero(static_cast<Eigen::Index>(names.size()));
  for (size_t k = 0; k < names.size(); ++k) {
    const std::string& name = names[k];
    if (name == "noise_variance") {
      out.grads[k] = noise_gradient(parts.acc, parts.core, sigma2, cache.N, solve_B);
      continue;
    }
    Vec dlambda;
    if (name == "scale") {
      if (!(scale > 0.0)) throw std::invalid_argument("scale must be positive");
      dlambda = basis.lambda / scale;
    } else {
      if (param_in_eigenfunctions(basis.kind, name))
        throw std::invalid_argument(
            name + " enters the eigenfunctions; the fast path cannot train it");
      dlambda = scale * lambda_grad(basis, name);
    }
    out.grads[k] =
        0.5 * b.dot(dlambda.cwiseProduct(b)) - 0.5 * dlambda.dot(h.diagonal());
  }
  return out;
}

double lml_grad_fast(const FastCache& cache, const MercerBasis& basis, double sigma2,
                     const std::string& name) {
  return lml_fast_and_grads(cache, basis, sigma2, {name}).grads[0];
}

}  // namespace famgp
