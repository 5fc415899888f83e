#include "famgp/optimizer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <stdexcept>

namespace famgp {

namespace {

constexpr double kLogitEps = 1e-6;
// Keep squashed coordinates strictly interior so domain checks never trip on
// a proposal the objective is about to reject anyway.
constexpr double kSigmoidLo = 1e-15;
constexpr double kSigmoidHi = 1.0 - 1e-12;

double sigmoid(double t) {
  if (t >= 0.0) return 1.0 / (1.0 + std::exp(-t));
  double e = std::exp(t);
  return e / (1.0 + e);
}

double sigmoid_clamped(double t) {
  return std::clamp(sigmoid(t), kSigmoidLo, kSigmoidHi);
}

double logit(double s) { return std::log(s / (1.0 - s)); }

bool contains(const std::vector<std::string>& v, const std::string& s) {
  return std::find(v.begin(), v.end(), s) != v.end();
}

}  // namespace

double to_unconstrained(double value, ParamTransform t) {
  switch (t) {
    case ParamTransform::Log:
      if (!(value > 0.0)) throw std::invalid_argument("log-space parameter must be positive");
      return std::log(value);
    case ParamTransform::LogitHalfOpen: {
      double s = std::clamp((value - kLogitEps) / (1.0 - kLogitEps), kSigmoidLo, kSigmoidHi);
      return logit(s);
    }
    case ParamTransform::Sigmoid:
      return logit(std::clamp(value, kSigmoidLo, kSigmoidHi));
    case ParamTransform::Identity:
      return value;
  }
  throw std::logic_error("unknown transform");
}

double to_constrained(double theta, ParamTransform t) {
  switch (t) {
    case ParamTransform::Log:
      return std::max(std::exp(theta), 1e-300);
    case ParamTransform::LogitHalfOpen:
      return kLogitEps + (1.0 - kLogitEps) * sigmoid_clamped(theta);
    case ParamTransform::Sigmoid:
      return sigmoid_clamped(theta);
    case ParamTransform::Identity:
      return theta;
  }
  throw std::logic_error("unknown transform");
}

double transform_chain(double value, ParamTransform t) {
  switch (t) {
    case ParamTransform::Log:
      return value;
    case ParamTransform::LogitHalfOpen: {
      double s = (value - kLogitEps) / (1.0 - kLogitEps);
      return (1.0 - kLogitEps) * s * (1.0 - s);
    }
    case ParamTransform::Sigmoid:
      return value * (1.0 - value);
    case ParamTransform::Identity:
      return 1.0;
  }
  throw std::logic_error("unknown transform");
}

double ParamVector::get(const std::string& name) const {
  for (size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return values[static_cast<Eigen::Index>(i)];
  throw std::invalid_argument("no parameter named '" + name + "'");
}

OptimizeResult optimize_joint(const ValueAndGrad& f, const ParamVector& init,
                              const OptimizerConfig& cfg) {
  Eigen::Index k = init.values.size();
  if (k == 0) throw std::invalid_argument("no parameters to optimize");
  if (static_cast<Eigen::Index>(init.names.size()) != k ||
      static_cast<Eigen::Index>(init.transforms.size()) != k)
    throw std::invalid_argument("parameter names, values, and transforms differ in length");
  if (cfg.max_iters < 0 || !(cfg.initial_step > 0.0) || !(cfg.grad_tol > 0.0) ||
      !(cfg.step_shrink > 0.0) || !(cfg.step_shrink < 1.0) || !(cfg.step_grow >= 1.0))
    throw std::invalid_argument("optimizer configuration out of range");

  auto to_vals = [&](const Vec& theta) {
    Vec v(k);
    for (Eigen::Index i = 0; i < k; ++i)
      v[i] = to_constrained(theta[i], init.transforms[static_cast<size_t>(i)]);
    return v;
  };
  auto pull_grad = [&](const Vec& vals, const Vec& grad) {
    Vec g(k);
    for (Eigen::Index i = 0; i < k; ++i)
      g[i] = grad[i] * transform_chain(vals[i], init.transforms[static_cast<size_t>(i)]);
    return g;
  };

  auto t0 = std::chrono::steady_clock::now();
  auto elapsed = [&]() {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  };

  Vec theta(k);
  for (Eigen::Index i = 0; i < k; ++i)
    theta[i] = to_unconstrained(init.values[i], init.transforms[static_cast<size_t>(i)]);
  Vec vals = to_vals(theta);

  ObjectiveEval cur = f(vals);
  if (cur.grad.size() != k)
    throw std::invalid_argument("gradient length differs from the parameter count");
  if (!std::isfinite(cur.value) || !cur.grad.allFinite())
    throw std::invalid_argument("objective or gradient is not finite at the initial point");

  Vec g = pull_grad(vals, cur.grad);
  double gnorm = g.norm();
  double step = cfg.initial_step;

  OptimizeResult out;
  out.trace.push_back({0, cur.value, gnorm, 0.0, 0.0});
  bool converged = gnorm < cfg.grad_tol;
  int iter = 0;
  while (!converged && iter < cfg.max_iters && step >= cfg.min_step) {
    ++iter;
    Vec cand_theta = theta + step * g;
    Vec cand_vals = to_vals(cand_theta);
    ObjectiveEval e = f(cand_vals);
    bool ok = std::isfinite(e.value) && e.grad.size() == k && e.grad.allFinite();
    if (ok && e.value > cur.value) {
      theta = std::move(cand_theta);
      vals = std::move(cand_vals);
      cur = std::move(e);
      g = pull_grad(vals, cur.grad);
      gnorm = g.norm();
      out.trace.push_back({iter, cur.value, gnorm, step, elapsed()});
      step *= cfg.step_grow;
      converged = gnorm < cfg.grad_tol;
    } else {
      step *= cfg.step_shrink;
    }
  }

  out.params.names = init.names;
  out.params.transforms = init.transforms;
  out.params.values = vals;
  out.value = cur.value;
  out.grad_norm = gnorm;
  out.iters = iter;
  out.converged = converged;
  return out;
}

OptimizeResult optimize(const Objective& objective, const Gradient& gradient,
                        const ParamVector& init, const OptimizerConfig& config) {
  ValueAndGrad joint = [&](const Vec& vals) {
    return ObjectiveEval{objective(vals), gradient(vals)};
  };
  return optimize_joint(joint, init, config);
}

KernelParams default_train_init(KernelKind kind) {
  KernelParams p;
  switch (kind) {
    case KernelKind::SquaredExponential:
      p.l_se = 0.5;
      break;
    case KernelKind::Periodic:
      p.w_pr = 0.5;
      break;
    case KernelKind::Chebyshev:
      p.a = 0.5;
      p.b = 0.5;
      break;
  }
  return p;
}

double default_noise_init(const Vec& y) {
  if (y.size() == 0) throw std::invalid_argument("dataset is empty");
  double mean = y.mean();
  double var = (y.array() - mean).square().sum() / static_cast<double>(y.size());
  return std::max(var / 10.0, 1e-8);
}

Mat empirical_coreg_init(const Mat& y, double noise_variance, double floor) {
  Eigen::Index n = y.rows(), m = y.cols();
  if (n < 2) throw std::invalid_argument("need at least two samples");
  Mat centered = y.rowwise() - y.colwise().mean();
  Mat cov = centered.transpose() * centered / static_cast<double>(n);
  cov -= noise_variance * Mat::Identity(m, m);
  Eigen::SelfAdjointEigenSolver<Mat> es(cov);
  if (es.info() != Eigen::Success)
    throw std::runtime_error("empirical covariance eigendecomposition failed");
  Vec d = es.eigenvalues().cwiseMax(floor);
  Mat fixed = es.eigenvectors() * d.asDiagonal() * es.eigenvectors().transpose();
  Eigen::LLT<Mat> llt(fixed);
  if (llt.info() != Eigen::Success)
    throw std::runtime_error("empirical covariance is not positive definite");
  return Mat(llt.matrixL());
}

namespace {

ParamTransform kernel_transform(const std::string& name) {
  if (name == "a") return ParamTransform::LogitHalfOpen;
  if (name == "b") return ParamTransform::Sigmoid;
  return ParamTransform::Log;
}

// Objective-facing parameter list for single-output training; the names are
// exactly what lml_value_and_grads / lml_fast_and_grads / exact_lml_and_grad
// accept.
struct SingleLayout {
  std::vector<std::string> names;
  std::vector<ParamTransform> transforms;
  std::vector<std::string> kernel_names;
};

SingleLayout single_layout(KernelKind kind, const TrainOptions& opt) {
  SingleLayout lay;
  for (const std::string& name : kernel_param_names(kind)) {
    if (contains(opt.fixed, name)) continue;
    lay.names.push_back(name);
    lay.transforms.push_back(kernel_transform(name));
    lay.kernel_names.push_back(name);
  }
  if (opt.train_scale) {
    lay.names.push_back("scale");
    lay.transforms.push_back(ParamTransform::Log);
  }
  if (opt.train_noise) {
    lay.names.push_back("noise_variance");
    lay.transforms.push_back(ParamTransform::Log);
  }
  if (lay.names.empty()) throw std::invalid_argument("no trainable parameters");
  return lay;
}

void apply_single(const SingleLayout& lay, const Vec& vals, KernelParams& p, double& scale,
                  double& noise) {
  for (size_t i = 0; i < lay.names.size(); ++i) {
    double v = vals[static_cast<Eigen::Index>(i)];
    if (lay.names[i] == "scale")
      scale = v;
    else if (lay.names[i] == "noise_variance")
      noise = v;
    else
      set_param(p, lay.names[i], v);
  }
}

ParamVector single_init(const SingleLayout& lay, const KernelParams& init, double scale0,
                        double noise0) {
  ParamVector pv;
  pv.names = lay.names;
  pv.transforms = lay.transforms;
  pv.values.resize(static_cast<Eigen::Index>(lay.names.size()));
  for (size_t i = 0; i < lay.names.size(); ++i) {
    double v;
    if (lay.names[i] == "scale")
      v = scale0;
    else if (lay.names[i] == "noise_variance")
      v = noise0;
    else
      v = get_param(init, lay.names[i]);
    pv.values[static_cast<Eigen::Index>(i)] = v;
  }
  return pv;
}

double resolve_noise_init(const Dataset& data, const TrainOptions& opt) {
  if (!opt.train_noise) return data.homoscedastic() ? data.noise_variance[0] : -1.0;
  if (!data.homoscedastic())
    throw std::invalid_argument("noise training requires homoscedastic data");
  return opt.init_noise > 0.0 ? opt.init_noise : default_noise_init(data.Y);
}

}  // namespace

TrainResult train_general(const Dataset& data, KernelKind kind, const KernelParams& init,
                          int n, const TrainOptions& opt) {
  validate_params(kind, init);
  if (data.X.size() == 0) throw std::invalid_argument("dataset is empty");
  SingleLayout lay = single_layout(kind, opt);
  InputTransform tr = opt.transform ? *opt.transform : InputTransform::from_data(data.X);
  FitOptions fo;
  fo.chunk = opt.chunk;
  fo.transform = &tr;

  Dataset work = data;
  double noise0 = resolve_noise_init(data, opt);
  int n_eff = make_basis(kind, init, n, opt.eig_floor).n;

  ValueAndGrad f = [&](const Vec& vals) {
    KernelParams p = init;
    double scale = opt.init_scale, noise = noise0;
    apply_single(lay, vals, p, scale, noise);
    if (opt.train_noise) work.noise_variance[0] = noise;
    MercerBasis basis = make_basis(kind, p, n_eff, 0.0);
    if (scale != 1.0) basis.lambda *= scale;
    LmlAndGrads r = lml_value_and_grads(work, basis, lay.names, scale, fo);
    return ObjectiveEval{r.lml, r.grads};
  };

  OptimizeResult res = optimize_joint(f, single_init(lay, init, opt.init_scale, noise0),
                                      opt.config);

  TrainResult out;
  out.params = init;
  out.scale = opt.init_scale;
  double noise = noise0;
  apply_single(lay, res.params.values, out.params, out.scale, noise);
  if (opt.train_noise) work.noise_variance[0] = noise;
  out.noise_variance = work.homoscedastic() ? work.noise_variance[0] : -1.0;
  MercerBasis full = make_basis(kind, out.params, n, opt.eig_floor);
  if (out.scale != 1.0) full.lambda *= out.scale;
  out.model = fit(work, full, fo);
  out.lml = res.value;
  out.iters = res.iters;
  out.converged = res.converged;
  if (opt.record_trace) out.trace = std::move(res.trace);
  return out;
}

TrainResult train_fast_path(const Dataset& data, KernelKind kind, const KernelParams& init,
                            int n, const TrainOptions& opt) {
  validate_params(kind, init);
  if (data.X.size() == 0) throw std::invalid_argument("dataset is empty");
  if (!data.homoscedastic())
    throw std::invalid_argument("the fast path requires homoscedastic noise");
  SingleLayout lay = single_layout(kind, opt);
  for (const std::string& name : lay.kernel_names)
    if (param_in_eigenfunctions(kind, name))
      throw std::invalid_argument("parameter '" + name +
                                  "' enters the eigenfunctions; the fast path cannot "
                                  "train it");

  InputTransform tr = opt.transform ? *opt.transform : InputTransform::from_data(data.X);
  FitOptions fo;
  fo.chunk = opt.chunk;
  fo.transform = &tr;

  double noise0 = resolve_noise_init(data, opt);
  double noise = noise0;
  int n_eff = make_basis(kind, init, n, opt.eig_floor).n;
  MercerBasis cache_basis = make_basis(kind, init, n_eff, 0.0);
  FastCache cache = make_fast_cache(data, cache_basis, fo);

  ValueAndGrad f = [&](const Vec& vals) {
    KernelParams p = init;
    double scale = opt.init_scale;
    noise = noise0;
    apply_single(lay, vals, p, scale, noise);
    MercerBasis basis = make_basis(kind, p, n_eff, 0.0);
    if (scale != 1.0) basis.lambda *= scale;
    LmlAndGrads r = lml_fast_and_grads(cache, basis, noise, lay.names, scale);
    return ObjectiveEval{r.lml, r.grads};
  };

  OptimizeResult res = optimize_joint(f, single_init(lay, init, opt.init_scale, noise0),
                                      opt.config);

  TrainResult out;
  out.params = init;
  out.scale = opt.init_scale;
  noise = noise0;
  apply_single(lay, res.params.values, out.params, out.scale, noise);
  out.noise_variance = noise;
  Dataset work = data;
  work.noise_variance = Vec::Constant(1, noise);
  MercerBasis full = make_basis(kind, out.params, n, opt.eig_floor);
  if (out.scale != 1.0) full.lambda *= out.scale;
  out.model = fit(work, full, fo);
  out.lml = res.value;
  out.iters = res.iters;
  out.converged = res.converged;
  if (opt.record_trace) out.trace = std::move(res.trace);
  return out;
}

ExactTrainResult train_exact(const Dataset& data, KernelKind kind,
                             const KernelParams& init, const TrainOptions& opt) {
  validate_params(kind, init);
  if (data.X.size() == 0) throw std::invalid_argument("dataset is empty");
  SingleLayout lay = single_layout(kind, opt);
  InputTransform tr = opt.transform ? *opt.transform : InputTransform::from_data(data.X);

  Dataset work = data;
  double noise0 = resolve_noise_init(data, opt);

  auto fit_at = [&](const KernelParams& p, double scale) {
    ExactOptions eo;
    eo.transform = &tr;
    eo.scale = scale;
    return exact_fit(work, kind, p, eo);
  };

  ValueAndGrad f = [&](const Vec& vals) {
    KernelParams p = init;
    double scale = opt.init_scale, noise = noise0;
    apply_single(lay, vals, p, scale, noise);
    if (opt.train_noise) work.noise_variance[0] = noise;
    ExactGP model = fit_at(p, scale);
    ObjectiveEval e;
    e.grad.resize(static_cast<Eigen::Index>(lay.names.size()));
    for (size_t i = 0; i < lay.names.size(); ++i) {
      auto [value, grad] = exact_lml_and_grad(model, lay.names[i]);
      e.value = value;
      e.grad[static_cast<Eigen::Index>(i)] = grad;
    }
    return e;
  };

  OptimizeResult res = optimize_joint(f, single_init(lay, init, opt.init_scale, noise0),
                                      opt.config);

  ExactTrainResult out;
  out.params = init;
  out.scale = opt.init_scale;
  double noise = noise0;
  apply_single(lay, res.params.values, out.params, out.scale, noise);
  if (opt.train_noise) work.noise_variance[0] = noise;
  out.noise_variance = work.homoscedastic() ? work.noise_variance[0] : -1.0;
  out.model = fit_at(out.params, out.scale);
  out.lml = res.value;
  out.iters = res.iters;
  out.converged = res.converged;
  if (opt.record_trace) out.trace = std::move(res.trace);
  return out;
}

namespace {

struct MOLayout {
  std::vector<std::string> names;
  std::vector<ParamTransform> transforms;
  std::vector<std::string> kernel_names;
  std::vector<std::pair<int, int>> l_entries;  // (row, col), row >= col
  int l_start = -1;
  int noise_idx = -1;
};

MOLayout mo_layout(KernelKind kind, int m, const MOTrainOptions& opt) {
  MOLayout lay;
  for (const std::string& name : kernel_param_names(kind)) {
    if (contains(opt.fixed, name)) continue;
    lay.names.push_back(name);
    lay.transforms.push_back(kernel_transform(name));
    lay.kernel_names.push_back(name);
  }
  lay.l_start = static_cast<int>(lay.names.size());
  for (int p = 0; p < m; ++p)
    for (int q = 0; q <= p; ++q) {
      lay.names.push_back("L(" + std::to_string(p) + "," + std::to_string(q) + ")");
      lay.transforms.push_back(p == q ? ParamTransform::Log : ParamTransform::Identity);
      lay.l_entries.emplace_back(p, q);
    }
  if (opt.train_noise) {
    lay.noise_idx = static_cast<int>(lay.names.size());
    lay.names.push_back("noise_variance");
    lay.transforms.push_back(ParamTransform::Log);
  }
  return lay;
}

void apply_mo(const MOLayout& lay, const Vec& vals, KernelParams& p, Mat& l, double& noise) {
  for (size_t i = 0; i < lay.kernel_names.size(); ++i)
    set_param(p, lay.kernel_names[i], vals[static_cast<Eigen::Index>(i)]);
  for (size_t e = 0; e < lay.l_entries.size(); ++e)
    l(lay.l_entries[e].first, lay.l_entries[e].second) =
        vals[static_cast<Eigen::Index>(lay.l_start + static_cast<int>(e))];
  if (lay.noise_idx >= 0) noise = vals[lay.noise_idx];
}

ParamVector mo_init(const MOLayout& lay, const KernelParams& init, const Mat& l0,
                    double noise0) {
  ParamVector pv;
  pv.names = lay.names;
  pv.transforms = lay.transforms;
  pv.values.resize(static_cast<Eigen::Index>(lay.names.size()));
  for (size_t i = 0; i < lay.kernel_names.size(); ++i)
    pv.values[static_cast<Eigen::Index>(i)] = get_param(init, lay.kernel_names[i]);
  for (size_t e = 0; e < lay.l_entries.size(); ++e)
    pv.values[static_cast<Eigen::Index>(lay.l_start + static_cast<int>(e))] =
        l0(lay.l_entries[e].first, lay.l_entries[e].second);
  if (lay.noise_idx >= 0) pv.values[lay.noise_idx] = noise0;
  return pv;
}

Mat resolve_l_init(const MODataset& data, const MOTrainOptions& opt, double noise0) {
  if (opt.init_L.size() > 0) {
    coreg_from_cholesky(opt.init_L);
    if (opt.init_L.rows() != data.outputs())
      throw std::invalid_argument("init_L dimension differs from the output count");
    return opt.init_L;
  }
  double noise = noise0 > 0.0 ? noise0 : data.S.diagonal().mean();
  return empirical_coreg_init(data.Y, noise);
}

}  // namespace

MOTrainResult train_multioutput(const MODataset& data, KernelKind kind,
                                const KernelParams& init, int n,
                                const MOTrainOptions& opt) {
  validate_params(kind, init);
  if (!data.isotopic() || data.has_full_sigma())
    throw std::invalid_argument(
        "multi-output training requires fully observed outputs with separable noise");
  int m = data.outputs();
  MOLayout lay = mo_layout(kind, m, opt);
  InputTransform tr = opt.transform ? *opt.transform : InputTransform::from_data(data.X);
  MOFitOptions mfo;
  mfo.chunk = opt.chunk;
  mfo.transform = &tr;

  MODataset work = data;
  double noise0 = -1.0;
  if (opt.train_noise) {
    noise0 = opt.init_noise > 0.0
                 ? opt.init_noise
                 : default_noise_init(Eigen::Map<const Vec>(data.Y.data(), data.Y.size()));
  }
  Mat l0 = resolve_l_init(data, opt, noise0);
  int n_eff = make_basis(kind, init, n, opt.eig_floor).n;

  ValueAndGrad f = [&](const Vec& vals) {
    KernelParams p = init;
    Mat l = l0;
    double noise = noise0;
    apply_mo(lay, vals, p, l, noise);
    if (opt.train_noise) work.S = noise * Mat::Identity(m, m);
    MercerBasis basis = make_basis(kind, p, n_eff, 0.0);

    ObjectiveEval e;
    e.grad.resize(static_cast<Eigen::Index>(lay.names.size()));
    size_t n_kernel = lay.kernel_names.size();
    size_t calls = std::max<size_t>(n_kernel, 1);
    for (size_t i = 0; i < calls; ++i) {
      bool first = i == 0;
      std::string pname = i < n_kernel ? lay.kernel_names[i] : std::string();
      MOGrads mg = mo_lml_and_grads(work, basis, l, pname, first, first && opt.train_noise,
                                    mfo);
      if (first) {
        e.value = mg.lml;
        for (size_t k = 0; k < lay.l_entries.size(); ++k)
          e.grad[static_cast<Eigen::Index>(lay.l_start + static_cast<int>(k))] =
              mg.grad_L(lay.l_entries[k].first, lay.l_entries[k].second);
        if (lay.noise_idx >= 0) e.grad[lay.noise_idx] = mg.grad_noise;
      }
      if (i < n_kernel) e.grad[static_cast<Eigen::Index>(i)] = mg.grad_kernel;
    }
    return e;
  };

  OptimizeResult res = optimize_joint(f, mo_init(lay, init, l0, noise0), opt.config);

  MOTrainResult out;
  out.params = init;
  out.L = l0;
  double noise = noise0;
  apply_mo(lay, res.params.values, out.params, out.L, noise);
  if (opt.train_noise) work.S = noise * Mat::Identity(m, m);
  out.noise_variance = opt.train_noise ? noise : work.S.diagonal().mean();
  MercerBasis full = make_basis(kind, out.params, n, opt.eig_floor);
  out.model = mo_fit(work, full, out.L, mfo);
  out.lml = res.value;
  out.iters = res.iters;
  out.converged = res.converged;
  if (opt.record_trace) out.trace = std::move(res.trace);
  return out;
}

ExactMOTrainResult train_exact_multioutput(const MODataset& data, KernelKind kind,
                                           const KernelParams& init,
                                           const MOTrainOptions& opt) {
  validate_params(kind, init);
  int m = data.outputs();
  MOLayout lay = mo_layout(kind, m, opt);
  InputTransform tr = opt.transform ? *opt.transform : InputTransform::from_data(data.X);
  ExactMOOptions eo;
  eo.transform = &tr;

  MODataset work = data;
  double noise0 = -1.0;
  if (opt.train_noise) {
    noise0 = opt.init_noise > 0.0
                 ? opt.init_noise
                 : default_noise_init(Eigen::Map<const Vec>(data.Y.data(), data.Y.size()));
  }
  Mat l0 = resolve_l_init(data, opt, noise0);

  ValueAndGrad f = [&](const Vec& vals) {
    KernelParams p = init;
    Mat l = l0;
    double noise = noise0;
    apply_mo(lay, vals, p, l, noise);
    if (opt.train_noise) work.S = noise * Mat::Identity(m, m);
    ExactMOGP model = exact_mo_fit(work, kind, p, l, eo);

    ObjectiveEval e;
    e.grad.resize(static_cast<Eigen::Index>(lay.names.size()));
    size_t n_kernel = lay.kernel_names.size();
    size_t calls = std::max<size_t>(n_kernel, 1);
    for (size_t i = 0; i < calls; ++i) {
      bool first = i == 0;
      std::string pname = i < n_kernel ? lay.kernel_names[i] : std::string();
      ExactMOGrads eg = exact_mo_lml_grads(model, pname, first, first && opt.train_noise);
      if (first) {
        e.value = eg.lml;
        for (size_t k = 0; k < lay.l_entries.size(); ++k)
          e.grad[static_cast<Eigen::Index>(lay.l_start + static_cast<int>(k))] =
              eg.grad_L(lay.l_entries[k].first, lay.l_entries[k].second);
        if (lay.noise_idx >= 0) e.grad[lay.noise_idx] = eg.grad_noise;
      }
      if (i < n_kernel) e.grad[static_cast<Eigen::Index>(i)] = eg.grad_kernel;
    }
    return e;
  };

  OptimizeResult res = optimize_joint(f, mo_init(lay, init, l0, noise0), opt.config);

  ExactMOTrainResult out;
  out.params = init;
  out.L = l0;
  double noise = noise0;
  apply_mo(lay, res.params.values, out.params, out.L, noise);
  if (opt.train_noise) work.S = noise * Mat::Identity(m, m);
  out.noise_variance = opt.train_noise ? noise : work.S.diagonal().mean();
  out.model = exact_mo_fit(work, kind, out.params, out.L, eo);
  out.lml = res.value;
  out.iters = res.iters;
  out.converged = res.converged;
  if (opt.record_trace) out.trace = std::move(res.trace);
  return out;
}

}  // namespace famgp
