#include "famgp/exact_gp.hpp"

#include <cmath>
#include <stdexcept>

namespace famgp {
namespace {

constexpr double kLog2Pi = 1.8378770664093454836;

Mat closed_form_matrix(KernelKind kind, const KernelParams& p, const Vec& u1,
                       const Vec& u2) {
  Mat k(u1.size(), u2.size());
  for (Eigen::Index i = 0; i < u1.size(); ++i)
    for (Eigen::Index j = 0; j < u2.size(); ++j)
      k(i, j) = kernel_eval(kind, p, u1[i], u2[j]);
  return k;
}

double cheb_series_g(double b, double cosphi) {
  return (cosphi - b) / (1.0 - 2.0 * b * cosphi + b * b);
}

double cheb_series_g_db(double b, double cosphi) {
  double d = 1.0 - 2.0 * b * cosphi + b * b;
  double num = -d + 2.0 * (cosphi - b) * (cosphi - b);
  return num / (d * d);
}

// d k(u1,u2) / d name for the closed forms, unscaled.
Mat closed_form_grad(KernelKind kind, const KernelParams& p, const std::string& name,
                     const Vec& u1, const Vec& u2) {
  Mat g(u1.size(), u2.size());
  for (Eigen::Index i = 0; i < u1.size(); ++i)
    for (Eigen::Index j = 0; j < u2.size(); ++j) {
      double x = u1[i], y = u2[j], d = x - y;
      double k = kernel_eval(kind, p, x, y);
      double val = 0.0;
      switch (kind) {
        case KernelKind::SquaredExponential:
          if (name == "l_se")
            val = k * d * d / (p.l_se * p.l_se * p.l_se);
          else
            throw std::invalid_argument("unknown squared-exponential parameter: " + name);
          break;
        case KernelKind::Periodic: {
          double s = std::sin(0.5 * p.f_pr * d);
          if (name == "w_pr")
            val = k * 4.0 * s * s / (p.w_pr * p.w_pr * p.w_pr);
          else if (name == "f_pr")
            val = -k * d * std::sin(p.f_pr * d) / (p.w_pr * p.w_pr);
          else
            throw std::invalid_argument("unknown periodic parameter: " + name);
          break;
        }
        case KernelKind::Chebyshev: {
          if (name == "a") {
            val = (k - 1.0) / p.a;
          } else if (name == "b") {
            double th = std::acos(x), ps = std::acos(y);
            double cm = std::cos(th - ps), cp = std::cos(th + ps);
            double r = cheb_series_g(p.b, cm) + cheb_series_g(p.b, cp);
            double dr = cheb_series_g_db(p.b, cm) + cheb_series_g_db(p.b, cp);
            val = p.a * (-r + (1.0 - p.b) * dr);
          } else {
            throw std::invalid_argument("unknown chebyshev parameter: " + name);
          }
          break;
        }
      }
      g(i, j) = val;
    }
  return g;
}

Mat model_kernel(const ExactGP& m, const Vec& u1, const Vec& u2) {
  Mat k = m.use_mercer ? reconstruct_kernel(m.mercer, u1, u2)
                       : closed_form_matrix(m.kind, m.params, u1, u2);
  return m.scale * k;
}

ExactGP fit_common(const Dataset& data, ExactGP model, const ExactOptions& opt) {
  Eigen::Index n = data.X.size();
  if (n == 0) throw std::invalid_argument("empty dataset");
  if (n > opt.max_n)
    throw std::invalid_argument("dense path refuses N > " + std::to_string(opt.max_n));
  if (data.Y.size() != n) throw std::invalid_argument("X and Y lengths differ");
  model.scale = opt.scale;
  model.transform = opt.transform ? *opt.transform : InputTransform::from_data(data.X);
  model.U = model.transform.apply(data.X);
  model.Y = data.Y;
  model.noise_variance = data.noise_variance;
  Mat k = model_kernel(model, model.U, model.U);
  if (data.homoscedastic())
    k.diagonal().array() += data.noise_variance[0];
  else
    k.diagonal() += data.noise_variance;
  model.factor = spd_factor(k, "exact_gp_covariance");
  model.alpha = model.factor.solve(model.Y);
  return model;
}

}  // namespace

ExactGP exact_fit(const Dataset& data, KernelKind kind, const KernelParams& params,
                  const ExactOptions& opt) {
  validate_params(kind, params);
  ExactGP model;
  model.kind = kind;
  model.params = params;
  return fit_common(data, std::move(model), opt);
}

ExactGP exact_fit(const Dataset& data, const MercerBasis& basis,
                  const ExactOptions& opt) {
  ExactGP model;
  model.kind = basis.kind;
  model.params = basis.params;
  model.use_mercer = true;
  model.mercer = basis;
  return fit_common(data, std::move(model), opt);
}

Posterior exact_predict(const ExactGP& model, const Vec& x_star, CovMode mode) {
  Posterior post;
  post.mode = mode;
  Vec u = model.transform.apply(x_star);
  Mat cross = model_kernel(model, u, model.U);
  post.mean = cross * model.alpha;
  if (mode == CovMode::Full) {
    Mat prior = model_kernel(model, u, u);
    Mat cov = prior - cross * model.factor.solve(cross.transpose());
    post.covariance = 0.5 * (cov + cov.transpose());
  } else if (mode == CovMode::Diagonal) {
    Mat solved = model.factor.solve(cross.transpose());
    Vec prior(u.size());
    for (Eigen::Index i = 0; i < u.size(); ++i)
      prior[i] = model.scale * (model.use_mercer
                                    ? reconstruct_kernel(model.mercer,
                                                         u.segment(i, 1),
                                                         u.segment(i, 1))(0, 0)
                                    : kernel_eval(model.kind, model.params, u[i], u[i]));
    post.variance = prior - (cross.transpose().cwiseProduct(solved)).colwise().sum().transpose();
  }
  return post;
}

Posterior exact_predict_derivative(const ExactGP& model, const Vec& x_star, int k,
                                   CovMode mode) {
  if (!model.use_mercer)
    throw std::logic_error("derivative prediction requires the mercer kernel mode");
  if (k < 1) throw std::invalid_argument("derivative order must be >= 1");
  Posterior post;
  post.mode = mode;
  post.derivative_order = k;
  Vec u = model.transform.apply(x_star);
  double chain = std::pow(1.0 / model.transform.scale, k);
  Mat dphi = chain * basis_derivative(model.mercer, u, k).values;
  Mat phi_train = basis_matrix(model.mercer, model.U).values;
  Mat lam = model.mercer.lambda.asDiagonal();
  Mat cross = model.scale * (dphi * lam * phi_train.transpose());
  post.mean = cross * model.alpha;
  if (mode != CovMode::None) {
    Mat prior = model.scale * (dphi * lam * dphi.transpose());
    Mat cov = prior - cross * model.factor.solve(cross.transpose());
    if (mode == CovMode::Full)
      post.covariance = 0.5 * (cov + cov.transpose());
    else
      post.variance = cov.diagonal();
  }
  return post;
}

double exact_lml(const ExactGP& model) {
  double n = static_cast<double>(model.Y.size());
  return -0.5 * model.Y.dot(model.alpha) - 0.5 * model.factor.log_det -
         0.5 * n * kLog2Pi;
}

std::pair<double, double> exact_lml_and_grad(const ExactGP& model,
                                             const std::string& name) {
  Eigen::Index n = model.Y.size();
  Mat dk;
  if (name == "noise_variance") {
    dk = Mat::Identity(n, n);
  } else if (name == "scale") {
    dk = model_kernel(model, model.U, model.U) / model.scale;
  } else if (model.use_mercer) {
    Vec dlambda = lambda_grad(model.mercer, name);
    Mat phi = basis_matrix(model.mercer, model.U).values;
    dk = model.scale * (phi * dlambda.asDiagonal() * phi.transpose());
    if (param_in_eigenfunctions(model.mercer.kind, name)) {
      Mat dphi = basis_matrix_grad(model.mercer, model.U, name).values;
      Mat lam = model.mercer.lambda.asDiagonal();
      Mat cross = model.scale * (dphi * lam * phi.transpose());
      dk += cross + cross.transpose();
    }
  } else {
    dk = model.scale * closed_form_grad(model.kind, model.params, name, model.U, model.U);
  }
  Mat kinv = model.factor.inverse();
  Mat w = model.alpha * model.alpha.transpose() - kinv;
  double grad = 0.5 * w.cwiseProduct(dk).sum();
  return {exact_lml(model), grad};
}

namespace {

Mat mo_kernel_block(const ExactMOGP& m, const Vec& u1, const Vec& u2) {
  return m.use_mercer ? reconstruct_kernel(m.mercer, u1, u2)
                      : closed_form_matrix(m.kind, m.params, u1, u2);
}

ExactMOGP mo_fit_common(const MODataset& data, ExactMOGP model, const Mat& L_kf,
                        const ExactMOOptions& opt) {
  int m_outputs = data.outputs();
  if (L_kf.rows() != m_outputs || L_kf.cols() != m_outputs)
    throw std::invalid_argument("K_f factor dimension mismatch");
  Eigen::Index total = data.total_observed();
  if (total == 0) throw std::invalid_argument("empty dataset");
  if (total > opt.max_total)
    throw std::invalid_argument("dense multi-output path refuses NM > " +
                                std::to_string(opt.max_total));
  model.L = L_kf;
  model.transform = opt.transform ? *opt.transform : InputTransform::from_data(data.X);
  model.S = data.S;

  Vec u_all = model.transform.apply(data.X);
  model.obs_output.reserve(total);
  std::vector<Eigen::Index> obs_row;
  obs_row.reserve(total);
  for (int j = 0; j < m_outputs; ++j)
    for (Eigen::Index i : data.observed_rows(j)) {
      model.obs_output.push_back(j);
      obs_row.push_back(i);
    }
  model.obs_u.resize(total);
  model.obs_y.resize(total);
  for (Eigen::Index t = 0; t < total; ++t) {
    model.obs_u[t] = u_all[obs_row[t]];
    model.obs_y[t] = data.Y(obs_row[t], model.obs_output[t]);
  }

  model.k0 = mo_kernel_block(model, model.obs_u, model.obs_u);
  Mat kf = L_kf * L_kf.transpose();
  Mat k(total, total);
  for (Eigen::Index s = 0; s < total; ++s)
    for (Eigen::Index t = 0; t < total; ++t) {
      k(s, t) = kf(model.obs_output[s], model.obs_output[t]) * model.k0(s, t);
      if (obs_row[s] == obs_row[t])
        k(s, t) += data.S(model.obs_output[s], model.obs_output[t]);
    }
  model.factor = spd_factor(k, "exact_mo_covariance");
  model.alpha = model.factor.solve(model.obs_y);
  return model;
}

}  // namespace

ExactMOGP exact_mo_fit(const MODataset& data, KernelKind kind,
                       const KernelParams& params, const Mat& L_kf,
                       const ExactMOOptions& opt) {
  validate_params(kind, params);
  ExactMOGP model;
  model.kind = kind;
  model.params = params;
  return mo_fit_common(data, std::move(model), L_kf, opt);
}

ExactMOGP exact_mo_fit(const MODataset& data, const MercerBasis& basis,
                       const Mat& L_kf, const ExactMOOptions& opt) {
  ExactMOGP model;
  model.kind = basis.kind;
  model.params = basis.params;
  model.use_mercer = true;
  model.mercer = basis;
  return mo_fit_common(data, std::move(model), L_kf, opt);
}

Posterior exact_mo_predict(const ExactMOGP& model, const Vec& x_star, int output,
                           CovMode mode) {
  int m_outputs = static_cast<int>(model.L.rows());
  if (output < 0 || output >= m_outputs)
    throw std::invalid_argument("output index out of range");
  Posterior post;
  post.mode = mode;
  Vec u = model.transform.apply(x_star);
  Mat kf = model.L * model.L.transpose();
  Mat base = mo_kernel_block(model, u, model.obs_u);
  Mat cross(u.size(), model.obs_u.size());
  for (Eigen::Index t = 0; t < model.obs_u.size(); ++t)
    cross.col(t) = kf(output, model.obs_output[t]) * base.col(t);
  post.mean = cross * model.alpha;
  if (mode != CovMode::None) {
    Mat prior = kf(output, output) * mo_kernel_block(model, u, u);
    Mat cov = prior - cross * model.factor.solve(cross.transpose());
    if (mode == CovMode::Full)
      post.covariance = 0.5 * (cov + cov.transpose());
    else
      post.variance = cov.diagonal();
  }
  return post;
}

ExactMOGrads exact_mo_lml_grads(const ExactMOGP& model,
                                const std::string& kernel_param, bool want_kf,
                                bool want_noise) {
  Eigen::Index total = model.obs_y.size();
  int m_outputs = static_cast<int>(model.L.rows());
  ExactMOGrads out;
  out.lml = -0.5 * model.obs_y.dot(model.alpha) - 0.5 * model.factor.log_det -
            0.5 * static_cast<double>(total) * kLog2Pi;

  Mat kinv = model.factor.inverse();
  Mat w = model.alpha * model.alpha.transpose() - kinv;
  Mat kf = model.L * model.L.transpose();

  if (!kernel_param.empty()) {
    if (model.use_mercer)
      throw std::logic_error("kernel-parameter gradients need the closed-form kernel");
    Mat dk0 = closed_form_grad(model.kind, model.params, kernel_param, model.obs_u,
                               model.obs_u);
    double g = 0.0;
    for (Eigen::Index s = 0; s < total; ++s)
      for (Eigen::Index t = 0; t < total; ++t)
        g += w(s, t) * kf(model.obs_output[s], model.obs_output[t]) * dk0(s, t);
    out.grad_kernel = 0.5 * g;
  }

  if (want_kf) {
    // dK/dL_pq = (E_pq L^T + L E_pq^T)[j,j'] k0; accumulate the output-block
    // weights once, then read every entry off the dense product.
    Mat wk = Mat::Zero(m_outputs, m_outputs);
    for (Eigen::Index s = 0; s < total; ++s)
      for (Eigen::Index t = 0; t < total; ++t)
        wk(model.obs_output[s], model.obs_output[t]) += w(s, t) * model.k0(s, t);
    Mat sym = 0.5 * (wk + wk.transpose());
    out.grad_L = Mat::Zero(m_outputs, m_outputs);
    Mat full = 2.0 * sym * model.L;  // d tr(sym LL^T) / dL
    for (int p = 0; p < m_outputs; ++p)
      for (int q = 0; q <= p; ++q) out.grad_L(p, q) = 0.5 * full(p, q);
  }

  if (want_noise) out.grad_noise = 0.5 * w.trace();

  return out;
}

}  // namespace famgp
