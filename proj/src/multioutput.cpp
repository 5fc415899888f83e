#include "famgp/multioutput.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <stdexcept>
#include <string>
#include <utility>

namespace famgp {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr Eigen::Index kMaxDenseTotal = 6000;

Mat diag_mat(const Vec& v) { return Mat(v.asDiagonal()); }

Mat symmetrized(Mat a) { return 0.5 * (a + a.transpose()).eval(); }

struct SymEig {
  Mat u;
  Vec d;
};

SymEig sym_eig(const Mat& a, const char* label) {
  Eigen::SelfAdjointEigenSolver<Mat> es(a);
  if (es.info() != Eigen::Success)
    throw std::runtime_error(std::string(label) + ": eigendecomposition failed");
  return {es.eigenvectors(), es.eigenvalues()};
}

struct SqrtPair {
  Mat half;
  Mat inv_half;
};

SqrtPair spd_sqrt(const Mat& s, const char* label) {
  SymEig es = sym_eig(s, label);
  if (!(es.d.minCoeff() > 0.0))
    throw std::runtime_error(std::string(label) + ": matrix is not positive definite");
  Vec h = es.d.array().sqrt();
  return {es.u * h.asDiagonal() * es.u.transpose(),
          es.u * h.cwiseInverse().asDiagonal() * es.u.transpose()};
}

Mat kf_inverse(const Mat& l) {
  Mat linv = l.triangularView<Eigen::Lower>().solve(Mat::Identity(l.rows(), l.cols()));
  return linv.transpose() * linv;
}

double log_det_kf(const Mat& l) { return 2.0 * l.diagonal().array().log().sum(); }

bool is_diagonal(const Mat& s) {
  for (Eigen::Index i = 0; i < s.rows(); ++i)
    for (Eigen::Index j = 0; j < s.cols(); ++j)
      if (i != j && s(i, j) != 0.0) return false;
  return true;
}

void validate_mo(const MODataset& data, const Mat& l_kf) {
  if (data.X.size() == 0) throw std::invalid_argument("dataset is empty");
  if (data.Y.rows() != data.X.size())
    throw std::invalid_argument("X and Y row counts differ");
  int m = data.outputs();
  if (m < 1) throw std::invalid_argument("dataset has no outputs");
  if (data.S.rows() != m || data.S.cols() != m)
    throw std::invalid_argument("noise covariance must be M x M");
  if (!data.observed.empty()) {
    if (static_cast<int>(data.observed.size()) != m)
      throw std::invalid_argument("observation mask must list every output");
    for (const auto& rows : data.observed) {
      if (rows.empty())
        throw std::invalid_argument("every output needs at least one observation");
      for (Eigen::Index r : rows)
        if (r < 0 || r >= data.X.size())
          throw std::invalid_argument("observation mask index out of range");
    }
  }
  coreg_from_cholesky(l_kf);
  if (l_kf.rows() != m)
    throw std::invalid_argument("L dimension differs from the output count");
}

// Streaming grams over shared inputs: B0 = Phi^T Phi, R0 = Phi^T Y,
// YY = Y^T Y, and when phi_param names an eigenfunction parameter,
// C0 = Phi^T dPhi and Rp0 = dPhi^T Y.
struct MOAccum {
  Mat b0, r0, yy;
  Mat c0, rp0;
};

MOAccum accumulate_iso(const MercerBasis& basis, const InputTransform& tr,
                       const MODataset& data, const std::string& phi_param,
                       Eigen::Index chunk) {
  Eigen::Index n = basis.n, big_n = data.X.size(), m = data.Y.cols();
  if (chunk < 1) chunk = big_n;
  MOAccum acc;
  acc.b0 = Mat::Zero(n, n);
  acc.r0 = Mat::Zero(n, m);
  acc.yy = Mat::Zero(m, m);
  bool with_grad = !phi_param.empty();
  if (with_grad) {
    acc.c0 = Mat::Zero(n, n);
    acc.rp0 = Mat::Zero(n, m);
  }
  for (Eigen::Index start = 0; start < big_n; start += chunk) {
    Eigen::Index len = std::min(chunk, big_n - start);
    Vec u = tr.apply(Vec(data.X.segment(start, len)));
    Mat yb = data.Y.middleRows(start, len);
    Mat phi = basis_matrix(basis, u).values;
    acc.b0.noalias() += phi.transpose() * phi;
    acc.r0.noalias() += phi.transpose() * yb;
    acc.yy.noalias() += yb.transpose() * yb;
    if (with_grad) {
      Mat dphi = basis_matrix_grad(basis, u, phi_param).values;
      acc.c0.noalias() += phi.transpose() * dphi;
      acc.rp0.noalias() += dphi.transpose() * yb;
    }
  }
  return acc;
}

struct PerOutput {
  Mat b;
  Vec r;
  double yy = 0.0;
  Eigen::Index count = 0;
};

PerOutput accumulate_output(const MercerBasis& basis, const InputTransform& tr,
                            const MODataset& data, int j) {
  std::vector<Eigen::Index> rows = data.observed_rows(j);
  Eigen::Index nj = static_cast<Eigen::Index>(rows.size());
  Vec u(nj), y(nj);
  for (Eigen::Index i = 0; i < nj; ++i) {
    u[i] = tr.apply(data.X[rows[static_cast<size_t>(i)]]);
    y[i] = data.Y(rows[static_cast<size_t>(i)], j);
  }
  Mat phi = basis_matrix(basis, u).values;
  PerOutput po;
  po.b = phi.transpose() * phi;
  po.r = phi.transpose() * y;
  po.yy = y.squaredNorm();
  po.count = nj;
  return po;
}

// alpha, the dense LambdaBar^{-1}, G, and log|LambdaBar| + log|K_f (x) Lambda|
// for the isotopic separable case, falling back to a direct SPD solve when the
// factorization's eigendecompositions fail.
struct IsoSolve {
  Vec alpha;
  Mat d;
  Mat g;
  double log_det_sum = 0.0;
};

IsoSolve solve_iso(const Mat& s, const Mat& kf, const Mat& l_kf, const Mat& b0,
                   const Vec& lambda, const Vec& r, const Mat& sinv) {
  Eigen::Index n = lambda.size(), m = kf.rows();
  IsoSolve out;
  try {
    SeparableInverse sep = mo_inverse_separable_from_gram(s, kf, b0, lambda);
    out.alpha = sep.apply(r);
    out.d = symmetrized(sep.dense());
    Vec mid(n * m);
    for (Eigen::Index j = 0; j < m; ++j)
      for (Eigen::Index i = 0; i < n; ++i) {
        double dd = sep.da[j] * sep.db[i];
        mid[j * n + i] = dd / (1.0 + dd);
      }
    out.g = symmetrized(kron(sep.left_a, sep.left_b) * mid.asDiagonal() *
                        kron(sep.right_a, sep.right_b));
    out.log_det_sum = sep.log_det_product();
    return out;
  } catch (const std::runtime_error& e) {
    std::fprintf(stderr,
                 "famgp: separable factorization failed (%s); "
                 "falling back to a dense solve\n",
                 e.what());
  }
  Mat pbar = kron(kf_inverse(l_kf), diag_mat(lambda.cwiseInverse())) + kron(sinv, b0);
  SpdFactor fac = spd_factor(pbar, "mo_lambda_bar");
  out.alpha = fac.solve(r);
  out.d = symmetrized(fac.inverse());
  out.g = symmetrized(kron(kf, diag_mat(lambda)) - out.d);
  out.log_det_sum = fac.log_det + static_cast<double>(n) * log_det_kf(l_kf) +
                    static_cast<double>(m) * lambda.array().log().sum();
  return out;
}

void finish_dense(MOFittedModel& model, const Mat& kf, const Mat& l_kf, const Vec& lambda,
                  const Mat& bhat, const Vec& r) {
  Mat pbar = kron(kf_inverse(l_kf), diag_mat(lambda.cwiseInverse())) + bhat;
  SpdFactor fac = spd_factor(pbar, "mo_lambda_bar");
  model.alpha_prime = fac.solve(r);
  model.lambda_bar_inv = symmetrized(fac.inverse());
  model.G = symmetrized(kron(kf, diag_mat(lambda)) - model.lambda_bar_inv);
}

Vec flatten(const Mat& a) { return Eigen::Map<const Vec>(a.data(), a.size()); }

}  // namespace

SeparableInverse mo_inverse_separable(const Mat& s, const Mat& kf, const Mat& phi,
                                      const Vec& lambda) {
  Mat b0 = phi.transpose() * phi;
  return mo_inverse_separable_from_gram(s, kf, b0, lambda);
}

SeparableInverse mo_inverse_separable_from_gram(const Mat& s, const Mat& kf,
                                                const Mat& b0, const Vec& lambda) {
  Eigen::Index m = kf.rows(), n = lambda.size();
  if (kf.cols() != m || s.rows() != m || s.cols() != m)
    throw std::invalid_argument("S and K_f must both be M x M");
  if (b0.rows() != n || b0.cols() != n)
    throw std::invalid_argument("basis gram must match the eigenvalue count");
  if (!(lambda.minCoeff() > 0.0))
    throw std::invalid_argument("eigenvalues must be strictly positive");

  SqrtPair ssq = spd_sqrt(s, "noise covariance");
  SymEig ea = sym_eig(Mat(ssq.inv_half * kf * ssq.inv_half), "output similarity");
  Mat u_a = ssq.inv_half * ea.u;
  Mat u_a_inv = ea.u.transpose() * ssq.half;

  Vec sqrt_l = lambda.array().sqrt();
  SymEig eb = sym_eig(Mat(sqrt_l.asDiagonal() * b0 * sqrt_l.asDiagonal()), "basis gram");
  Mat u_b = sqrt_l.cwiseInverse().asDiagonal() * eb.u;
  Mat u_b_inv = eb.u.transpose() * sqrt_l.asDiagonal();

  SeparableInverse inv;
  inv.left_a = kf * u_a;
  inv.left_b = lambda.asDiagonal() * u_b;
  inv.right_a = u_a_inv;
  inv.right_b = u_b_inv;
  inv.da = ea.d.cwiseMax(0.0);
  inv.db = eb.d.cwiseMax(0.0);
  return inv;
}

Vec SeparableInverse::apply(const Vec& v) const {
  Eigen::Index n = left_b.rows(), m = left_a.rows();
  if (v.size() != n * m)
    throw std::invalid_argument("vector length differs from n*M");
  Eigen::Map<const Mat> vmat(v.data(), n, m);
  Mat t1 = right_b * vmat * right_a.transpose();
  Mat t2 = t1.array() / (1.0 + (db * da.transpose()).array());
  Mat out = left_b * t2 * left_a.transpose();
  return flatten(out);
}

Mat SeparableInverse::dense() const {
  Eigen::Index n = left_b.rows(), m = left_a.rows();
  Vec mid(n * m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      mid[j * n + i] = 1.0 / (1.0 + da[j] * db[i]);
  return kron(left_a, left_b) * mid.asDiagonal() * kron(right_a, right_b);
}

Mat SeparableInverse::dense_subtraction() const {
  Eigen::Index n = left_b.rows(), m = left_a.rows();
  Mat prior = kron(Mat(left_a * right_a), Mat(left_b * right_b));
  Vec mid(n * m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) {
      double dd = da[j] * db[i];
      mid[j * n + i] = dd / (1.0 + dd);
    }
  return prior - kron(left_a, left_b) * mid.asDiagonal() * kron(right_a, right_b);
}

double SeparableInverse::log_det_product() const {
  double sum = 0.0;
  for (Eigen::Index j = 0; j < da.size(); ++j)
    for (Eigen::Index i = 0; i < db.size(); ++i) sum += std::log1p(da[j] * db[i]);
  return sum;
}

Mat commutation_matrix(int m) {
  if (m < 1) throw std::invalid_argument("m must be positive");
  Mat t = Mat::Zero(m * m, m * m);
  for (int i = 0; i < m; ++i)
    for (int j = 0; j < m; ++j) t(i * m + j, j * m + i) = 1.0;
  return t;
}

MOFittedModel mo_fit(const MODataset& data, KernelKind kind, const KernelParams& params,
                     int n, const Mat& l_kf, const MOFitOptions& opt) {
  return mo_fit(data, make_basis(kind, params, n, opt.eig_floor), l_kf, opt);
}

MOFittedModel mo_fit(const MODataset& data, const MercerBasis& basis, const Mat& l_kf,
                     const MOFitOptions& opt) {
  validate_mo(data, l_kf);
  int m = data.outputs();
  Eigen::Index n = basis.n;
  InputTransform tr = opt.transform ? *opt.transform : InputTransform::from_data(data.X);
  Mat kf = l_kf * l_kf.transpose();

  MOFittedModel model;
  model.basis = basis;
  model.transform = tr;
  model.L = l_kf;
  model.S = data.S;

  if (data.has_full_sigma()) {
    if (!data.observed.empty())
      throw std::invalid_argument(
          "full noise covariance cannot be combined with observation masks");
    Eigen::Index big_n = data.X.size(), total = big_n * m;
    if (data.sigma_full.rows() != total || data.sigma_full.cols() != total)
      throw std::invalid_argument("full noise covariance must be NM x NM");
    if (total > kMaxDenseTotal)
      throw std::invalid_argument("dense noise covariance path refuses N*M > 6000");
    SpdFactor sfac = spd_factor(data.sigma_full, "full noise covariance");
    Mat sinv_full = sfac.inverse();
    Vec u = tr.apply(data.X);
    Mat phi = basis_matrix(basis, u).values;
    Vec w = sinv_full * flatten(data.Y);
    Vec r(n * m);
    Mat bhat(n * m, n * m);
    for (int j = 0; j < m; ++j) {
      r.segment(j * n, n) = phi.transpose() * w.segment(j * big_n, big_n);
      for (int j2 = 0; j2 < m; ++j2)
        bhat.block(j * n, j2 * n, n, n) =
            phi.transpose() * sinv_full.block(j * big_n, j2 * big_n, big_n, big_n) * phi;
    }
    finish_dense(model, kf, l_kf, basis.lambda, symmetrized(bhat), r);
    return model;
  }

  if (data.isotopic()) {
    MOAccum acc = accumulate_iso(basis, tr, data, "", opt.chunk);
    Mat sinv = spd_factor(data.S, "noise covariance").inverse();
    Vec r = flatten(Mat(acc.r0 * sinv));
    IsoSolve core = solve_iso(data.S, kf, l_kf, acc.b0, basis.lambda, r, sinv);
    model.alpha_prime = core.alpha;
    model.lambda_bar_inv = core.d;
    model.G = core.g;
    return model;
  }

  if (!is_diagonal(data.S))
    throw std::invalid_argument("partial observations require diagonal output noise");
  Vec r(n * m);
  Mat bhat = Mat::Zero(n * m, n * m);
  for (int j = 0; j < m; ++j) {
    double s2 = data.S(j, j);
    if (!(s2 > 0.0)) throw std::invalid_argument("noise variances must be positive");
    PerOutput po = accumulate_output(basis, tr, data, j);
    bhat.block(j * n, j * n, n, n) = po.b / s2;
    r.segment(j * n, n) = po.r / s2;
  }
  finish_dense(model, kf, l_kf, basis.lambda, bhat, r);
  return model;
}

Posterior mo_predict(const MOFittedModel& model, const Vec& x_star, int output,
                     CovMode mode, int derivative_order) {
  return mo_predict_stacked(model, x_star, {output}, mode, derivative_order);
}

Posterior mo_predict_stacked(const MOFittedModel& model, const Vec& x_star,
                             const std::vector<int>& outputs, CovMode mode,
                             int derivative_order) {
  if (outputs.empty()) throw std::invalid_argument("no outputs requested");
  for (int j : outputs)
    if (j < 0 || j >= model.outputs())
      throw std::invalid_argument("output index out of range");
  if (derivative_order < 0)
    throw std::invalid_argument("derivative order must be non-negative");

  Posterior post;
  post.mode = mode;
  post.derivative_order = derivative_order;
  Eigen::Index pts = x_star.size();
  if (pts == 0) return post;

  Eigen::Index n = model.basis.n;
  Eigen::Index k = static_cast<Eigen::Index>(outputs.size());
  Vec u = model.transform.apply(x_star);
  Mat phi = (derivative_order == 0 ? basis_matrix(model.basis, u)
                                   : basis_derivative(model.basis, u, derivative_order))
                .values;
  if (derivative_order > 0)
    phi *= std::pow(1.0 / model.transform.scale, derivative_order);

  post.mean.resize(pts * k);
  for (Eigen::Index a = 0; a < k; ++a)
    post.mean.segment(a * pts, pts) =
        phi * model.alpha_prime.segment(outputs[static_cast<size_t>(a)] * n, n);

  if (mode == CovMode::Diagonal) {
    post.variance.resize(pts * k);
    for (Eigen::Index a = 0; a < k; ++a) {
      Mat djj = model.lambda_bar_inv.block(outputs[static_cast<size_t>(a)] * n,
                                           outputs[static_cast<size_t>(a)] * n, n, n);
      post.variance.segment(a * pts, pts) =
          ((phi * djj).array() * phi.array()).rowwise().sum();
    }
  } else if (mode == CovMode::Full) {
    post.covariance.resize(pts * k, pts * k);
    for (Eigen::Index a = 0; a < k; ++a)
      for (Eigen::Index c = 0; c < k; ++c) {
        Mat djj = model.lambda_bar_inv.block(outputs[static_cast<size_t>(a)] * n,
                                             outputs[static_cast<size_t>(c)] * n, n, n);
        post.covariance.block(a * pts, c * pts, pts, pts) = phi * djj * phi.transpose();
      }
    post.covariance = symmetrized(post.covariance);
  }
  return post;
}

double mo_log_marginal_likelihood(const MODataset& data, const MercerBasis& basis,
                                  const Mat& l_kf, const MOFitOptions& opt) {
  validate_mo(data, l_kf);
  int m = data.outputs();
  Eigen::Index n = basis.n;
  InputTransform tr = opt.transform ? *opt.transform : InputTransform::from_data(data.X);
  Mat kf = l_kf * l_kf.transpose();
  const Vec& lambda = basis.lambda;

  double r_dot_alpha = 0.0, yy = 0.0, log_det_sum = 0.0, log_det_sigma = 0.0;
  double total = 0.0;

  if (data.has_full_sigma()) {
    if (!data.observed.empty())
      throw std::invalid_argument(
          "full noise covariance cannot be combined with observation masks");
    Eigen::Index big_n = data.X.size(), nm = big_n * m;
    if (data.sigma_full.rows() != nm || data.sigma_full.cols() != nm)
      throw std::invalid_argument("full noise covariance must be NM x NM");
    if (nm > kMaxDenseTotal)
      throw std::invalid_argument("dense noise covariance path refuses N*M > 6000");
    SpdFactor sfac = spd_factor(data.sigma_full, "full noise covariance");
    Mat sinv_full = sfac.inverse();
    Vec u = tr.apply(data.X);
    Mat phi = basis_matrix(basis, u).values;
    Vec yvec = flatten(data.Y);
    Vec w = sinv_full * yvec;
    Vec r(n * m);
    Mat bhat(n * m, n * m);
    for (int j = 0; j < m; ++j) {
      r.segment(j * n, n) = phi.transpose() * w.segment(j * big_n, big_n);
      for (int j2 = 0; j2 < m; ++j2)
        bhat.block(j * n, j2 * n, n, n) =
            phi.transpose() * sinv_full.block(j * big_n, j2 * big_n, big_n, big_n) * phi;
    }
    Mat pbar = kron(kf_inverse(l_kf), diag_mat(lambda.cwiseInverse())) + symmetrized(bhat);
    SpdFactor fac = spd_factor(pbar, "mo_lambda_bar");
    Vec alpha = fac.solve(r);
    r_dot_alpha = r.dot(alpha);
    yy = yvec.dot(w);
    log_det_sum = fac.log_det + static_cast<double>(n) * log_det_kf(l_kf) +
                  static_cast<double>(m) * lambda.array().log().sum();
    log_det_sigma = sfac.log_det;
    total = static_cast<double>(nm);
  } else if (data.isotopic()) {
    MOAccum acc = accumulate_iso(basis, tr, data, "", opt.chunk);
    SpdFactor sfac = spd_factor(data.S, "noise covariance");
    Mat sinv = sfac.inverse();
    Vec r = flatten(Mat(acc.r0 * sinv));
    IsoSolve core = solve_iso(data.S, kf, l_kf, acc.b0, lambda, r, sinv);
    r_dot_alpha = r.dot(core.alpha);
    yy = (acc.yy.array() * sinv.array()).sum();
    log_det_sum = core.log_det_sum;
    log_det_sigma = static_cast<double>(data.X.size()) * sfac.log_det;
    total = static_cast<double>(data.X.size() * m);
  } else {
    if (!is_diagonal(data.S))
      throw std::invalid_argument("partial observations require diagonal output noise");
    Vec r(n * m);
    Mat bhat = Mat::Zero(n * m, n * m);
    for (int j = 0; j < m; ++j) {
      double s2 = data.S(j, j);
      if (!(s2 > 0.0)) throw std::invalid_argument("noise variances must be positive");
      PerOutput po = accumulate_output(basis, tr, data, j);
      bhat.block(j * n, j * n, n, n) = po.b / s2;
      r.segment(j * n, n) = po.r / s2;
      yy += po.yy / s2;
      log_det_sigma += static_cast<double>(po.count) * std::log(s2);
      total += static_cast<double>(po.count);
    }
    Mat pbar = kron(kf_inverse(l_kf), diag_mat(lambda.cwiseInverse())) + bhat;
    SpdFactor fac = spd_factor(pbar, "mo_lambda_bar");
    Vec alpha = fac.solve(r);
    r_dot_alpha = r.dot(alpha);
    log_det_sum = fac.log_det + static_cast<double>(n) * log_det_kf(l_kf) +
                  static_cast<double>(m) * lambda.array().log().sum();
  }

  return 0.5 * r_dot_alpha - 0.5 * yy - 0.5 * (log_det_sum + log_det_sigma) -
         0.5 * total * kLog2Pi;
}

MOGrads mo_lml_and_grads(const MODataset& data, const MercerBasis& basis, const Mat& l_kf,
                         const std::string& kernel_param, bool want_kf, bool want_noise,
                         const MOFitOptions& opt) {
  validate_mo(data, l_kf);
  if (!data.isotopic() || data.has_full_sigma())
    throw std::invalid_argument(
        "gradients require fully observed outputs with separable noise");
  int m = data.outputs();
  Eigen::Index n = basis.n;
  Eigen::Index big_n = data.X.size();
  InputTransform tr = opt.transform ? *opt.transform : InputTransform::from_data(data.X);
  Mat kf = l_kf * l_kf.transpose();
  const Vec& lambda = basis.lambda;

  bool phi_param =
      !kernel_param.empty() && param_in_eigenfunctions(basis.kind, kernel_param);
  MOAccum acc =
      accumulate_iso(basis, tr, data, phi_param ? kernel_param : std::string(), opt.chunk);
  SpdFactor sfac = spd_factor(data.S, "noise covariance");
  Mat sinv = sfac.inverse();
  Vec r = flatten(Mat(acc.r0 * sinv));
  IsoSolve core = solve_iso(data.S, kf, l_kf, acc.b0, lambda, r, sinv);

  Mat bhat = kron(sinv, acc.b0);
  const Vec& t = core.alpha;
  Vec b = r - bhat * t;
  Mat bd = bhat * core.d;
  Mat h = symmetrized(bhat - bd * bhat);

  MOGrads out;
  double yy = (acc.yy.array() * sinv.array()).sum();
  out.lml = 0.5 * r.dot(t) - 0.5 * yy -
            0.5 * (core.log_det_sum +
                   static_cast<double>(big_n) * sfac.log_det) -
            0.5 * static_cast<double>(big_n * m) * kLog2Pi;

  if (!kernel_param.empty()) {
    Vec dlambda = lambda_grad(basis, kernel_param);
    Mat pprime = kron(kf, diag_mat(dlambda));
    double g = 0.5 * b.dot(pprime * b) - 0.5 * (pprime.array() * h.array()).sum();
    if (phi_param) {
      Mat p = kron(kf, diag_mat(lambda));
      Mat chat = kron(sinv, acc.c0);
      Vec rp = flatten(Mat(acc.rp0 * sinv));
      Vec a_vec = rp - chat.transpose() * t;
      Mat e = chat - bd * chat;
      g += a_vec.dot(p * b) - (p.array() * e.transpose().array()).sum();
    }
    out.grad_kernel = g;
  }

  if (want_kf) {
    Eigen::Map<const Mat> bmat(b.data(), n, m);
    Mat q = bmat.transpose() * lambda.asDiagonal() * bmat;
    Mat tmat = Mat::Zero(m, m);
    for (int j = 0; j < m; ++j)
      for (int j2 = 0; j2 < m; ++j2) {
        double s = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) s += lambda[i] * h(j * n + i, j2 * n + i);
        tmat(j, j2) = s;
      }
    Mat full = (q - tmat) * l_kf;
    out.grad_L = full.triangularView<Eigen::Lower>();
  }

  if (want_noise) {
    double s2 = data.S(0, 0);
    Mat iso = s2 * Mat::Identity(m, m);
    if (!data.S.isApprox(iso, 1e-12))
      throw std::invalid_argument("noise gradient requires S = sigma2 I");
    double total = static_cast<double>(big_n * m);
    double alpha_sq = (yy - 2.0 * r.dot(t) + t.dot(bhat * t)) / s2;
    double tr_k_inv = total / s2 - (core.d.array() * bhat.array()).sum() / s2;
    out.grad_noise = 0.5 * alpha_sq - 0.5 * tr_k_inv;
  }

  return out;
}

Mat kf_grad(const MODataset& data, const MOFittedModel& model, const Mat& l_kf) {
  MOFitOptions opt;
  opt.transform = &model.transform;
  return mo_lml_and_grads(data, model.basis, l_kf, "", true, false, opt).grad_L;
}

}  // namespace famgp
