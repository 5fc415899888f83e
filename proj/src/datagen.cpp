#include "famgp/datagen.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "famgp/basis.hpp"
#include "famgp/linalg.hpp"

namespace famgp {

namespace {
constexpr double kHalfPi = 1.5707963267948966;
constexpr Eigen::Index kMaxCholeskyN = 8192;
}  // namespace

double SinusoidSignal::value(double x) const { return derivative(x, 0); }

double SinusoidSignal::derivative(double x, int k) const {
  if (k < 0) throw std::invalid_argument("derivative order must be non-negative");
  double sum = 0.0;
  for (Eigen::Index i = 0; i < amplitude.size(); ++i) {
    double gain = amplitude[i] * std::pow(frequency[i], k);
    sum += gain * std::sin(frequency[i] * x + phase[i] + k * kHalfPi);
  }
  return sum;
}

Vec SinusoidSignal::value(const Vec& x) const { return derivative(x, 0); }

Vec SinusoidSignal::derivative(const Vec& x, int k) const {
  Vec out(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) out[i] = derivative(x[i], k);
  return out;
}

SinusoidData gen_sinusoids(std::uint64_t seed, Eigen::Index n, double x_lo, double x_hi,
                           int num_terms, double coeff_lo, double coeff_hi,
                           double noise_sd) {
  if (n < 1) throw std::invalid_argument("need at least one sample");
  if (num_terms < 1) throw std::invalid_argument("need at least one sinusoid");
  if (!(coeff_lo <= coeff_hi)) throw std::invalid_argument("coefficient range is empty");
  if (!(x_lo < x_hi)) throw std::invalid_argument("x range is empty");
  if (noise_sd < 0.0) throw std::invalid_argument("noise_sd must be non-negative");

  Rng rng(seed);
  SinusoidData out;
  out.signal.amplitude.resize(num_terms);
  out.signal.frequency.resize(num_terms);
  out.signal.phase.resize(num_terms);
  for (int i = 0; i < num_terms; ++i) {
    out.signal.amplitude[i] = rng.uniform(coeff_lo, coeff_hi);
    out.signal.frequency[i] = rng.uniform(coeff_lo, coeff_hi);
    out.signal.phase[i] = rng.uniform(coeff_lo, coeff_hi);
  }

  Vec x(n);
  for (Eigen::Index i = 0; i < n; ++i) x[i] = rng.uniform(x_lo, x_hi);
  std::sort(x.data(), x.data() + n);

  out.y_true = out.signal.value(x);
  Vec y = out.y_true;
  if (noise_sd > 0.0)
    for (Eigen::Index i = 0; i < n; ++i) y[i] += noise_sd * rng.normal();

  out.data = make_dataset(std::move(x), std::move(y),
                          std::max(noise_sd * noise_sd, 1e-12));
  return out;
}

MODataset gen_correlated(std::uint64_t seed, Eigen::Index n, double l_se, const Mat& kf,
                         double noise_var) {
  return gen_correlated_draw(seed, n, l_se, kf, noise_var).data;
}

CorrelatedDraw gen_correlated_draw(std::uint64_t seed, Eigen::Index n, double l_se,
                                   const Mat& kf, double noise_var) {
  if (n < 1) throw std::invalid_argument("need at least one sample");
  if (n > kMaxCholeskyN)
    throw std::invalid_argument("dense sampling path refuses N > 8192");
  if (!(noise_var >= 0.0)) throw std::invalid_argument("noise_var must be non-negative");
  Eigen::Index m = kf.rows();
  if (m < 1 || kf.cols() != m) throw std::invalid_argument("K_f must be square");

  KernelParams params;
  params.l_se = l_se;
  validate_params(KernelKind::SquaredExponential, params);

  Vec x(n);
  for (Eigen::Index i = 0; i < n; ++i)
    x[i] = -1.0 + 2.0 * (static_cast<double>(i) + 0.5) / static_cast<double>(n);

  Mat kxx(n, n);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j <= i; ++j) {
      double v = kernel_eval(KernelKind::SquaredExponential, params, x[i], x[j]);
      kxx(i, j) = v;
      kxx(j, i) = v;
    }
  SpdFactor kfac = spd_factor(kxx, "sampling covariance");
  Mat lx = kfac.llt.matrixL();

  Eigen::LLT<Mat> kf_llt(kf);
  if (kf_llt.info() != Eigen::Success)
    throw std::invalid_argument("K_f must be symmetric positive definite");
  Mat lf = kf_llt.matrixL();

  Rng rng(seed);
  Mat z(n, m);
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) z(i, j) = rng.normal();
  Mat f = lx * z * lf.transpose();

  double sd = std::sqrt(noise_var);
  Mat y = f;
  for (Eigen::Index j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i) y(i, j) += sd * rng.normal();

  CorrelatedDraw out;
  out.data = make_mo_dataset(std::move(x), std::move(y), std::max(noise_var, 1e-12));
  out.latent = std::move(f);
  return out;
}

}  // namespace famgp
