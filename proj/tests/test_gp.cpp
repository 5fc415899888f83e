#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "famgp/gp.hpp"
#include "famgp/linalg.hpp"

using namespace famgp;

namespace {

Vec linspace(double lo, double hi, int n) {
  Vec x(n);
  for (int i = 0; i < n; ++i) x[i] = lo + (hi - lo) * i / (n - 1);
  return x;
}

double max_abs(const Mat& m) { return m.size() ? m.cwiseAbs().maxCoeff() : 0.0; }

double rel_err(const Mat& got, const Mat& want) {
  double scale = max_abs(want);
  if (scale == 0.0) return max_abs(got);
  return max_abs(got - want) / scale;
}

// Small seeded dataset with a smooth target.
Dataset toy_dataset(int n, double noise, std::uint64_t seed = 11) {
  Rng rng(seed);
  Vec x(n), y(n);
  for (int i = 0; i < n; ++i) {
    x[i] = -1.0 + 2.0 * rng.uniform();
    y[i] = std::sin(3.0 * x[i]) + 0.5 * std::cos(7.0 * x[i]) +
           std::sqrt(noise) * rng.normal();
  }
  return make_dataset(x, y, noise);
}

InputTransform unit_range() { return InputTransform::from_range(-1.0, 1.0); }

// Everything the Woodbury route computes, done the N x N way on the
// reconstructed rank-n kernel.
struct DenseReference {
  Mat k_train;       // Phi Lambda Phi^T
  Mat k_noisy_inv;
  Vec alpha_dense;   // (K + Sigma)^{-1} Y
  double lml = 0.0;

  DenseReference(const Dataset& data, const MercerBasis& basis,
                 const InputTransform& tr) {
    Mat phi = basis_matrix(basis, tr.apply(data.X)).values;
    k_train = phi * basis.lambda.asDiagonal() * phi.transpose();
    Mat noisy = k_train;
    for (Eigen::Index i = 0; i < data.X.size(); ++i)
      noisy(i, i) += data.noise_at(i);
    Eigen::LLT<Mat> llt(noisy);
    REQUIRE(llt.info() == Eigen::Success);
    k_noisy_inv = llt.solve(Mat::Identity(noisy.rows(), noisy.cols()));
    alpha_dense = llt.solve(data.Y);
    double log_det = 0.0;
    for (Eigen::Index i = 0; i < noisy.rows(); ++i)
      log_det += 2.0 * std::log(llt.matrixL()(i, i));
    lml = -0.5 * data.Y.dot(alpha_dense) - 0.5 * log_det -
          0.5 * data.X.size() * std::log(2.0 * std::numbers::pi);
  }

  Vec mean_at(const MercerBasis& basis, const InputTransform& tr, const Dataset& data,
              const Vec& x_star) const {
    Mat phi_star = basis_matrix(basis, tr.apply(x_star)).values;
    Mat phi = basis_matrix(basis, tr.apply(data.X)).values;
    Mat k_star = phi_star * basis.lambda.asDiagonal() * phi.transpose();
    return k_star * alpha_dense;
  }

  Mat cov_at(const MercerBasis& basis, const InputTransform& tr, const Dataset& data,
             const Vec& x_star) const {
    Mat phi_star = basis_matrix(basis, tr.apply(x_star)).values;
    Mat phi = basis_matrix(basis, tr.apply(data.X)).values;
    Mat k_star = phi_star * basis.lambda.asDiagonal() * phi.transpose();
    Mat k_ss = phi_star * basis.lambda.asDiagonal() * phi_star.transpose();
    return k_ss - k_star * k_noisy_inv * k_star.transpose();
  }
};

}  // namespace

TEST_CASE("woodbury fit matches the dense route on the reconstructed kernel") {
  Dataset data = toy_dataset(60, 0.05);
  InputTransform tr = unit_range();
  FitOptions opt;
  opt.transform = &tr;

  for (KernelKind kind :
       {KernelKind::SquaredExponential, KernelKind::Periodic, KernelKind::Chebyshev}) {
    CAPTURE(to_string(kind));
    KernelParams p;
    p.l_se = 0.3;
    MercerBasis basis = make_basis(kind, p, 15);
    FittedModel model = fit(data, basis, opt);
    DenseReference ref(data, basis, tr);

    Vec x_star = linspace(-0.9, 0.9, 25);
    Posterior post = predict(model, x_star, CovMode::Full);
    CHECK(rel_err(post.mean, ref.mean_at(basis, tr, data, x_star)) < 1e-9);
    CHECK(rel_err(post.covariance, ref.cov_at(basis, tr, data, x_star)) < 1e-9);
    CHECK(log_marginal_likelihood(data, basis, opt) ==
          doctest::Approx(ref.lml).epsilon(1e-10));

    // lambda_bar_inv really is (Lambda^{-1} + Phi^T Sigma^{-1} Phi)^{-1}
    Mat phi = basis_matrix(basis, tr.apply(data.X)).values;
    Mat lambda_bar = Mat(basis.lambda.cwiseInverse().asDiagonal()) +
                     phi.transpose() * phi / data.noise_variance[0];
    Mat identity_check = model.lambda_bar_inv * lambda_bar;
    CHECK(rel_err(identity_check, Mat::Identity(basis.n, basis.n)) < 1e-9);

    // G = Lambda - LambdaBar^{-1}, symmetric
    Mat g_expected = Mat(basis.lambda.asDiagonal()) - model.lambda_bar_inv;
    CHECK(max_abs(model.G - model.G.transpose()) < 1e-10);
    CHECK(rel_err(model.G, g_expected) < 1e-9);
  }
}

TEST_CASE("heteroscedastic noise feeds the same dense identity") {
  Rng rng(5);
  int n = 40;
  Vec x(n), y(n), noise(n);
  for (int i = 0; i < n; ++i) {
    x[i] = -1.0 + 2.0 * rng.uniform();
    y[i] = std::sin(4.0 * x[i]) + 0.1 * rng.normal();
    noise[i] = 0.01 + 0.2 * rng.uniform();
  }
  Dataset data;
  data.X = x;
  data.Y = y;
  data.noise_variance = noise;

  InputTransform tr = unit_range();
  FitOptions opt;
  opt.transform = &tr;
  KernelParams p;
  p.l_se = 0.25;
  MercerBasis basis = make_basis(KernelKind::SquaredExponential, p, 12);
  FittedModel model = fit(data, basis, opt);
  DenseReference ref(data, basis, tr);

  Vec x_star = linspace(-0.8, 0.8, 15);
  Posterior post = predict(model, x_star, CovMode::Full);
  CHECK(rel_err(post.mean, ref.mean_at(basis, tr, data, x_star)) < 1e-9);
  CHECK(rel_err(post.covariance, ref.cov_at(basis, tr, data, x_star)) < 1e-9);
  CHECK(log_marginal_likelihood(data, basis, opt) ==
        doctest::Approx(ref.lml).epsilon(1e-10));
}

TEST_CASE("chunked accumulation does not change the fit") {
  Dataset data = toy_dataset(123, 0.1);
  InputTransform tr = unit_range();
  KernelParams p;
  FitOptions big;
  big.transform = &tr;
  FitOptions small;
  small.transform = &tr;
  small.chunk = 7;
  MercerBasis basis = make_basis(KernelKind::Chebyshev, p, 20);
  FittedModel a = fit(data, basis, big);
  FittedModel b = fit(data, basis, small);
  CHECK(rel_err(a.alpha_prime, b.alpha_prime) < 1e-12);
  CHECK(rel_err(a.G, b.G) < 1e-12);
  CHECK(log_marginal_likelihood(data, basis, big) ==
        doctest::Approx(log_marginal_likelihood(data, basis, small)).epsilon(1e-13));
}

TEST_CASE("posterior variance is nonnegative and contracts below the prior") {
  Dataset data = toy_dataset(80, 0.02);
  FittedModel model = fit(data, KernelKind::SquaredExponential, KernelParams{}, 18);
  Vec x_star = linspace(-0.95, 0.95, 60);
  Posterior post = predict(model, x_star, CovMode::Diagonal);

  Vec u = model.transform.apply(x_star);
  Mat phi = basis_matrix(model.basis, u).values;
  Vec prior_var =
      (phi * model.basis.lambda.asDiagonal() * phi.transpose()).diagonal();
  for (Eigen::Index i = 0; i < x_star.size(); ++i) {
    CHECK(post.variance[i] > -1e-10);
    CHECK(post.variance[i] <= prior_var[i] + 1e-10);
  }

  Posterior full = predict(model, x_star, CovMode::Full);
  CHECK(max_abs(full.covariance - full.covariance.transpose()) < 1e-10);
  CHECK(rel_err(full.covariance.diagonal(), post.variance) < 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat> es(full.covariance);
  CHECK(es.eigenvalues().minCoeff() > -1e-8);
}

TEST_CASE("derivative prediction differentiates the posterior mean") {
  Dataset data = toy_dataset(70, 0.01);
  FittedModel model = fit(data, KernelKind::SquaredExponential, KernelParams{}, 20);
  Vec x_star = linspace(-0.7, 0.7, 11);

  double h = 1e-5;
  Vec up = predict(model, Vec(x_star.array() + h), CovMode::None).mean;
  Vec dn = predict(model, Vec(x_star.array() - h), CovMode::None).mean;
  Vec fd = (up - dn) / (2.0 * h);
  Posterior d1 = predict_derivative(model, x_star, 1, CovMode::Diagonal);
  CHECK(rel_err(d1.mean, fd) < 1e-5);
  CHECK(d1.derivative_order == 1);
  for (Eigen::Index i = 0; i < x_star.size(); ++i) CHECK(d1.variance[i] > -1e-10);

  Vec d1p = predict_derivative(model, Vec(x_star.array() + h), 1, CovMode::None).mean;
  Vec d1n = predict_derivative(model, Vec(x_star.array() - h), 1, CovMode::None).mean;
  Vec fd2 = (d1p - d1n) / (2.0 * h);
  Posterior d2 = predict_derivative(model, x_star, 2, CovMode::None);
  CHECK(rel_err(d2.mean, fd2) < 1e-5);

  Posterior k0 = predict_derivative(model, x_star, 0, CovMode::Diagonal);
  Posterior plain = predict(model, x_star, CovMode::Diagonal);
  CHECK(max_abs(k0.mean - plain.mean) == 0.0);
}

TEST_CASE("general gradients match central finite differences") {
  Dataset data = toy_dataset(50, 0.04);
  InputTransform tr = unit_range();
  FitOptions opt;
  opt.transform = &tr;

  struct Scenario {
    KernelKind kind;
    std::vector<std::string> names;
  };
  std::vector<Scenario> scenarios = {
      {KernelKind::SquaredExponential, {"l_se", "noise_variance", "scale"}},
      {KernelKind::Periodic, {"w_pr", "f_pr", "noise_variance"}},
      {KernelKind::Chebyshev, {"a", "b", "noise_variance", "scale"}},
  };

  for (const Scenario& sc : scenarios) {
    CAPTURE(to_string(sc.kind));
    KernelParams p;
    p.l_se = 0.35;
    p.w_pr = 0.6;
    p.a = 0.6;
    p.b = 0.7;
    int n = sc.kind == KernelKind::Periodic ? 13 : 14;
    double scale = 1.4;

    auto lml_at = [&](const KernelParams& q, double noise, double s) {
      Dataset d = data;
      d.noise_variance[0] = noise;
      MercerBasis basis = make_basis(sc.kind, q, n, 0.0);
      basis.lambda *= s;
      return log_marginal_likelihood(d, basis, opt);
    };

    MercerBasis basis = make_basis(sc.kind, p, n, 0.0);
    basis.lambda *= scale;
    LmlAndGrads got = lml_value_and_grads(data, basis, sc.names, scale, opt);
    CHECK(got.lml == doctest::Approx(lml_at(p, data.noise_variance[0], scale))
                         .epsilon(1e-12));

    for (size_t i = 0; i < sc.names.size(); ++i) {
      CAPTURE(sc.names[i]);
      double fd = 0.0;
      if (sc.names[i] == "noise_variance") {
        double v = data.noise_variance[0];
        double h = v * 1e-6;
        fd = (lml_at(p, v + h, scale) - lml_at(p, v - h, scale)) / (2 * h);
      } else if (sc.names[i] == "scale") {
        double h = scale * 1e-6;
        fd = (lml_at(p, data.noise_variance[0], scale + h) -
              lml_at(p, data.noise_variance[0], scale - h)) /
             (2 * h);
      } else {
        double v = get_param(p, sc.names[i]);
        double h = v * 1e-6;
        KernelParams up = p, dn = p;
        set_param(up, sc.names[i], v + h);
        set_param(dn, sc.names[i], v - h);
        fd = (lml_at(up, data.noise_variance[0], scale) -
              lml_at(dn, data.noise_variance[0], scale)) /
             (2 * h);
      }
      CHECK(got.grads[static_cast<Eigen::Index>(i)] ==
            doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("fast path agrees with the general path wherever both are defined") {
  Dataset data = toy_dataset(90, 0.08);
  InputTransform tr = unit_range();
  FitOptions opt;
  opt.transform = &tr;
  KernelParams p;
  p.a = 0.8;
  p.b = 0.85;
  MercerBasis basis = make_basis(KernelKind::Chebyshev, p, 16, 0.0);
  FastCache cache = make_fast_cache(data, basis, opt);

  std::vector<std::string> names = {"a", "b", "noise_variance", "scale"};
  double scale = 2.3;
  for (double sigma2 : {0.08, 0.5}) {
    CAPTURE(sigma2);
    Dataset d = data;
    d.noise_variance[0] = sigma2;
    MercerBasis scaled = basis;
    scaled.lambda *= scale;
    LmlAndGrads general = lml_value_and_grads(d, scaled, names, scale, opt);
    LmlAndGrads fast = lml_fast_and_grads(cache, scaled, sigma2, names, scale);
    CHECK(fast.lml == doctest::Approx(general.lml).epsilon(1e-10));
    for (Eigen::Index i = 0; i < fast.grads.size(); ++i)
      CHECK(fast.grads[i] == doctest::Approx(general.grads[i]).epsilon(1e-8));
    CHECK(lml_fast(cache, scaled, sigma2) ==
          doctest::Approx(general.lml).epsilon(1e-10));
  }
}

TEST_CASE("fast path rejects parameters that move the eigenfunctions") {
  Dataset data = toy_dataset(30, 0.1);
  MercerBasis basis = make_basis(KernelKind::SquaredExponential, KernelParams{}, 10);
  FastCache cache = make_fast_cache(data, basis);
  CHECK_THROWS_AS(lml_fast_and_grads(cache, basis, 0.1, {"l_se"}),
                  std::invalid_argument);
  CHECK_THROWS_AS(lml_grad_fast(cache, basis, 0.1, "f_pr"), std::invalid_argument);
}

TEST_CASE("per-point noise refuses the noise_variance gradient") {
  Dataset data = toy_dataset(25, 0.1);
  Vec per_point = Vec::Constant(25, 0.1);
  data.noise_variance = per_point;
  MercerBasis basis = make_basis(KernelKind::Chebyshev, KernelParams{}, 8);
  CHECK_THROWS_AS(lml_value_and_grads(data, basis, {"noise_variance"}),
                  std::invalid_argument);
}

TEST_CASE("input validation") {
  Vec x = linspace(-1, 1, 5);
  Vec y = x;
  CHECK_THROWS_AS(make_dataset(x, Vec(linspace(0, 1, 4)), 0.1),
                  std::invalid_argument);
  CHECK_THROWS_AS(make_dataset(x, y, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(make_dataset(x, y, -1.0), std::invalid_argument);
  CHECK_THROWS_AS(make_dataset(Vec(0), Vec(0), 0.1), std::invalid_argument);

  Dataset data = make_dataset(x, y, 0.1);
  CHECK_THROWS_AS(fit(data, KernelKind::Chebyshev, KernelParams{}, 0),
                  std::invalid_argument);
  FittedModel model = fit(data, KernelKind::Chebyshev, KernelParams{}, 5);
  CHECK_THROWS_AS(predict_derivative(model, x, -1), std::invalid_argument);

  Posterior empty = predict(model, Vec(0), CovMode::Diagonal);
  CHECK(empty.mean.size() == 0);
  CHECK(empty.variance.size() == 0);
}

TEST_CASE("fit is deterministic and seed-stable") {
  Dataset a = toy_dataset(64, 0.03, 77);
  Dataset b = toy_dataset(64, 0.03, 77);
  CHECK(max_abs(a.X - b.X) == 0.0);
  CHECK(max_abs(a.Y - b.Y) == 0.0);
  FittedModel m1 = fit(a, KernelKind::SquaredExponential, KernelParams{}, 12);
  FittedModel m2 = fit(b, KernelKind::SquaredExponential, KernelParams{}, 12);
  CHECK(max_abs(m1.alpha_prime - m2.alpha_prime) == 0.0);
  CHECK(max_abs(m1.G - m2.G) == 0.0);
}
