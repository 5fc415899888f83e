#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include "famgp/exact_gp.hpp"
#include "famgp/multioutput.hpp"

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

Dataset toy_dataset(int n, double noise, std::uint64_t seed = 17) {
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

// Two correlated columns sampled from smooth functions, shared inputs.
MODataset toy_mo_dataset(int n, double sigma2, std::uint64_t seed = 23) {
  Rng rng(seed);
  Vec x(n);
  Mat y(n, 2);
  for (int i = 0; i < n; ++i) {
    x[i] = -1.0 + 2.0 * rng.uniform();
    double f = std::sin(4.0 * x[i]);
    y(i, 0) = f + std::sqrt(sigma2) * rng.normal();
    y(i, 1) = -0.8 * f + 0.2 * std::cos(2.0 * x[i]) +
              std::sqrt(sigma2) * rng.normal();
  }
  return make_mo_dataset(x, y, sigma2);
}

}  // namespace

TEST_CASE("zero targets give a zero mean and the prior covariance") {
  InputTransform tr = unit_range();
  ExactOptions opt;
  opt.transform = &tr;
  Vec x = linspace(-0.9, 0.9, 15);
  Dataset data = make_dataset(x, Vec::Zero(15), 0.1);
  KernelParams p;
  p.l_se = 0.3;
  ExactGP model = exact_fit(data, KernelKind::SquaredExponential, p, opt);

  Vec xs = linspace(-1.0, 1.0, 9);
  Posterior post = exact_predict(model, xs, CovMode::None);
  CHECK(max_abs(post.mean) == 0.0);

  // With no signal the log marginal likelihood is pure normalizer.
  Mat k(15, 15);
  for (int i = 0; i < 15; ++i)
    for (int j = 0; j < 15; ++j)
      k(i, j) = kernel_eval(KernelKind::SquaredExponential, p, tr.apply(x[i]),
                            tr.apply(x[j]));
  k.diagonal().array() += 0.1;
  Eigen::LLT<Mat> llt(k);
  double log_det = 0.0;
  for (int i = 0; i < 15; ++i) log_det += 2.0 * std::log(llt.matrixL()(i, i));
  double want = -0.5 * log_det - 0.5 * 15 * std::log(2.0 * std::numbers::pi);
  CHECK(exact_lml(model) == doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("a single observation shrinks toward the prior mean with distance") {
  InputTransform tr;  // identity
  ExactOptions opt;
  opt.transform = &tr;
  Vec x(1), y(1);
  x[0] = 0.0;
  y[0] = 2.0;
  double sigma2 = 0.1;
  KernelParams p;
  p.l_se = 0.5;
  ExactGP model =
      exact_fit(make_dataset(x, y, sigma2), KernelKind::SquaredExponential, p, opt);

  Vec at(2);
  at << 0.0, 6.0;
  Posterior post = exact_predict(model, at, CovMode::Diagonal);
  // At the observation: standard 1-point conjugate update with k(0,0) = 1.
  CHECK(post.mean[0] == doctest::Approx(2.0 / 1.1).epsilon(1e-12));
  CHECK(post.variance[0] == doctest::Approx(1.0 - 1.0 / 1.1).epsilon(1e-12));
  // Far away: back to the prior.
  CHECK(std::abs(post.mean[1]) < 1e-10);
  CHECK(post.variance[1] == doctest::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("mercer mode reproduces the woodbury route exactly") {
  Dataset data = toy_dataset(50, 0.05);
  InputTransform tr = unit_range();
  ExactOptions eopt;
  eopt.transform = &tr;
  FitOptions fopt;
  fopt.transform = &tr;
  Vec xs = linspace(-0.95, 0.95, 21);

  for (KernelKind kind :
       {KernelKind::SquaredExponential, KernelKind::Periodic, KernelKind::Chebyshev}) {
    CAPTURE(to_string(kind));
    KernelParams p;
    p.l_se = 0.35;
    int n = kind == KernelKind::Periodic ? 13 : 14;
    MercerBasis basis = make_basis(kind, p, n, 0.0);

    ExactGP dense = exact_fit(data, basis, eopt);
    FittedModel fast = fit(data, basis, fopt);

    Posterior pd = exact_predict(dense, xs, CovMode::Full);
    Posterior pf = predict(fast, xs, CovMode::Full);
    CHECK(rel_err(pd.mean, pf.mean) < 1e-9);
    CHECK(rel_err(pd.covariance, pf.covariance) < 1e-9);
    CHECK(exact_lml(dense) ==
          doctest::Approx(log_marginal_likelihood(data, basis, fopt)).epsilon(1e-10));

    for (int k : {1, 2}) {
      Posterior dd = exact_predict_derivative(dense, xs, k, CovMode::Diagonal);
      Posterior df = predict_derivative(fast, xs, k, CovMode::Diagonal);
      CHECK(rel_err(dd.mean, df.mean) < 1e-9);
      CHECK(rel_err(dd.variance, df.variance) < 1e-8);
    }
  }
}

TEST_CASE("derivative prediction requires the mercer kernel mode") {
  Dataset data = toy_dataset(10, 0.1);
  ExactGP model = exact_fit(data, KernelKind::SquaredExponential, KernelParams{});
  CHECK_THROWS_AS(exact_predict_derivative(model, linspace(-1, 1, 3), 1),
                  std::logic_error);
}

TEST_CASE("exact gradients match central finite differences") {
  Dataset data = toy_dataset(30, 0.08);
  InputTransform tr = unit_range();
  ExactOptions opt;
  opt.transform = &tr;
  opt.scale = 1.4;

  struct Scenario {
    KernelKind kind;
    bool mercer;
    std::vector<std::string> names;
  };
  std::vector<Scenario> scenarios = {
      {KernelKind::SquaredExponential, false, {"l_se", "noise_variance", "scale"}},
      {KernelKind::Periodic, false, {"w_pr", "f_pr"}},
      {KernelKind::Chebyshev, false, {"a", "b"}},
      {KernelKind::SquaredExponential, true, {"l_se", "noise_variance", "scale"}},
      {KernelKind::Chebyshev, true, {"a", "b"}},
  };

  for (const Scenario& sc : scenarios) {
    CAPTURE(to_string(sc.kind));
    CAPTURE(sc.mercer);
    KernelParams p;
    p.l_se = 0.4;
    p.a = 0.6;
    p.b = 0.7;
    int n = 14;

    auto fit_at = [&](const KernelParams& q, double noise, double s) {
      ExactOptions o = opt;
      o.scale = s;
      Dataset d = data;
      d.noise_variance[0] = noise;
      if (sc.mercer) return exact_fit(d, make_basis(sc.kind, q, n, 0.0), o);
      return exact_fit(d, sc.kind, q, o);
    };

    ExactGP model = fit_at(p, data.noise_variance[0], opt.scale);
    for (const std::string& name : sc.names) {
      CAPTURE(name);
      auto [lml, grad] = exact_lml_and_grad(model, name);
      CHECK(lml == doctest::Approx(exact_lml(model)).epsilon(1e-14));

      double fd = 0.0;
      if (name == "noise_variance") {
        double v = data.noise_variance[0], h = v * 1e-6;
        fd = (exact_lml(fit_at(p, v + h, opt.scale)) -
              exact_lml(fit_at(p, v - h, opt.scale))) /
             (2 * h);
      } else if (name == "scale") {
        double h = opt.scale * 1e-6;
        fd = (exact_lml(fit_at(p, data.noise_variance[0], opt.scale + h)) -
              exact_lml(fit_at(p, data.noise_variance[0], opt.scale - h))) /
             (2 * h);
      } else {
        double v = get_param(p, name), h = v * 1e-6;
        KernelParams up = p, dn = p;
        set_param(up, name, v + h);
        set_param(dn, name, v - h);
        fd = (exact_lml(fit_at(up, data.noise_variance[0], opt.scale)) -
              exact_lml(fit_at(dn, data.noise_variance[0], opt.scale))) /
             (2 * h);
      }
      CHECK(grad == doctest::Approx(fd).epsilon(1e-5));
    }
  }
}

TEST_CASE("posterior variance stays below the prior and the covariance is psd") {
  Dataset data = toy_dataset(40, 0.05);
  InputTransform tr = unit_range();
  ExactOptions opt;
  opt.transform = &tr;
  KernelParams p;
  p.l_se = 0.25;
  ExactGP model = exact_fit(data, KernelKind::SquaredExponential, p, opt);

  Vec xs = linspace(-1.0, 1.0, 25);
  Posterior post = exact_predict(model, xs, CovMode::Diagonal);
  for (Eigen::Index i = 0; i < xs.size(); ++i) {
    CHECK(post.variance[i] >= -1e-10);
    CHECK(post.variance[i] <= 1.0 + 1e-10);  // prior k(x,x) = 1
  }

  Posterior full = exact_predict(model, xs, CovMode::Full);
  CHECK(max_abs(full.covariance - full.covariance.transpose()) < 1e-12);
  Eigen::SelfAdjointEigenSolver<Mat> es(full.covariance);
  CHECK(es.eigenvalues().minCoeff() > -1e-10);
}

TEST_CASE("size guards refuse oversized dense problems") {
  ExactOptions opt;
  opt.max_n = 10;
  Dataset data = toy_dataset(11, 0.1);
  CHECK_THROWS_AS(exact_fit(data, KernelKind::SquaredExponential, KernelParams{}, opt),
                  std::invalid_argument);

  ExactMOOptions mopt;
  mopt.max_total = 10;
  MODataset mo = toy_mo_dataset(6, 0.1);
  CHECK_THROWS_AS(
      exact_mo_fit(mo, KernelKind::SquaredExponential, KernelParams{},
                   Mat::Identity(2, 2), mopt),
      std::invalid_argument);
}

TEST_CASE("independent outputs reduce the dense multi-output fit to single fits") {
  MODataset mo = toy_mo_dataset(30, 0.05);
  InputTransform tr = unit_range();
  ExactMOOptions mopt;
  mopt.transform = &tr;
  ExactOptions sopt;
  sopt.transform = &tr;
  KernelParams p;
  p.l_se = 0.3;

  ExactMOGP joint = exact_mo_fit(mo, KernelKind::SquaredExponential, p,
                                 Mat::Identity(2, 2), mopt);
  Vec xs = linspace(-0.9, 0.9, 13);
  for (int j = 0; j < 2; ++j) {
    Dataset single = make_dataset(mo.X, mo.Y.col(j), mo.S(j, j));
    ExactGP solo = exact_fit(single, KernelKind::SquaredExponential, p, sopt);
    Posterior pj = exact_mo_predict(joint, xs, j, CovMode::Diagonal);
    Posterior ps = exact_predict(solo, xs, CovMode::Diagonal);
    CHECK(rel_err(pj.mean, ps.mean) < 1e-9);
    CHECK(rel_err(pj.variance, ps.variance) < 1e-9);
  }
}

TEST_CASE("the dense multi-output route matches the kronecker route") {
  MODataset mo = toy_mo_dataset(40, 0.05);
  InputTransform tr = unit_range();
  KernelParams p;
  p.l_se = 0.3;
  MercerBasis basis = make_basis(KernelKind::SquaredExponential, p, 12, 0.0);
  Mat kf(2, 2);
  kf << 1.0, 0.6, 0.6, 1.2;
  Mat l_kf = coreg_from_covariance(kf).L;

  ExactMOOptions eopt;
  eopt.transform = &tr;
  MOFitOptions fopt;
  fopt.transform = &tr;
  fopt.eig_floor = 0.0;

  ExactMOGP dense = exact_mo_fit(mo, basis, l_kf, eopt);
  MOFittedModel fast = mo_fit(mo, basis, l_kf, fopt);

  Vec xs = linspace(-0.95, 0.95, 17);
  for (int j = 0; j < 2; ++j) {
    Posterior pd = exact_mo_predict(dense, xs, j, CovMode::Diagonal);
    Posterior pf = mo_predict(fast, xs, j, CovMode::Diagonal);
    CHECK(rel_err(pd.mean, pf.mean) < 1e-8);
    CHECK(rel_err(pd.variance, pf.variance) < 1e-8);
  }

  double dense_lml = exact_mo_lml_grads(dense, "", false, false).lml;
  CHECK(dense_lml ==
        doctest::Approx(mo_log_marginal_likelihood(mo, basis, l_kf, fopt))
            .epsilon(1e-10));

  SUBCASE("with a partially observed second output") {
    MODataset hetero = mo;
    hetero.observed.resize(2);
    for (Eigen::Index i = 0; i < mo.X.size(); ++i) hetero.observed[0].push_back(i);
    for (Eigen::Index i = 0; i < 22; ++i) hetero.observed[1].push_back(i);

    ExactMOGP hd = exact_mo_fit(hetero, basis, l_kf, eopt);
    MOFittedModel hf = mo_fit(hetero, basis, l_kf, fopt);
    for (int j = 0; j < 2; ++j) {
      Posterior pd = exact_mo_predict(hd, xs, j, CovMode::Diagonal);
      Posterior pf = mo_predict(hf, xs, j, CovMode::Diagonal);
      CHECK(rel_err(pd.mean, pf.mean) < 1e-8);
      CHECK(rel_err(pd.variance, pf.variance) < 1e-8);
    }
  }
}

TEST_CASE("dense multi-output gradients match central finite differences") {
  MODataset mo = toy_mo_dataset(25, 0.08);
  InputTransform tr = unit_range();
  ExactMOOptions opt;
  opt.transform = &tr;
  KernelParams p;
  p.l_se = 0.35;
  Mat l0(2, 2);
  l0 << 1.0, 0.0, -0.5, 0.9;

  auto lml_at = [&](const KernelParams& q, const Mat& l, double sigma2) {
    MODataset d = mo;
    d.S = sigma2 * Mat::Identity(2, 2);
    ExactMOGP m = exact_mo_fit(d, KernelKind::SquaredExponential, q, l, opt);
    return exact_mo_lml_grads(m, "", false, false).lml;
  };

  double sigma2 = mo.S(0, 0);
  ExactMOGP model = exact_mo_fit(mo, KernelKind::SquaredExponential, p, l0, opt);
  ExactMOGrads got = exact_mo_lml_grads(model, "l_se", true, true);

  {
    double h = p.l_se * 1e-6;
    KernelParams up = p, dn = p;
    up.l_se += h;
    dn.l_se -= h;
    double fd = (lml_at(up, l0, sigma2) - lml_at(dn, l0, sigma2)) / (2 * h);
    CHECK(got.grad_kernel == doctest::Approx(fd).epsilon(1e-5));
  }
  for (int pr = 0; pr < 2; ++pr)
    for (int q = 0; q <= pr; ++q) {
      CAPTURE(pr);
      CAPTURE(q);
      double h = 1e-6;
      Mat up = l0, dn = l0;
      up(pr, q) += h;
      dn(pr, q) -= h;
      double fd = (lml_at(p, up, sigma2) - lml_at(p, dn, sigma2)) / (2 * h);
      CHECK(got.grad_L(pr, q) == doctest::Approx(fd).epsilon(1e-5));
    }
  {
    double h = sigma2 * 1e-6;
    double fd = (lml_at(p, l0, sigma2 + h) - lml_at(p, l0, sigma2 - h)) / (2 * h);
    CHECK(got.grad_noise == doctest::Approx(fd).epsilon(1e-5));
  }

  SUBCASE("kernel gradients are closed-form only") {
    MercerBasis basis = make_basis(KernelKind::SquaredExponential, p, 10, 0.0);
    ExactMOGP mercer = exact_mo_fit(mo, basis, l0, opt);
    CHECK_THROWS_AS(exact_mo_lml_grads(mercer, "l_se", false, false),
                    std::logic_error);
  }
}
