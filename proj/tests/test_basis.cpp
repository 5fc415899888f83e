#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <functional>
#include <stdexcept>

#include "famgp/basis.hpp"

using namespace famgp;

namespace {

Vec linspace(double lo, double hi, int n) {
  Vec x(n);
  for (int i = 0; i < n; ++i) x[i] = lo + (hi - lo) * i / (n - 1);
  return x;
}

double max_abs(const Mat& m) { return m.cwiseAbs().maxCoeff(); }

double rel_err(const Mat& got, const Mat& want) {
  double scale = max_abs(want);
  if (scale == 0.0) return max_abs(got);
  return max_abs(got - want) / scale;
}

Mat exact_kernel(KernelKind kind, const KernelParams& p, const Vec& x, const Vec& y) {
  Mat k(x.size(), y.size());
  for (Eigen::Index i = 0; i < x.size(); ++i)
    for (Eigen::Index j = 0; j < y.size(); ++j) k(i, j) = kernel_eval(kind, p, x[i], y[j]);
  return k;
}

double reconstruction_mad(KernelKind kind, const KernelParams& p, int n, int grid) {
  Vec x = linspace(-1.0, 1.0, grid);
  MercerBasis basis = make_basis(kind, p, n);
  Mat diff = reconstruct_kernel(basis, x, x) - exact_kernel(kind, p, x, x);
  return diff.cwiseAbs().mean();
}

// Central finite difference of a matrix-valued function of one scalar.
Mat fd_central(const std::function<Mat(double)>& f, double at, double h) {
  return (f(at + h) - f(at - h)) / (2.0 * h);
}

struct VariantGuard {
  SeVariant saved = se_variant();
  ~VariantGuard() { set_se_variant(saved); }
};

}  // namespace

TEST_CASE("chebyshev eigenvalues follow the geometric ladder") {
  KernelParams p;
  p.a = 0.9;
  p.b = 0.9;
  MercerBasis basis = make_basis(KernelKind::Chebyshev, p, 3);
  REQUIRE(basis.n == 3);
  CHECK(basis.lambda[0] == doctest::Approx(0.1).epsilon(1e-12));
  CHECK(basis.lambda[1] == doctest::Approx(0.09).epsilon(1e-12));
  CHECK(basis.lambda[2] == doctest::Approx(0.081).epsilon(1e-12));
}

TEST_CASE("chebyshev basis row at x = 0.5") {
  KernelParams p;
  MercerBasis basis = make_basis(KernelKind::Chebyshev, p, 3);
  Vec x(1);
  x[0] = 0.5;
  Mat row = basis_matrix(basis, x).values;
  CHECK(row(0, 0) == doctest::Approx(1.0).epsilon(1e-14));
  CHECK(row(0, 1) == doctest::Approx(std::sqrt(2.0) * 0.5).epsilon(1e-14));
  CHECK(row(0, 2) == doctest::Approx(-std::sqrt(2.0) * 0.5).epsilon(1e-14));
}

TEST_CASE("chebyshev derivative values at the domain edge") {
  // T_i'(1) = i^2 and T_i''(1) = i^2 (i^2 - 1) / 3; the recurrence must stay
  // stable where the closed form via acos degenerates.
  KernelParams p;
  MercerBasis basis = make_basis(KernelKind::Chebyshev, p, 12, 0.0);
  Vec x(1);
  x[0] = 1.0;
  Mat d1 = basis_derivative(basis, x, 1).values;
  Mat d2 = basis_derivative(basis, x, 2).values;
  for (int i = 1; i < 12; ++i) {
    double ii = static_cast<double>(i) * i;
    CHECK(d1(0, i) == doctest::Approx(std::sqrt(2.0) * ii).epsilon(1e-10));
    CHECK(d2(0, i) == doctest::Approx(std::sqrt(2.0) * ii * (ii - 1.0) / 3.0).epsilon(1e-10));
  }
  CHECK(d1(0, 0) == 0.0);
}

TEST_CASE("chebyshev recurrence derivatives match the closed form") {
  KernelParams p;
  MercerBasis basis = make_basis(KernelKind::Chebyshev, p, 21, 0.0);
  Vec xs(4);
  xs << -0.9, -0.3, 0.4, 0.8;
  for (int k = 1; k <= 4; ++k) {
    Mat got = basis_derivative(basis, xs, k).values;
    for (int i = 1; i < 21; ++i)
      for (int r = 0; r < 4; ++r) {
        double want = std::sqrt(2.0) * chebyshev_derivative_closed_form(i, xs[r], k);
        CHECK(got(r, i) == doctest::Approx(want).epsilon(1e-9));
      }
  }
}

TEST_CASE("chebyshev closed-form kernel equals the converged series") {
  KernelParams p;
  p.a = 0.9;
  p.b = 0.5;
  MercerBasis basis = make_basis(KernelKind::Chebyshev, p, 120, 0.0);
  Vec x(3), y(3);
  x << -0.7, 0.1, 0.95;
  y << 0.3, -0.2, 0.6;
  Mat series = reconstruct_kernel(basis, x, y);
  Mat closed = exact_kernel(KernelKind::Chebyshev, p, x, y);
  CHECK(rel_err(series, closed) < 1e-12);
}

TEST_CASE("periodic basis row at zero") {
  KernelParams p;
  MercerBasis basis = make_basis(KernelKind::Periodic, p, 5);
  Vec x(1);
  x[0] = 0.0;
  Mat row = basis_matrix(basis, x).values;
  double want[5] = {1.0, 1.0, 0.0, 1.0, 0.0};
  for (int i = 0; i < 5; ++i) CHECK(row(0, i) == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("periodic first derivative row at zero") {
  KernelParams p;  // f_pr = 2
  MercerBasis basis = make_basis(KernelKind::Periodic, p, 5);
  Vec x(1);
  x[0] = 0.0;
  Mat row = basis_derivative(basis, x, 1).values;
  double want[5] = {0.0, 0.0, 2.0, 0.0, 4.0};
  for (int i = 0; i < 5; ++i) CHECK(row(0, i) == doctest::Approx(want[i]).epsilon(1e-14));
}

TEST_CASE("periodic single-slot basis is the constant eigenfunction") {
  KernelParams p;  // w_pr = 0.4
  MercerBasis basis = make_basis(KernelKind::Periodic, p, 1);
  REQUIRE(basis.n == 1);
  CHECK(basis.lambda[0] == doctest::Approx(0.15957691216050537).epsilon(1e-10));
  Vec x(3);
  x << -0.5, 0.0, 1.2;
  Mat m = basis_matrix(basis, x).values;
  for (int r = 0; r < 3; ++r) CHECK(m(r, 0) == 1.0);
}

TEST_CASE("periodic eigenvalues do not depend on the truncation") {
  KernelParams p;
  MercerBasis small = make_basis(KernelKind::Periodic, p, 5);
  MercerBasis big = make_basis(KernelKind::Periodic, p, 21);
  for (int i = 0; i < 5; ++i)
    CHECK(small.lambda[i] == doctest::Approx(big.lambda[i]).epsilon(1e-15));
}

TEST_CASE("periodic eigenfunctions repeat with the fundamental period") {
  KernelParams p;
  p.f_pr = 3.0;
  MercerBasis basis = make_basis(KernelKind::Periodic, p, 9);
  Vec x = linspace(-1.0, 1.0, 17);
  Vec shifted = x.array() + 2.0 * M_PI / p.f_pr;
  Mat a = basis_matrix(basis, x).values;
  Mat b = basis_matrix(basis, shifted).values;
  CHECK(max_abs(a - b) < 1e-12);
}

TEST_CASE("even periodic slot counts are rejected") {
  KernelParams p;
  CHECK_THROWS_AS(make_basis(KernelKind::Periodic, p, 4), std::invalid_argument);
  CHECK_THROWS_AS(make_basis(KernelKind::Periodic, p, 10), std::invalid_argument);
}

TEST_CASE("squared-exponential reconstruction error on a fine grid") {
  KernelParams p;
  p.l_se = 0.2;
  double mad = reconstruction_mad(KernelKind::SquaredExponential, p, 20, 200);
  CHECK(mad < 1.6e-3);
}

TEST_CASE("unnormalized squared-exponential variant reconstructs poorly") {
  VariantGuard guard;
  set_se_variant(SeVariant::Unnormalized);
  KernelParams p;
  p.l_se = 0.2;
  double mad = reconstruction_mad(KernelKind::SquaredExponential, p, 20, 120);
  CHECK(mad > 1.0);
  Vec x(1);
  x[0] = 0.3;
  MercerBasis basis = make_basis(KernelKind::SquaredExponential, p, 10);
  CHECK_THROWS_AS(basis_derivative(basis, x, 1), std::logic_error);
  CHECK_THROWS_AS(basis_matrix_grad(basis, x, "l_se"), std::logic_error);
}

TEST_CASE("periodic reconstruction error on a fine grid") {
  KernelParams p;  // w_pr = 0.4, f_pr = 2
  double mad = reconstruction_mad(KernelKind::Periodic, p, 21, 200);
  CHECK(mad < 4.5e-3);
}

TEST_CASE("reconstruction error shrinks as the truncation grows") {
  KernelParams p;
  p.l_se = 0.2;
  double m10 = reconstruction_mad(KernelKind::SquaredExponential, p, 10, 80);
  double m20 = reconstruction_mad(KernelKind::SquaredExponential, p, 20, 80);
  double m40 = reconstruction_mad(KernelKind::SquaredExponential, p, 40, 80);
  CHECK(m20 <= m10);
  CHECK(m40 <= m20);
  CHECK(m40 < 1e-5);
}

TEST_CASE("reconstructed kernel matrices are symmetric and positive semidefinite") {
  Vec x = linspace(-1.0, 1.0, 60);
  auto check_kind = [&](KernelKind kind, const KernelParams& p, int n) {
    MercerBasis basis = make_basis(kind, p, n);
    Mat k = reconstruct_kernel(basis, x, x);
    CHECK(max_abs(k - k.transpose()) < 1e-12);
    Eigen::SelfAdjointEigenSolver<Mat> es(k);
    CHECK(es.eigenvalues().minCoeff() >= -1e-10);
  };
  KernelParams p;
  p.l_se = 0.3;
  check_kind(KernelKind::SquaredExponential, p, 24);
  check_kind(KernelKind::Periodic, p, 11);
  check_kind(KernelKind::Chebyshev, p, 30);
}

TEST_CASE("kernel closed forms at pinned points") {
  KernelParams p;
  p.l_se = 0.2;
  CHECK(kernel_eval(KernelKind::SquaredExponential, p, 0.0, 0.2) ==
        doctest::Approx(std::exp(-0.5)).epsilon(1e-14));
  CHECK(kernel_eval(KernelKind::SquaredExponential, p, 0.4, 0.4) == doctest::Approx(1.0));
  CHECK(kernel_eval(KernelKind::Periodic, p, 0.1, 0.1 + 2.0 * M_PI / p.f_pr) ==
        doctest::Approx(1.0).epsilon(1e-12));
  CHECK(kernel_eval(KernelKind::Chebyshev, p, 0.3, 0.3) > 0.0);
  CHECK_THROWS_AS(kernel_eval(KernelKind::Chebyshev, p, 1.2, 0.0), std::domain_error);
}

TEST_CASE("squared-exponential derivative orders against finite differences") {
  KernelParams p;
  p.l_se = 0.25;
  MercerBasis basis = make_basis(KernelKind::SquaredExponential, p, 16, 0.0);
  Vec x = linspace(-0.9, 0.9, 7);
  const double h = 1e-6;
  for (int k = 1; k <= 3; ++k) {
    auto lower = [&](double shift) {
      Vec xs = x.array() + shift;
      return k == 1 ? basis_matrix(basis, xs).values : basis_derivative(basis, xs, k - 1).values;
    };
    Mat fd = fd_central(lower, 0.0, h);
    Mat got = basis_derivative(basis, x, k).values;
    CHECK(rel_err(got, fd) < 1e-6);
  }
}

TEST_CASE("periodic derivative orders against finite differences") {
  KernelParams p;
  MercerBasis basis = make_basis(KernelKind::Periodic, p, 9);
  Vec x = linspace(-0.9, 0.9, 7);
  const double h = 1e-6;
  for (int k = 1; k <= 4; ++k) {
    auto lower = [&](double shift) {
      Vec xs = x.array() + shift;
      return k == 1 ? basis_matrix(basis, xs).values : basis_derivative(basis, xs, k - 1).values;
    };
    Mat fd = fd_central(lower, 0.0, h);
    Mat got = basis_derivative(basis, x, k).values;
    CHECK(rel_err(got, fd) < 1e-6);
  }
}

TEST_CASE("chebyshev derivative orders against finite differences") {
  KernelParams p;
  MercerBasis basis = make_basis(KernelKind::Chebyshev, p, 14, 0.0);
  Vec x = linspace(-0.95, 0.95, 7);
  const double h = 1e-6;
  for (int k = 1; k <= 3; ++k) {
    auto lower = [&](double shift) {
      Vec xs = x.array() + shift;
      return k == 1 ? basis_matrix(basis, xs).values : basis_derivative(basis, xs, k - 1).values;
    };
    Mat fd = fd_central(lower, 0.0, h);
    Mat got = basis_derivative(basis, x, k).values;
    CHECK(rel_err(got, fd) < 1e-6);
  }
}

TEST_CASE("eigenvalue gradients against finite differences") {
  auto fd_lambda = [](KernelKind kind, KernelParams p, const std::string& name, int n) {
    double at = get_param(p, name);
    double h = 1e-6 * std::max(1.0, std::abs(at));
    KernelParams lo = p, hi = p;
    set_param(lo, name, at - h);
    set_param(hi, name, at + h);
    Vec flo = make_basis(kind, lo, n, 0.0).lambda;
    Vec fhi = make_basis(kind, hi, n, 0.0).lambda;
    return Vec((fhi - flo) / (2.0 * h));
  };
  auto run = [&](KernelKind kind, KernelParams p, const std::string& name, int n) {
    MercerBasis basis = make_basis(kind, p, n, 0.0);
    Vec got = lambda_grad(basis, name);
    Vec want = fd_lambda(kind, p, name, n);
    double scale = want.cwiseAbs().maxCoeff();
    CHECK((got - want).cwiseAbs().maxCoeff() / std::max(scale, 1e-30) < 1e-6);
  };
  KernelParams p;
  p.l_se = 0.2;
  run(KernelKind::SquaredExponential, p, "l_se", 12);
  run(KernelKind::Periodic, p, "w_pr", 9);
  p.a = 0.9;
  p.b = 0.8;
  run(KernelKind::Chebyshev, p, "a", 10);
  run(KernelKind::Chebyshev, p, "b", 10);

  MercerBasis per = make_basis(KernelKind::Periodic, p, 9);
  CHECK(lambda_grad(per, "f_pr").cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("eigenfunction parameter gradients against finite differences") {
  Vec x = linspace(-0.9, 0.9, 9);
  auto run = [&](KernelKind kind, KernelParams p, const std::string& name, int n) {
    MercerBasis basis = make_basis(kind, p, n, 0.0);
    Mat got = basis_matrix_grad(basis, x, name).values;
    double at = get_param(p, name);
    double h = 1e-6 * std::max(1.0, std::abs(at));
    auto eval = [&](double v) {
      KernelParams q = p;
      set_param(q, name, v);
      return basis_matrix(make_basis(kind, q, n, 0.0), x).values;
    };
    Mat want = fd_central(eval, at, h);
    CHECK(rel_err(got, want) < 1e-6);
  };
  KernelParams p;
  p.l_se = 0.2;
  run(KernelKind::SquaredExponential, p, "l_se", 12);
  run(KernelKind::Periodic, p, "f_pr", 9);

  MercerBasis per = make_basis(KernelKind::Periodic, p, 9);
  CHECK(max_abs(basis_matrix_grad(per, x, "w_pr").values) == 0.0);
  MercerBasis ch = make_basis(KernelKind::Chebyshev, p, 8);
  CHECK(max_abs(basis_matrix_grad(ch, x, "a").values) == 0.0);
  CHECK(max_abs(basis_matrix_grad(ch, x, "b").values) == 0.0);
}

TEST_CASE("eigenvalue floor trims the trailing tail") {
  KernelParams p;  // a = b = 0.5
  MercerBasis floored = make_basis(KernelKind::Chebyshev, p, 75);
  CHECK(floored.floored);
  CHECK(floored.n == 47);
  CHECK(floored.n_requested == 75);
  CHECK(floored.lambda.minCoeff() >= 1e-14 * floored.lambda.maxCoeff());

  MercerBasis full = make_basis(KernelKind::Chebyshev, p, 75, 0.0);
  CHECK_FALSE(full.floored);
  CHECK(full.n == 75);
}

TEST_CASE("periodic floor drops whole cosine-sine pairs") {
  KernelParams p;
  p.w_pr = 2.0;
  MercerBasis basis = make_basis(KernelKind::Periodic, p, 21);
  CHECK(basis.floored);
  CHECK(basis.n == 9);
  CHECK(basis.n % 2 == 1);
}

TEST_CASE("floor that would erase the whole tail is an error") {
  KernelParams p;
  p.a = 1e-20;
  CHECK_THROWS_AS(make_basis(KernelKind::Chebyshev, p, 8), std::underflow_error);
}

TEST_CASE("invalid kernel parameters are rejected") {
  KernelParams p;
  p.l_se = 0.0;
  CHECK_THROWS_AS(make_basis(KernelKind::SquaredExponential, p, 4), std::invalid_argument);
  p.l_se = 0.2;
  p.w_pr = -0.1;
  CHECK_THROWS_AS(make_basis(KernelKind::Periodic, p, 3), std::invalid_argument);
  p.w_pr = 0.4;
  p.a = 0.0;
  CHECK_THROWS_AS(make_basis(KernelKind::Chebyshev, p, 4), std::invalid_argument);
  p.a = 1.5;
  CHECK_THROWS_AS(make_basis(KernelKind::Chebyshev, p, 4), std::invalid_argument);
  p.a = 0.5;
  p.b = 1.0;
  CHECK_THROWS_AS(make_basis(KernelKind::Chebyshev, p, 4), std::invalid_argument);
  p.b = 0.5;
  CHECK_THROWS_AS(make_basis(KernelKind::Chebyshev, p, 0), std::invalid_argument);

  // a = 1 is a legal kernel parameter (the constant term vanishes) but the
  // resulting zero eigenvalue cannot enter a basis.
  p.a = 1.0;
  CHECK(kernel_eval(KernelKind::Chebyshev, p, 0.3, -0.2) ==
        doctest::Approx(kernel_eval(KernelKind::Chebyshev, p, -0.2, 0.3)));
  CHECK_THROWS_AS(make_basis(KernelKind::Chebyshev, p, 4), std::underflow_error);
}

TEST_CASE("eigenvalues are positive and ordered within their families") {
  KernelParams p;
  p.l_se = 0.15;
  MercerBasis se = make_basis(KernelKind::SquaredExponential, p, 30, 0.0);
  for (int i = 0; i < se.n; ++i) CHECK(se.lambda[i] > 0.0);
  for (int i = 1; i < se.n; ++i) CHECK(se.lambda[i] < se.lambda[i - 1]);

  MercerBasis pr = make_basis(KernelKind::Periodic, p, 11, 0.0);
  for (int i = 0; i < pr.n; ++i) CHECK(pr.lambda[i] > 0.0);
  for (int i = 1; i + 2 < pr.n; i += 2) CHECK(pr.lambda[i + 2] < pr.lambda[i]);
  CHECK(pr.lambda[1] == pr.lambda[2]);
}

TEST_CASE("high truncations stay finite") {
  KernelParams p;
  p.l_se = 0.2;
  MercerBasis basis = make_basis(KernelKind::SquaredExponential, p, 300, 0.0);
  Vec x = linspace(-1.0, 1.0, 15);
  Mat m = basis_matrix(basis, x).values;
  CHECK(m.allFinite());
  Mat d = basis_derivative(basis, x, 2).values;
  CHECK(d.allFinite());
}

TEST_CASE("chebyshev evaluation honors the extrapolation slack") {
  KernelParams p;
  MercerBasis basis = make_basis(KernelKind::Chebyshev, p, 6);
  Vec ok(1), bad(1);
  ok[0] = 1.04;
  bad[0] = 1.06;
  CHECK(basis_matrix(basis, ok).values.allFinite());
  CHECK_THROWS_AS(basis_matrix(basis, bad), std::domain_error);
  CHECK_THROWS_AS(basis_derivative(basis, bad, 1), std::domain_error);
}

TEST_CASE("asymmetric reconstruction grids agree with the closed form") {
  KernelParams p;
  p.l_se = 0.3;
  MercerBasis basis = make_basis(KernelKind::SquaredExponential, p, 60, 0.0);
  Vec x = linspace(-0.8, 0.8, 23);
  Vec y = linspace(-0.5, 0.9, 11);
  Mat rec = reconstruct_kernel(basis, x, y);
  REQUIRE(rec.rows() == 23);
  REQUIRE(rec.cols() == 11);
  Mat want = exact_kernel(KernelKind::SquaredExponential, p, x, y);
  CHECK(max_abs(rec - want) < 1e-8);
}
