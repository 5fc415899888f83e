#include "famgp/basis.hpp"

#include <atomic>
#include <cmath>
#include <cstdio>

namespace famgp {

namespace {

std::atomic<SeVariant> g_se_variant{SeVariant::Normalized};

// Chebyshev extrapolation slack: the predictor tolerates inputs up to 5%
// outside [-1,1] (with a warning), so basis evaluation must too.
constexpr double kChebSlack = 1.05;

}  // namespace

void set_se_variant(SeVariant v) { g_se_variant.store(v); }
SeVariant se_variant() { return g_se_variant.load(); }

KernelKind kernel_kind_from_string(const std::string& s) {
  if (s == "squared-exponential" || s == "se") return KernelKind::SquaredExponential;
  if (s == "periodic") return KernelKind::Periodic;
  if (s == "chebyshev") return KernelKind::Chebyshev;
  throw std::invalid_argument("unknown kernel kind: " + s);
}

std::string to_string(KernelKind kind) {
  switch (kind) {
    case KernelKind::SquaredExponential: return "squared-exponential";
    case KernelKind::Periodic: return "periodic";
    case KernelKind::Chebyshev: return "chebyshev";
  }
  return "?";
}

void validate_params(KernelKind kind, const KernelParams& p) {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v))
      throw std::invalid_argument(std::string(name) + " must be positive and finite");
  };
  switch (kind) {
    case KernelKind::SquaredExponential:
      positive(p.l_se, "l_se");
      positive(p.alpha_se, "alpha_se");
      break;
    case KernelKind::Periodic:
      positive(p.f_pr, "f_pr");
      positive(p.w_pr, "w_pr");
      break;
    case KernelKind::Chebyshev:
      if (!(p.a > 0.0 && p.a <= 1.0)) throw std::invalid_argument("a must be in (0,1]");
      if (!(p.b > 0.0 && p.b < 1.0)) throw std::invalid_argument("b must be in (0,1)");
      break;
  }
}

std::vector<std::string> kernel_param_names(KernelKind kind) {
  switch (kind) {
    case KernelKind::SquaredExponential: return {"l_se"};
    case KernelKind::Periodic: return {"f_pr", "w_pr"};
    case KernelKind::Chebyshev: return {"a", "b"};
  }
  return {};
}

bool param_in_eigenfunctions(KernelKind kind, const std::string& param) {
  switch (kind) {
    case KernelKind::SquaredExponential: return param == "l_se";
    case KernelKind::Periodic: return param == "f_pr";
    case KernelKind::Chebyshev: return false;
  }
  return false;
}

double get_param(const KernelParams& p, const std::string& name) {
  if (name == "l_se") return p.l_se;
  if (name == "alpha_se") return p.alpha_se;
  if (name == "f_pr") return p.f_pr;
  if (name == "w_pr") return p.w_pr;
  if (name == "a") return p.a;
  if (name == "b") return p.b;
  throw std::invalid_argument("unknown kernel parameter: " + name);
}

void set_param(KernelParams& p, const std::string& name, double value) {
  if (name == "l_se") p.l_se = value;
  else if (name == "alpha_se") p.alpha_se = value;
  else if (name == "f_pr") p.f_pr = value;
  else if (name == "w_pr") p.w_pr = value;
  else if (name == "a") p.a = value;
  else if (name == "b") p.b = value;
  else throw std::invalid_argument("unknown kernel parameter: " + name);
}

// ---------------------------------------------------------------------------
// Squared exponential: Mercer expansion of exp(-(x-y)^2 / (2 l^2)) under a
// Gaussian weight with shape parameter alpha.

namespace {

struct SeConsts {
  double eta, beta, delta2, T, c;  // c = alpha*beta, argument scale
};

SeConsts se_consts(const KernelParams& p) {
  SeConsts s;
  double al = p.alpha_se;
  s.eta = 1.0 / (std::sqrt(2.0) * p.l_se);
  double q = 2.0 * s.eta / al;
  s.beta = std::pow(1.0 + q * q, 0.25);
  s.delta2 = 0.5 * al * al * (s.beta * s.beta - 1.0);
  s.T = al * al + s.delta2 + s.eta * s.eta;
  s.c = al * s.beta;
  return s;
}

// Orthonormal physicists' Hermite values hn_i(t), i < n, as mantissa *
// exp(logscale) pairs so rows stay finite for large |t|.
void hermite_row(double t, int n, double* mant, double* logs) {
  double s = 0.0;
  double hm = 1.0;
  double h = std::sqrt(2.0) * t;
  mant[0] = 1.0;
  logs[0] = 0.0;
  if (n > 1) {
    mant[1] = h;
    logs[1] = 0.0;
  }
  for (int i = 1; i + 1 < n; ++i) {
    double next = t * std::sqrt(2.0 / (i + 1)) * h - std::sqrt(double(i) / (i + 1)) * hm;
    hm = h;
    h = next;
    double a = std::abs(h);
    if (a > 1e140) {
      double d = std::log(a);
      double f = std::exp(-d);
      h *= f;
      hm *= f;
      s += d;
    }
    mant[i + 1] = h;
    logs[i + 1] = s;
  }
}

// Unnormalized physicists' Hermite H_i(t), same scaled representation.
void hermite_row_raw(double t, int n, double* mant, double* logs) {
  double s = 0.0;
  double hm = 1.0, h = 2.0 * t;
  mant[0] = 1.0;
  logs[0] = 0.0;
  if (n > 1) {
    mant[1] = h;
    logs[1] = 0.0;
  }
  for (int i = 1; i + 1 < n; ++i) {
    double next = 2.0 * t * h - 2.0 * i * hm;
    hm = h;
    h = next;
    double a = std::abs(h);
    if (a > 1e140) {
      double d = std::log(a);
      double f = std::exp(-d);
      h *= f;
      hm *= f;
      s += d;
    }
    mant[i + 1] = h;
    logs[i + 1] = s;
  }
}

double checked_exp(double logmag) {
  if (logmag > 709.0)
    throw std::overflow_error("basis entry exceeds representable magnitude");
  return std::exp(logmag);
}

Vec se_lambda(const KernelParams& p, int n) {
  SeConsts s = se_consts(p);
  double base = 0.5 * (std::log(p.alpha_se * p.alpha_se) - std::log(s.T));
  double ratio = std::log(s.eta * s.eta) - std::log(s.T);
  Vec lam(n);
  for (int i = 0; i < n; ++i) lam[i] = std::exp(base + i * ratio);
  return lam;
}

Mat se_basis_matrix(const KernelParams& p, const Vec& X, int n) {
  SeConsts s = se_consts(p);
  Mat out(X.size(), n);
  std::vector<double> mant(n), logs(n);
  bool unnorm = se_variant() == SeVariant::Unnormalized;
  double halflogbeta = 0.5 * std::log(s.beta);
  for (Eigen::Index r = 0; r < X.size(); ++r) {
    double x = X[r];
    double t = s.c * x;
    if (unnorm) {
      // sqrt(beta/i!) H_i(alpha beta x) e^{-alpha^2 x^2} with raw Hermite polynomials.
      hermite_row_raw(t, n, mant.data(), logs.data());
      double env = -p.alpha_se * p.alpha_se * x * x;
      for (int i = 0; i < n; ++i) {
        double lm = halflogbeta - 0.5 * std::lgamma(i + 1.0) + logs[i] + env;
        out(r, i) = (mant[i] == 0.0) ? 0.0 : mant[i] * checked_exp(lm);
      }
    } else {
      hermite_row(t, n, mant.data(), logs.data());
      double env = -s.delta2 * x * x;
      for (int i = 0; i < n; ++i) {
        double lm = halflogbeta + logs[i] + env;
        out(r, i) = (mant[i] == 0.0) ? 0.0 : mant[i] * checked_exp(lm);
      }
    }
  }
  return out;
}

// Envelope derivative polynomials for e^{-delta2 x^2}: P_0 = 1,
// P_{m+1} = -2 delta2 (x P_m + m P_{m-1}); an Appell-style ladder.
void envelope_polys(double delta2, double x, int k, double* P) {
  P[0] = 1.0;
  if (k >= 1) P[1] = -2.0 * delta2 * x;
  for (int m = 1; m < k; ++m)
    P[m + 1] = -2.0 * delta2 * (x * P[m] + m * P[m - 1]);
}

Mat se_basis_derivative(const KernelParams& p, const Vec& X, int n, int k) {
  if (se_variant() == SeVariant::Unnormalized)
    throw std::logic_error("unnormalized SE variant supports plain evaluation only");
  SeConsts s = se_consts(p);
  Mat out(X.size(), n);
  std::vector<double> mant(n), logs(n), P(k + 1), binom(k + 1);
  binom[0] = 1.0;
  for (int j = 1; j <= k; ++j) binom[j] = binom[j - 1] * (k - j + 1) / j;
  double halflogbeta = 0.5 * std::log(s.beta);
  double logsc = std::log(std::sqrt(2.0) * s.c);
  for (Eigen::Index r = 0; r < X.size(); ++r) {
    double x = X[r];
    hermite_row(s.c * x, n, mant.data(), logs.data());
    envelope_polys(s.delta2, x, k, P.data());
    double env = -s.delta2 * x * x;
    for (int i = 0; i < n; ++i) {
      double sum = 0.0;
      int jmax = std::min(k, i);
      for (int j = 0; j <= jmax; ++j) {
        double lm = halflogbeta + env + j * logsc +
                    0.5 * (std::lgamma(i + 1.0) - std::lgamma(i - j + 1.0)) +
                    logs[i - j];
        if (mant[i - j] == 0.0) continue;
        sum += binom[j] * mant[i - j] * checked_exp(lm) * P[k - j];
      }
      out(r, i) = sum;
    }
  }
  return out;
}

Vec se_lambda_grad_l(const KernelParams& p, int n) {
  SeConsts s = se_consts(p);
  double etap = -s.eta / p.l_se;
  double betap = 2.0 * s.eta * etap / (p.alpha_se * p.alpha_se) * std::pow(s.beta, -3.0);
  double delta2p = p.alpha_se * p.alpha_se * s.beta * betap;
  double Tp = delta2p + 2.0 * s.eta * etap;
  Vec lam = se_lambda(p, n);
  Vec g(n);
  for (int i = 0; i < n; ++i)
    g[i] = lam[i] * (2.0 * i * etap / s.eta - (i + 0.5) * Tp / s.T);
  return g;
}

Mat se_basis_grad_l(const KernelParams& p, const Vec& X, int n) {
  if (se_variant() == SeVariant::Unnormalized)
    throw std::logic_error("unnormalized SE variant supports plain evaluation only");
  SeConsts s = se_consts(p);
  double etap = -s.eta / p.l_se;
  double betap = 2.0 * s.eta * etap / (p.alpha_se * p.alpha_se) * std::pow(s.beta, -3.0);
  double delta2p = p.alpha_se * p.alpha_se * s.beta * betap;
  Mat Phi = se_basis_matrix(p, X, n);
  Mat out(X.size(), n);
  for (Eigen::Index r = 0; r < X.size(); ++r) {
    double x = X[r];
    double common = betap / (2.0 * s.beta) - delta2p * x * x;
    out(r, 0) = common * Phi(r, 0);
    for (int i = 1; i < n; ++i)
      out(r, i) = common * Phi(r, i) +
                  std::sqrt(2.0 * i) * p.alpha_se * betap * x * Phi(r, i - 1);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Periodic: exp(-2 sin^2(f (x-y)/2) / w^2) as a harmonic Fourier series with
// Gaussian-shaped coefficients A_i = e^{-i^2 w^2/2}. Slots are ordered
// [1, cos(fx), sin(fx), cos(2fx), sin(2fx), ...]; n must be odd.

struct PeriodicConsts {
  double gamma, zeta;  // converged infinite sums
};

PeriodicConsts periodic_consts(double w) {
  double gamma = 0.0, zeta = 0.0;
  for (int i = 1; i < 100000; ++i) {
    double A = std::exp(-0.5 * i * i * w * w);
    double g_old = gamma;
    gamma += (i % 2 == 1) ? A : -A;
    zeta += A;
    if (A < 1e-18 && gamma == g_old) break;
  }
  zeta += gamma;
  return {gamma, zeta};
}

int periodic_pairs(int n) {
  if (n % 2 == 0)
    throw std::invalid_argument(
        "periodic basis size must be odd: 1 constant slot plus complete cos/sin pairs");
  return (n - 1) / 2;
}

Vec periodic_lambda(const KernelParams& p, int n) {
  int h = periodic_pairs(n);
  PeriodicConsts c = periodic_consts(p.w_pr);
  Vec lam(n);
  lam[0] = c.gamma / c.zeta;
  for (int i = 1; i <= h; ++i) {
    double A = std::exp(-0.5 * i * i * p.w_pr * p.w_pr);
    lam[2 * i - 1] = A / c.zeta;
    lam[2 * i] = A / c.zeta;
  }
  return lam;
}

Mat periodic_basis_matrix(const KernelParams& p, const Vec& X, int n, int k) {
  int h = periodic_pairs(n);
  Mat out(X.size(), n);
  // d^k/dx^k of cos(ifx), sin(ifx): scale (if)^k, phase rotation by k quarter
  // turns. cos-slot cycle: cos, -sin, -cos, sin; sin-slot: sin, cos, -sin, -cos.
  int ph = k % 4;
  for (Eigen::Index r = 0; r < X.size(); ++r) {
    out(r, 0) = (k == 0) ? 1.0 : 0.0;
    for (int i = 1; i <= h; ++i) {
      double arg = i * p.f_pr * X[r];
      double sc = std::pow(i * p.f_pr, k);
      double cv = std::cos(arg), sv = std::sin(arg);
      double cd, sd;
      switch (ph) {
        case 0: cd = cv; sd = sv; break;
        case 1: cd = -sv; sd = cv; break;
        case 2: cd = -cv; sd = -sv; break;
        default: cd = sv; sd = -cv; break;
      }
      out(r, 2 * i - 1) = sc * cd;
      out(r, 2 * i) = sc * sd;
    }
  }
  return out;
}

Vec periodic_lambda_grad_w(const KernelParams& p, int n) {
  int h = periodic_pairs(n);
  double w = p.w_pr;
  PeriodicConsts c = periodic_consts(w);
  // term derivatives A_i' = -i^2 w A_i, accumulated the same way as the sums
  double gammap = 0.0, zetap = 0.0;
  for (int i = 1; i < 100000; ++i) {
    double A = std::exp(-0.5 * i * i * w * w);
    double Ap = -double(i) * i * w * A;
    gammap += (i % 2 == 1) ? Ap : -Ap;
    zetap += Ap;
    if (A < 1e-18) break;
  }
  zetap += gammap;
  Vec g(n);
  g[0] = gammap / c.zeta - c.gamma * zetap / (c.zeta * c.zeta);
  for (int i = 1; i <= h; ++i) {
    double lam = std::exp(-0.5 * i * i * w * w) / c.zeta;
    double v = -double(i) * i * w * lam - lam * zetap / c.zeta;
    g[2 * i - 1] = v;
    g[2 * i] = v;
  }
  return g;
}

Mat periodic_basis_grad_f(const KernelParams& p, const Vec& X, int n) {
  int h = periodic_pairs(n);
  Mat out = Mat::Zero(X.size(), n);
  for (Eigen::Index r = 0; r < X.size(); ++r) {
    double x = X[r];
    for (int i = 1; i <= h; ++i) {
      double arg = i * p.f_pr * x;
      out(r, 2 * i - 1) = -i * x * std::sin(arg);
      out(r, 2 * i) = i * x * std::cos(arg);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Chebyshev: lambda_0 = 1-a, lambda_i = a(1-b) b^{i-1}; phi_0 = 1,
// phi_i = sqrt(2) T_i(x).

void cheb_domain_check(const Vec& X) {
  for (Eigen::Index r = 0; r < X.size(); ++r)
    if (!(std::abs(X[r]) <= kChebSlack))
      throw std::domain_error("chebyshev basis input outside [-1,1] beyond 5% slack");
}

Vec cheb_lambda(const KernelParams& p, int n) {
  Vec lam(n);
  lam[0] = 1.0 - p.a;
  double v = p.a * (1.0 - p.b);
  for (int i = 1; i < n; ++i) {
    lam[i] = v;
    v *= p.b;
  }
  return lam;
}

// T_i and derivatives via the Leibniz-differentiated three-term recurrence:
// T^{(d)}_{i+1} = 2x T^{(d)}_i + 2d T^{(d-1)}_i - T^{(d)}_{i-1}.
// Row-stable at x = +-1 where the closed forms degenerate.
Mat cheb_basis_matrix(const KernelParams&, const Vec& X, int n, int k) {
  Mat out(X.size(), n);
  const double s2 = std::sqrt(2.0);
  std::vector<double> tab((k + 1) * n);
  auto T = [&](int d, int i) -> double& { return tab[d * n + i]; };
  for (Eigen::Index r = 0; r < X.size(); ++r) {
    double x = X[r];
    for (int d = 0; d <= k; ++d) {
      T(d, 0) = (d == 0) ? 1.0 : 0.0;
      if (n > 1) T(d, 1) = (d == 0) ? x : (d == 1 ? 1.0 : 0.0);
    }
    for (int i = 1; i + 1 < n; ++i)
      for (int d = 0; d <= k; ++d)
        T(d, i + 1) = 2.0 * x * T(d, i) - T(d, i - 1) +
                      (d > 0 ? 2.0 * d * T(d - 1, i) : 0.0);
    out(r, 0) = (k == 0) ? 1.0 : 0.0;
    for (int i = 1; i < n; ++i) out(r, i) = s2 * T(k, i);
  }
  return out;
}

Vec cheb_lambda_grad(const KernelParams& p, int n, const std::string& param) {
  Vec g(n);
  if (param == "a") {
    g[0] = -1.0;
    double v = 1.0 - p.b;
    for (int i = 1; i < n; ++i) {
      g[i] = v;
      v *= p.b;
    }
  } else {  // b
    g[0] = 0.0;
    for (int i = 1; i < n; ++i)
      g[i] = -p.a * (i * (p.b - 1.0) + 1.0) * std::pow(p.b, i - 2.0);
  }
  return g;
}

double cheb_kernel_series_term(double b, double cosphi) {
  // sum_{i>=1} b^{i-1} cos(i phi) = (cos phi - b) / (1 - 2 b cos phi + b^2)
  return (cosphi - b) / (1.0 - 2.0 * b * cosphi + b * b);
}

}  // namespace

// ---------------------------------------------------------------------------

double kernel_eval(KernelKind kind, const KernelParams& p, double x, double x2) {
  validate_params(kind, p);
  switch (kind) {
    case KernelKind::SquaredExponential: {
      double d = x - x2;
      return std::exp(-d * d / (2.0 * p.l_se * p.l_se));
    }
    case KernelKind::Periodic: {
      double s = std::sin(0.5 * p.f_pr * (x - x2));
      return std::exp(-2.0 * s * s / (p.w_pr * p.w_pr));
    }
    case KernelKind::Chebyshev: {
      if (std::abs(x) > 1.0 || std::abs(x2) > 1.0)
        throw std::domain_error("chebyshev kernel inputs must lie in [-1,1]");
      double th = std::acos(x), ps = std::acos(x2);
      double R = cheb_kernel_series_term(p.b, std::cos(th - ps)) +
                 cheb_kernel_series_term(p.b, std::cos(th + ps));
      return (1.0 - p.a) + p.a * (1.0 - p.b) * R;
    }
  }
  return 0.0;
}

MercerBasis make_basis(KernelKind kind, const KernelParams& p, int n, double eig_floor) {
  validate_params(kind, p);
  if (n < 1) throw std::invalid_argument("basis size n must be >= 1");
  MercerBasis basis;
  basis.kind = kind;
  basis.params = p;
  basis.n_requested = n;
  basis.eig_floor = eig_floor;
  Vec lam;
  switch (kind) {
    case KernelKind::SquaredExponential: lam = se_lambda(p, n); break;
    case KernelKind::Periodic: lam = periodic_lambda(p, n); break;
    case KernelKind::Chebyshev: lam = cheb_lambda(p, n); break;
  }
  int keep = n;
  if (eig_floor > 0.0) {
    double cut = eig_floor * lam.maxCoeff();
    while (keep > 1 && lam[keep - 1] < cut) --keep;
    if (kind == KernelKind::Periodic && keep < n) {
      // drop whole cos/sin pairs so the slot layout stays complete
      if (keep % 2 == 0) --keep;
      if (keep < 1) keep = 1;
    }
  }
  if (keep == 1 && n > 1 && eig_floor > 0.0 && lam.size() > 1 &&
      lam[1] < eig_floor * lam.maxCoeff())
    throw std::underflow_error(
        "all eigenvalues beyond index 0 fall below the floor; "
        "reduce n or loosen eig_floor");
  basis.floored = keep < n;
  basis.n = keep;
  basis.lambda = lam.head(keep);
  for (int i = 0; i < keep; ++i)
    if (!(basis.lambda[i] > 0.0) || !std::isfinite(basis.lambda[i]))
      throw std::underflow_error("non-positive eigenvalue in basis; loosen parameters");
  if (basis.floored)
    std::fprintf(stderr,
                 "famgp: eigenvalue floor dropped %d of %d eigenvalues (%s)\n",
                 n - keep, n, to_string(kind).c_str());
  return basis;
}

BasisMatrix basis_matrix(const MercerBasis& basis, const Vec& X) {
  BasisMatrix bm;
  bm.derivative_order = 0;
  switch (basis.kind) {
    case KernelKind::SquaredExponential:
      bm.values = se_basis_matrix(basis.params, X, basis.n);
      break;
    case KernelKind::Periodic:
      bm.values = periodic_basis_matrix(basis.params, X, basis.n, 0);
      break;
    case KernelKind::Chebyshev:
      cheb_domain_check(X);
      bm.values = cheb_basis_matrix(basis.params, X, basis.n, 0);
      break;
  }
  return bm;
}

BasisMatrix basis_derivative(const MercerBasis& basis, const Vec& X, int k) {
  if (k < 1) throw std::invalid_argument("derivative order must be >= 1");
  BasisMatrix bm;
  bm.derivative_order = k;
  switch (basis.kind) {
    case KernelKind::SquaredExponential:
      bm.values = se_basis_derivative(basis.params, X, basis.n, k);
      break;
    case KernelKind::Periodic:
      bm.values = periodic_basis_matrix(basis.params, X, basis.n, k);
      break;
    case KernelKind::Chebyshev:
      cheb_domain_check(X);
      bm.values = cheb_basis_matrix(basis.params, X, basis.n, k);
      break;
  }
  return bm;
}

Vec lambda_grad(const MercerBasis& basis, const std::string& param) {
  switch (basis.kind) {
    case KernelKind::SquaredExponential:
      if (param == "l_se") return se_lambda_grad_l(basis.params, basis.n);
      break;
    case KernelKind::Periodic:
      if (param == "w_pr") return periodic_lambda_grad_w(basis.params, basis.n);
      if (param == "f_pr") return Vec::Zero(basis.n);
      break;
    case KernelKind::Chebyshev:
      if (param == "a" || param == "b")
        return cheb_lambda_grad(basis.params, basis.n, param);
      break;
  }
  throw std::invalid_argument("lambda_grad: unknown parameter " + param +
                              " for kernel " + to_string(basis.kind));
}

BasisMatrix basis_matrix_grad(const MercerBasis& basis, const Vec& X,
                              const std::string& param) {
  BasisMatrix bm;
  bm.derivative_order = 0;
  switch (basis.kind) {
    case KernelKind::SquaredExponential:
      if (param == "l_se") {
        bm.values = se_basis_grad_l(basis.params, X, basis.n);
        return bm;
      }
      break;
    case KernelKind::Periodic:
      if (param == "f_pr") {
        bm.values = periodic_basis_grad_f(basis.params, X, basis.n);
        return bm;
      }
      if (param == "w_pr") {
        bm.values = Mat::Zero(X.size(), basis.n);
        return bm;
      }
      break;
    case KernelKind::Chebyshev:
      if (param == "a" || param == "b") {
        cheb_domain_check(X);
        bm.values = Mat::Zero(X.size(), basis.n);
        return bm;
      }
      break;
  }
  throw std::invalid_argument("basis_matrix_grad: unknown parameter " + param +
                              " for kernel " + to_string(basis.kind));
}

Mat reconstruct_kernel(const MercerBasis& basis, const Vec& X, const Vec& X2) {
  Mat P1 = basis_matrix(basis, X).values;
  Mat P2 = basis_matrix(basis, X2).values;
  return P1 * basis.lambda.asDiagonal() * P2.transpose();
}

double chebyshev_derivative_closed_form(int i, double x, int k) {
  // d^k/dx^k T_i = i 2^{k-1} (k-1)! C^{(k)}_{i-k}  (Gegenbauer), i >= k >= 1.
  if (k < 1) throw std::invalid_argument("order must be >= 1");
  if (i < k) return 0.0;
  int m = i - k;
  double alpha = k;
  double cm2 = 1.0;                 // C_0
  double cm1 = 2.0 * alpha * x;     // C_1
  double C = (m == 0) ? cm2 : cm1;
  for (int j = 2; j <= m; ++j) {
    C = (2.0 * x * (j + alpha - 1.0) * cm1 - (j + 2.0 * alpha - 2.0) * cm2) / j;
    cm2 = cm1;
    cm1 = C;
  }
  double pref = i * std::pow(2.0, k - 1) * std::tgamma(double(k));
  return pref * C;
}

}  // namespace famgp
