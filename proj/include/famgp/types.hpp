#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace famgp {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

enum class KernelKind { SquaredExponential, Periodic, Chebyshev };

KernelKind kernel_kind_from_string(const std::string& s);
std::string to_string(KernelKind kind);

// One struct holds the parameters of all three families; only the fields of
// the active kind are meaningful. Keeps CLI/JSON plumbing simple.
struct KernelParams {
  double l_se = 0.2;      // squared-exponential length scale
  double alpha_se = 1.0;  // squared-exponential global scaling factor
  double f_pr = 2.0;      // periodic angular frequency (rad per normalized unit)
  double w_pr = 0.4;      // periodic width
  double a = 0.5;         // chebyshev, in (0,1]
  double b = 0.5;         // chebyshev, in (0,1)
};

// Throws std::invalid_argument naming the offending field.
void validate_params(KernelKind kind, const KernelParams& p);

// Hyperparameters of a kind that gradient/training operations accept.
std::vector<std::string> kernel_param_names(KernelKind kind);

// True if the parameter enters the eigenfunctions (disqualifies the
// eigenvalue-only fast path).
bool param_in_eigenfunctions(KernelKind kind, const std::string& param);

double get_param(const KernelParams& p, const std::string& name);
void set_param(KernelParams& p, const std::string& name, double value);

// Seeded generator with portable output: raw mt19937_64 bits mapped to
// doubles explicitly, so sequences match across standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed) : engine_(seed) {}

  double uniform() {  // [0,1)
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal() {  // Box-Muller, one spare cached
    if (have_spare_) {
      have_spare_ = false;
      return spare_;
    }
    double u1 = uniform(), u2 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double r = std::sqrt(-2.0 * std::log(u1));
    double t = 2.0 * M_PI * u2;
    spare_ = r * std::sin(t);
    have_spare_ = true;
    return r * std::cos(t);
  }
  uint64_t raw() { return engine_(); }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace famgp
