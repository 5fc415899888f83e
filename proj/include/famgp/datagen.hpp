#pragma once

#include <cstdint>

#include "famgp/multioutput_types.hpp"

namespace famgp {

// Sum of num_terms sinusoids with amplitude, angular frequency, and phase
// each drawn uniformly from the coefficient range. The drawn terms are kept
// so the noise-free signal and any of its derivatives stay available.
struct SinusoidSignal {
  Vec amplitude, frequency, phase;

  double value(double x) const;
  // k-th derivative of the noise-free signal; k = 0 is the signal itself.
  double derivative(double x, int k) const;
  Vec value(const Vec& x) const;
  Vec derivative(const Vec& x, int k) const;
};

struct SinusoidData {
  Dataset data;  // X sorted ascending, Y = signal + noise
  Vec y_true;    // noise-free signal at data.X
  SinusoidSignal signal;
};

// X is drawn uniformly on [x_lo, x_hi] and sorted. noise_sd is the standard
// deviation of the additive Gaussian noise; data.noise_variance carries its
// square (floored at 1e-12 so downstream solves stay defined at noise_sd=0).
SinusoidData gen_sinusoids(std::uint64_t seed, Eigen::Index n, double x_lo, double x_hi,
                           int num_terms = 10, double coeff_lo = 1.0,
                           double coeff_hi = 10.0, double noise_sd = 0.0);

// Correlated multi-output draws: Y ~ N(0, K_f (x) K_XX + noise_var I) with a
// squared-exponential K_XX at length scale l_se, sampled by the two-sided
// Cholesky form L_x Z L_f^T. X is the N-point midpoint grid on (-1, 1).
// Dense Cholesky of K_XX bounds N (guard: N <= 8192). The stored noise
// covariance is floored at 1e-12 so noise_var = 0 stays fittable.
struct CorrelatedDraw {
  MODataset data;
  Mat latent;  // N x M noise-free functions under the same draw
};

CorrelatedDraw gen_correlated_draw(std::uint64_t seed, Eigen::Index n, double l_se,
                                   const Mat& kf, double noise_var);
MODataset gen_correlated(std::uint64_t seed, Eigen::Index n, double l_se, const Mat& kf,
                         double noise_var);

}  // namespace famgp
