#pragma once

#include "famgp/types.hpp"

namespace famgp {

// Cholesky factorization with escalating diagonal jitter. Starts at
// 1e-12 * trace/n, multiplies by 10 up to 1e-6 * trace/n, then throws.
struct SpdFactor {
  Eigen::LLT<Mat> llt;
  double jitter = 0.0;
  double log_det = 0.0;

  template <typename Derived>
  auto solve(const Eigen::MatrixBase<Derived>& b) const {
    return llt.solve(b);
  }
  Mat inverse() const;
};

SpdFactor spd_factor(const Mat& a, const char* label);

// Kronecker product with block (i,j) = a(i,j) * b. Output-major stacked
// vectors v = [v_1; ...; v_M] satisfy (a (x) b) v = vec(b V a^T).
Mat kron(const Mat& a, const Mat& b);

}  // namespace famgp
