#include "famgp/linalg.hpp"

#include <stdexcept>
#include <string>

namespace famgp {

Mat SpdFactor::inverse() const {
  Eigen::Index n = llt.matrixL().rows();
  Mat inv = llt.solve(Mat::Identity(n, n));
  return 0.5 * (inv + inv.transpose());
}

SpdFactor spd_factor(const Mat& a, const char* label) {
  SpdFactor out;
  Eigen::Index n = a.rows();
  double base = a.trace() / static_cast<double>(n);
  double jitter = 0.0;
  for (;;) {
    Mat work = a;
    if (jitter > 0.0) work.diagonal().array() += jitter;
    out.llt.compute(work);
    if (out.llt.info() == Eigen::Success) break;
    if (jitter == 0.0) {
      jitter = 1e-12 * base;
    } else if (jitter < 1e-6 * base) {
      jitter *= 10.0;
    } else {
      throw std::runtime_error(std::string(label) +
                               ": not positive definite even with maximum jitter");
    }
  }
  out.jitter = jitter;
  out.log_det = 2.0 * Mat(out.llt.matrixL()).diagonal().array().log().sum();
  return out;
}

Mat kron(const Mat& a, const Mat& b) {
  Mat out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < a.cols(); ++j)
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
  return out;
}

}  // namespace famgp
