#include "famgp/multioutput_types.hpp"

#include <stdexcept>

namespace famgp {

CoregionalizationMatrix coreg_from_cholesky(Mat L) {
  Eigen::Index m = L.rows();
  if (L.cols() != m) throw std::invalid_argument("L must be square");
  for (Eigen::Index i = 0; i < m; ++i) {
    if (!(L(i, i) > 0.0))
      throw std::invalid_argument("L diagonal must be strictly positive");
    for (Eigen::Index j = i + 1; j < m; ++j)
      if (L(i, j) != 0.0)
        throw std::invalid_argument("L must be lower triangular");
  }
  return CoregionalizationMatrix{std::move(L)};
}

CoregionalizationMatrix coreg_from_covariance(const Mat& kf) {
  Eigen::LLT<Mat> llt(kf);
  if (llt.info() != Eigen::Success)
    throw std::invalid_argument("K_f must be symmetric positive definite");
  return CoregionalizationMatrix{Mat(llt.matrixL())};
}

bool MODataset::isotopic() const {
  if (observed.empty()) return true;
  for (const auto& rows : observed)
    if (static_cast<Eigen::Index>(rows.size()) != X.size()) return false;
  return true;
}

std::vector<Eigen::Index> MODataset::observed_rows(int j) const {
  if (observed.empty()) {
    std::vector<Eigen::Index> all(X.size());
    for (Eigen::Index i = 0; i < X.size(); ++i) all[static_cast<size_t>(i)] = i;
    return all;
  }
  return observed.at(static_cast<size_t>(j));
}

Eigen::Index MODataset::total_observed() const {
  if (observed.empty()) return X.size() * Y.cols();
  Eigen::Index total = 0;
  for (const auto& rows : observed) total += static_cast<Eigen::Index>(rows.size());
  return total;
}

MODataset make_mo_dataset(Vec x, Mat y, double sigma2) {
  if (!(sigma2 > 0.0)) throw std::invalid_argument("sigma2 must be positive");
  Mat s = sigma2 * Mat::Identity(y.cols(), y.cols());
  return make_mo_dataset(std::move(x), std::move(y), std::move(s));
}

MODataset make_mo_dataset(Vec x, Mat y, Mat s) {
  if (y.rows() != x.size()) throw std::invalid_argument("X and Y row counts differ");
  if (s.rows() != y.cols() || s.cols() != y.cols())
    throw std::invalid_argument("noise covariance must be M x M");
  MODataset data;
  data.X = std::move(x);
  data.Y = std::move(y);
  data.S = std::move(s);
  return data;
}

}  // namespace famgp
