#pragma once

#include "famgp/gp.hpp"

namespace famgp {

// M x M output-similarity covariance, carried by its Cholesky factor so SPD
// is structural. K_f = L L^T.
struct CoregionalizationMatrix {
  Mat L;  // lower triangular, strictly positive diagonal

  int outputs() const { return static_cast<int>(L.rows()); }
  Mat kf() const { return L * L.transpose(); }
};

CoregionalizationMatrix coreg_from_cholesky(Mat L);
CoregionalizationMatrix coreg_from_covariance(const Mat& kf);

// Shared-input multi-output dataset. Y is N x M; vectorized quantities are
// output-major: [y^1_1..y^1_N, y^2_1..y^2_N, ...]. observed[j] lists the row
// indices where output j is recorded (empty list of lists = fully observed).
// Noise is the separable form S (x) I_N by default; a full NM x NM matrix can
// be supplied instead for the dense paths.
struct MODataset {
  Vec X;
  Mat Y;
  std::vector<std::vector<Eigen::Index>> observed;
  Mat S;           // M x M per-sample noise covariance
  Mat sigma_full;  // optional NM x NM; engaged when nonzero-sized

  int outputs() const { return static_cast<int>(Y.cols()); }
  bool isotopic() const;
  bool has_full_sigma() const { return sigma_full.size() > 0; }
  std::vector<Eigen::Index> observed_rows(int j) const;
  Eigen::Index total_observed() const;
};

MODataset make_mo_dataset(Vec x, Mat y, double sigma2);
MODataset make_mo_dataset(Vec x, Mat y, Mat s);

}  // namespace famgp
