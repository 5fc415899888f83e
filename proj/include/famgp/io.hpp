#pragma once

#include <string>
#include <vector>

#include "famgp/multioutput.hpp"
#include "famgp/optimizer.hpp"

namespace famgp {

// Dataset CSV: header `x,y1,...,yM` (a single output may also be named `y`),
// comma separators, '.' decimal point, UTF-8, LF line endings. An empty field
// marks an unobserved entry; those positions hold NaN in y and are dropped
// from the per-output observed lists.
struct CsvDataset {
  Vec x;
  Mat y;
  std::vector<std::vector<Eigen::Index>> observed;  // empty: fully observed

  int outputs() const { return static_cast<int>(y.cols()); }
  bool fully_observed() const { return observed.empty(); }
};

CsvDataset read_dataset_csv(const std::string& path);
void write_dataset_csv(const std::string& path, const Vec& x, const Mat& y);
void write_dataset_csv(const std::string& path, const CsvDataset& data);

// Single-output view of column `output`, restricted to its observed rows.
Dataset to_dataset(const CsvDataset& csv, double noise_variance, int output = 0);
MODataset to_mo_dataset(const CsvDataset& csv, double noise_variance);

// Predictions CSV: x,mean_1[,var_1],mean_2[,var_2],...; variance columns
// appear for posteriors carrying them.
void write_predictions_csv(const std::string& path, const Vec& x,
                           const std::vector<Posterior>& per_output);

// iter,lml,grad_norm,step,wall_time_s
void write_trace_csv(const std::string& path, const TrainingTrace& trace);

void save_model_json(const std::string& path, const FittedModel& model);
FittedModel load_model_json(const std::string& path);

void save_mo_model_json(const std::string& path, const MOFittedModel& model);
MOFittedModel load_mo_model_json(const std::string& path);

// Dispatches on the file's model_type field.
struct LoadedModel {
  bool multi = false;
  FittedModel single;
  MOFittedModel mo;
};
LoadedModel load_any_model_json(const std::string& path);

// Shortest representation that parses back to the same double.
std::string format_double(double v);

}  // namespace famgp
