#include "famgp/io.hpp"

#include <charconv>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace famgp {

using nlohmann::json;

namespace {

std::string strip_cr(std::string s) {
  if (!s.empty() && s.back() == '\r') s.pop_back();
  return s;
}

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

double parse_number(const std::string& s, const std::string& column, size_t lineno) {
  const char* begin = s.c_str();
  char* end = nullptr;
  double v = std::strtod(begin, &end);
  if (end == begin || *end != '\0')
    throw std::runtime_error("column '" + column + "' on line " + std::to_string(lineno) +
                             " is not a number: '" + s + "'");
  return v;
}

std::ofstream open_out(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  return out;
}

std::vector<double> mat_flat(const Mat& m) {
  std::vector<double> flat;
  flat.reserve(static_cast<size_t>(m.size()));
  for (Eigen::Index i = 0; i < m.rows(); ++i)
    for (Eigen::Index j = 0; j < m.cols(); ++j) flat.push_back(m(i, j));
  return flat;
}

Mat mat_from_flat(const std::vector<double>& flat, Eigen::Index rows, Eigen::Index cols,
                  const char* what) {
  if (static_cast<Eigen::Index>(flat.size()) != rows * cols)
    throw std::runtime_error(std::string(what) + " has wrong length");
  Mat m(rows, cols);
  size_t k = 0;
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = flat[k++];
  return m;
}

Vec vec_from(const std::vector<double>& v) {
  return Eigen::Map<const Vec>(v.data(), static_cast<Eigen::Index>(v.size()));
}

std::vector<double> vec_flat(const Vec& v) {
  return std::vector<double>(v.data(), v.data() + v.size());
}

json basis_to_json(const MercerBasis& b) {
  json j;
  j["kind"] = to_string(b.kind);
  j["params"] = {{"l_se", b.params.l_se},   {"alpha_se", b.params.alpha_se},
                 {"f_pr", b.params.f_pr},   {"w_pr", b.params.w_pr},
                 {"a", b.params.a},         {"b", b.params.b}};
  j["n"] = b.n;
  j["n_requested"] = b.n_requested;
  j["eig_floor"] = b.eig_floor;
  j["floored"] = b.floored;
  j["lambda"] = vec_flat(b.lambda);
  return j;
}

MercerBasis basis_from_json(const json& j) {
  MercerBasis b;
  b.kind = kernel_kind_from_string(j.at("kind").get<std::string>());
  const json& p = j.at("params");
  b.params.l_se = p.at("l_se").get<double>();
  b.params.alpha_se = p.at("alpha_se").get<double>();
  b.params.f_pr = p.at("f_pr").get<double>();
  b.params.w_pr = p.at("w_pr").get<double>();
  b.params.a = p.at("a").get<double>();
  b.params.b = p.at("b").get<double>();
  b.n = j.at("n").get<int>();
  b.n_requested = j.at("n_requested").get<int>();
  b.eig_floor = j.at("eig_floor").get<double>();
  b.floored = j.at("floored").get<bool>();
  b.lambda = vec_from(j.at("lambda").get<std::vector<double>>());
  if (b.lambda.size() != b.n)
    throw std::runtime_error("lambda length differs from n");
  return b;
}

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("'" + path + "': " + e.what());
  }
}

void check_schema(const json& j, const std::string& path, const char* expected_type) {
  if (!j.contains("schema_version") || j.at("schema_version").get<int>() != 1)
    throw std::runtime_error("'" + path + "': unsupported schema_version");
  std::string type = j.at("model_type").get<std::string>();
  if (type != expected_type)
    throw std::runtime_error("'" + path + "': model_type is '" + type + "', expected '" +
                             expected_type + "'");
}

}  // namespace

std::string format_double(double v) {
  char buf[40];
  auto res = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, res.ptr);
}

CsvDataset read_dataset_csv(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("'" + path + "' is empty");
  std::vector<std::string> header = split_line(strip_cr(line));
  if (header.empty() || header[0] != "x")
    throw std::runtime_error("'" + path + "': header must start with column 'x' (got '" +
                             (header.empty() ? std::string() : header[0]) + "')");
  int m = static_cast<int>(header.size()) - 1;
  if (m < 1)
    throw std::runtime_error("'" + path + "': header has no y columns; expected x,y1,...");
  for (int j = 0; j < m; ++j) {
    std::string expected = "y" + std::to_string(j + 1);
    const std::string& got = header[static_cast<size_t>(j) + 1];
    if (got == expected || (m == 1 && got == "y")) continue;
    throw std::runtime_error("'" + path + "': expected column '" + expected + "', got '" +
                             got + "'");
  }

  std::vector<double> xs;
  std::vector<std::vector<double>> ys(static_cast<size_t>(m));
  std::vector<std::vector<Eigen::Index>> observed(static_cast<size_t>(m));
  bool any_missing = false;
  size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    line = strip_cr(line);
    if (line.empty()) continue;
    std::vector<std::string> fields = split_line(line);
    if (static_cast<int>(fields.size()) != m + 1)
      throw std::runtime_error("'" + path + "': line " + std::to_string(lineno) + " has " +
                               std::to_string(fields.size()) + " fields; expected " +
                               std::to_string(m + 1));
    if (fields[0].empty())
      throw std::runtime_error("'" + path + "': column 'x' on line " +
                               std::to_string(lineno) + " is empty");
    Eigen::Index row = static_cast<Eigen::Index>(xs.size());
    xs.push_back(parse_number(fields[0], "x", lineno));
    for (int j = 0; j < m; ++j) {
      const std::string& f = fields[static_cast<size_t>(j) + 1];
      if (f.empty()) {
        ys[static_cast<size_t>(j)].push_back(std::nan(""));
        any_missing = true;
      } else {
        ys[static_cast<size_t>(j)].push_back(
            parse_number(f, "y" + std::to_string(j + 1), lineno));
        observed[static_cast<size_t>(j)].push_back(row);
      }
    }
  }
  if (xs.empty()) throw std::runtime_error("'" + path + "' has no data rows");

  CsvDataset out;
  Eigen::Index n = static_cast<Eigen::Index>(xs.size());
  out.x = vec_from(xs);
  out.y.resize(n, m);
  for (int j = 0; j < m; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      out.y(i, j) = ys[static_cast<size_t>(j)][static_cast<size_t>(i)];
  if (any_missing) out.observed = std::move(observed);
  return out;
}

void write_dataset_csv(const std::string& path, const Vec& x, const Mat& y) {
  if (y.rows() != x.size()) throw std::invalid_argument("X and Y row counts differ");
  std::ofstream out = open_out(path);
  out << "x";
  for (Eigen::Index j = 0; j < y.cols(); ++j) out << ",y" << (j + 1);
  out << "\n";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out << format_double(x[i]);
    for (Eigen::Index j = 0; j < y.cols(); ++j) {
      out << ",";
      if (!std::isnan(y(i, j))) out << format_double(y(i, j));
    }
    out << "\n";
  }
}

void write_dataset_csv(const std::string& path, const CsvDataset& data) {
  write_dataset_csv(path, data.x, data.y);
}

Dataset to_dataset(const CsvDataset& csv, double noise_variance, int output) {
  if (output < 0 || output >= csv.outputs())
    throw std::invalid_argument("output index out of range");
  if (csv.fully_observed()) {
    return make_dataset(csv.x, csv.y.col(output), noise_variance);
  }
  const auto& rows = csv.observed[static_cast<size_t>(output)];
  Vec x(static_cast<Eigen::Index>(rows.size()));
  Vec y(x.size());
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    x[i] = csv.x[rows[static_cast<size_t>(i)]];
    y[i] = csv.y(rows[static_cast<size_t>(i)], output);
  }
  return make_dataset(std::move(x), std::move(y), noise_variance);
}

MODataset to_mo_dataset(const CsvDataset& csv, double noise_variance) {
  MODataset data = make_mo_dataset(csv.x, csv.y, noise_variance);
  data.observed = csv.observed;
  return data;
}

void write_predictions_csv(const std::string& path, const Vec& x,
                           const std::vector<Posterior>& per_output) {
  if (per_output.empty()) throw std::invalid_argument("no posteriors to write");
  for (const Posterior& p : per_output)
    if (p.mean.size() != x.size())
      throw std::invalid_argument("posterior length differs from the x grid");

  auto has_var = [&](const Posterior& p) {
    return p.variance.size() == x.size() || p.covariance.rows() == x.size();
  };
  auto var_at = [](const Posterior& p, Eigen::Index i) {
    return p.variance.size() > 0 ? p.variance[i] : p.covariance(i, i);
  };

  std::ofstream out = open_out(path);
  out << "x";
  for (size_t j = 0; j < per_output.size(); ++j) {
    out << ",mean_" << (j + 1);
    if (has_var(per_output[j])) out << ",var_" << (j + 1);
  }
  out << "\n";
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    out << format_double(x[i]);
    for (const Posterior& p : per_output) {
      out << "," << format_double(p.mean[i]);
      if (has_var(p)) out << "," << format_double(var_at(p, i));
    }
    out << "\n";
  }
}

void write_trace_csv(const std::string& path, const TrainingTrace& trace) {
  std::ofstream out = open_out(path);
  out << "iter,lml,grad_norm,step,wall_time_s\n";
  for (const TraceRow& row : trace)
    out << row.iter << "," << format_double(row.lml) << "," << format_double(row.grad_norm)
        << "," << format_double(row.step) << "," << format_double(row.wall_time_s) << "\n";
}

void save_model_json(const std::string& path, const FittedModel& model) {
  json j;
  j["schema_version"] = 1;
  j["model_type"] = "single_output";
  j["basis"] = basis_to_json(model.basis);
  j["transform"] = {{"shift", model.transform.shift}, {"scale", model.transform.scale}};
  j["noise_variance"] = vec_flat(model.noise_variance);
  j["alpha_prime"] = vec_flat(model.alpha_prime);
  j["G"] = mat_flat(model.G);
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
}

FittedModel load_model_json(const std::string& path) {
  json j = load_json_file(path);
  try {
    check_schema(j, path, "single_output");
    FittedModel model;
    model.basis = basis_from_json(j.at("basis"));
    model.transform.shift = j.at("transform").at("shift").get<double>();
    model.transform.scale = j.at("transform").at("scale").get<double>();
    model.noise_variance = vec_from(j.at("noise_variance").get<std::vector<double>>());
    model.alpha_prime = vec_from(j.at("alpha_prime").get<std::vector<double>>());
    Eigen::Index n = model.basis.lambda.size();
    if (model.alpha_prime.size() != n)
      throw std::runtime_error("alpha_prime length differs from n");
    model.G = mat_from_flat(j.at("G").get<std::vector<double>>(), n, n, "G");
    model.lambda_bar_inv = Mat(model.basis.lambda.asDiagonal()) - model.G;
    return model;
  } catch (const json::exception& e) {
    throw std::runtime_error("'" + path + "': " + e.what());
  }
}

void save_mo_model_json(const std::string& path, const MOFittedModel& model) {
  json j;
  j["schema_version"] = 1;
  j["model_type"] = "multi_output";
  j["basis"] = basis_to_json(model.basis);
  j["transform"] = {{"shift", model.transform.shift}, {"scale", model.transform.scale}};
  j["outputs"] = model.outputs();
  j["L"] = mat_flat(model.L);
  j["S"] = mat_flat(model.S);
  j["alpha_prime"] = vec_flat(model.alpha_prime);
  j["G"] = mat_flat(model.G);
  std::ofstream out = open_out(path);
  out << j.dump(2) << "\n";
}

MOFittedModel load_mo_model_json(const std::string& path) {
  json j = load_json_file(path);
  try {
    check_schema(j, path, "multi_output");
    MOFittedModel model;
    model.basis = basis_from_json(j.at("basis"));
    model.transform.shift = j.at("transform").at("shift").get<double>();
    model.transform.scale = j.at("transform").at("scale").get<double>();
    Eigen::Index m = j.at("outputs").get<int>();
    Eigen::Index n = model.basis.lambda.size();
    model.L = mat_from_flat(j.at("L").get<std::vector<double>>(), m, m, "L");
    model.S = mat_from_flat(j.at("S").get<std::vector<double>>(), m, m, "S");
    model.alpha_prime = vec_from(j.at("alpha_prime").get<std::vector<double>>());
    if (model.alpha_prime.size() != n * m)
      throw std::runtime_error("alpha_prime length differs from n*M");
    model.G = mat_from_flat(j.at("G").get<std::vector<double>>(), n * m, n * m, "G");
    Mat prior = kron(Mat(model.L * model.L.transpose()),
                     Mat(model.basis.lambda.asDiagonal()));
    model.lambda_bar_inv = prior - model.G;
    return model;
  } catch (const json::exception& e) {
    throw std::runtime_error("'" + path + "': " + e.what());
  }
}

LoadedModel load_any_model_json(const std::string& path) {
  json j = load_json_file(path);
  std::string type;
  try {
    type = j.at("model_type").get<std::string>();
  } catch (const json::exception& e) {
    throw std::runtime_error("'" + path + "': " + e.what());
  }
  LoadedModel out;
  if (type == "multi_output") {
    out.multi = true;
    out.mo = load_mo_model_json(path);
  } else {
    out.single = load_model_json(path);
  }
  return out;
}

}  // namespace famgp
