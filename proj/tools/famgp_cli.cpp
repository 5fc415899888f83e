// famgp command-line front end: synthetic data generation, training,
// prediction, and the benchmark suites. Every subcommand accepts --config
// pointing at a JSON file whose keys (flag names with '-' as '_') override
// the corresponding flags.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "famgp/bench.hpp"
#include "famgp/io.hpp"

namespace {

using famgp::Mat;
using famgp::Vec;
using nlohmann::json;

json load_config(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config '" + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw std::runtime_error("config '" + path + "': " + e.what());
  }
}

template <typename T>
void jset(const json& j, const char* key, T& value) {
  if (j.contains(key)) value = j.at(key).template get<T>();
}

void jset_grid(const json& j, const char* key, std::vector<Eigen::Index>& value) {
  if (!j.contains(key)) return;
  auto raw = j.at(key).get<std::vector<long long>>();
  value.assign(raw.begin(), raw.end());
}

void ensure_dir(const std::string& dir) {
  if (dir.empty() || dir == ".") return;
  std::filesystem::create_directories(dir);
}

std::string join_path(const std::string& dir, const std::string& name) {
  if (dir.empty() || dir == ".") return name;
  return (std::filesystem::path(dir) / name).string();
}

Vec parse_grid_spec(const std::string& spec) {
  double lo = 0, hi = 0;
  long count = 0;
  if (std::sscanf(spec.c_str(), "%lf:%lf:%ld", &lo, &hi, &count) != 3 || count < 2 ||
      !(hi > lo))
    throw std::invalid_argument("--grid expects lo:hi:count with hi > lo, count >= 2");
  Vec x(count);
  for (long i = 0; i < count; ++i)
    x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  return x;
}

// Kernel init shared by `fit`: spec defaults, then explicit flags, then config.
struct KernelFlags {
  std::string kind_name = "squared-exponential";
  double l_se = -1, alpha_se = -1, f_pr = -1, w_pr = -1, a = -1, b = -1;

  void add_to(CLI::App* cmd) {
    cmd->add_option("--kernel", kind_name,
                    "kernel family: squared-exponential|se, periodic, chebyshev")
        ->capture_default_str();
    cmd->add_option("--l-se", l_se, "squared-exponential width init");
    cmd->add_option("--alpha-se", alpha_se, "squared-exponential envelope scale");
    cmd->add_option("--f-pr", f_pr, "periodic angular frequency");
    cmd->add_option("--w-pr", w_pr, "periodic width init");
    cmd->add_option("--a", a, "chebyshev a init");
    cmd->add_option("--b", b, "chebyshev b init");
  }

  void apply_config(const json& j) {
    jset(j, "kernel", kind_name);
    jset(j, "l_se", l_se);
    jset(j, "alpha_se", alpha_se);
    jset(j, "f_pr", f_pr);
    jset(j, "w_pr", w_pr);
    jset(j, "a", a);
    jset(j, "b", b);
  }

  famgp::KernelKind kind() const { return famgp::kernel_kind_from_string(kind_name); }

  famgp::KernelParams init() const {
    famgp::KernelParams p = famgp::default_train_init(kind());
    if (l_se > 0) p.l_se = l_se;
    if (alpha_se > 0) p.alpha_se = alpha_se;
    if (f_pr > 0) p.f_pr = f_pr;
    if (w_pr > 0) p.w_pr = w_pr;
    if (a > 0) p.a = a;
    if (b > 0) p.b = b;
    famgp::validate_params(kind(), p);
    return p;
  }
};

Mat uniform_coreg(int outputs, double off_diag) {
  Mat kf = Mat::Identity(outputs, outputs);
  for (int i = 0; i < outputs; ++i)
    for (int j = 0; j < outputs; ++j)
      if (i != j) kf(i, j) = off_diag;
  return kf;
}

void print_params(const famgp::KernelParams& p, famgp::KernelKind kind) {
  for (const std::string& name : famgp::kernel_param_names(kind))
    std::printf("  %s = %s\n", name.c_str(),
                famgp::format_double(famgp::get_param(p, name)).c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Fast approximate Gaussian process regression"};
  app.require_subcommand(1);
  app.fallthrough();

  std::uint64_t seed = 1;
  std::string out_dir = ".";
  std::string config_path;
  app.add_option("--seed", seed, "seed for all random draws")->capture_default_str();
  app.add_option("--out-dir", out_dir, "directory for output files")
      ->capture_default_str();
  app.add_option("--config", config_path,
                 "JSON config file; its keys override command-line flags");

  std::function<int(const json&)> action;

  // ---- gen-data ------------------------------------------------------
  CLI::App* gen = app.add_subcommand("gen-data", "generate a synthetic dataset");
  gen->require_subcommand(1);
  gen->fallthrough();

  struct {
    long long n = 1000;
    double x_lo = -1.0, x_hi = 1.0;
    int terms = 10;
    double coeff_lo = 1.0, coeff_hi = 10.0;
    double noise_sd = 0.0;
    int derivative = 0;
  } sin_cfg;
  CLI::App* gsin = gen->add_subcommand("sinusoids",
                                       "sum of random sinusoids with analytic truth");
  gsin->add_option("--n", sin_cfg.n, "sample count")->capture_default_str();
  gsin->add_option("--x-lo", sin_cfg.x_lo, "input range low")->capture_default_str();
  gsin->add_option("--x-hi", sin_cfg.x_hi, "input range high")->capture_default_str();
  gsin->add_option("--terms", sin_cfg.terms, "sinusoid count")->capture_default_str();
  gsin->add_option("--coeff-lo", sin_cfg.coeff_lo, "coefficient range low")
      ->capture_default_str();
  gsin->add_option("--coeff-hi", sin_cfg.coeff_hi, "coefficient range high")
      ->capture_default_str();
  gsin->add_option("--noise-sd", sin_cfg.noise_sd, "observation noise std dev")
      ->capture_default_str();
  gsin->add_option("--derivative", sin_cfg.derivative,
                   "derivative order written to truth.csv")
      ->capture_default_str();
  gsin->callback([&] {
    action = [&](const json& j) {
      jset(j, "n", sin_cfg.n);
      jset(j, "x_lo", sin_cfg.x_lo);
      jset(j, "x_hi", sin_cfg.x_hi);
      jset(j, "terms", sin_cfg.terms);
      jset(j, "coeff_lo", sin_cfg.coeff_lo);
      jset(j, "coeff_hi", sin_cfg.coeff_hi);
      jset(j, "noise_sd", sin_cfg.noise_sd);
      jset(j, "derivative", sin_cfg.derivative);
      famgp::SinusoidData sd =
          famgp::gen_sinusoids(seed, sin_cfg.n, sin_cfg.x_lo, sin_cfg.x_hi,
                               sin_cfg.terms, sin_cfg.coeff_lo, sin_cfg.coeff_hi,
                               sin_cfg.noise_sd);
      ensure_dir(out_dir);
      famgp::write_dataset_csv(join_path(out_dir, "data.csv"), sd.data.X, sd.data.Y);
      Vec truth = sin_cfg.derivative == 0
                      ? sd.y_true
                      : sd.signal.derivative(sd.data.X, sin_cfg.derivative);
      famgp::write_dataset_csv(join_path(out_dir, "truth.csv"), sd.data.X, truth);
      std::printf("wrote %s and %s (N=%lld)\n",
                  join_path(out_dir, "data.csv").c_str(),
                  join_path(out_dir, "truth.csv").c_str(), sin_cfg.n);
      return 0;
    };
  });

  struct {
    long long n = 900;
    double l_se = 0.1;
    double off_diag = -0.95;
    int outputs = 2;
    double noise_var = 0.05;
  } cor_cfg;
  CLI::App* gcor = gen->add_subcommand(
      "correlated", "correlated multi-output draw from a known covariance");
  gcor->add_option("--n", cor_cfg.n, "grid size on (-1,1)")->capture_default_str();
  gcor->add_option("--l-se", cor_cfg.l_se, "latent kernel width")->capture_default_str();
  gcor->add_option("--off-diag", cor_cfg.off_diag, "output covariance off-diagonal")
      ->capture_default_str();
  gcor->add_option("--outputs", cor_cfg.outputs, "output count")->capture_default_str();
  gcor->add_option("--noise-var", cor_cfg.noise_var, "observation noise variance")
      ->capture_default_str();
  gcor->callback([&] {
    action = [&](const json& j) {
      jset(j, "n", cor_cfg.n);
      jset(j, "l_se", cor_cfg.l_se);
      jset(j, "off_diag", cor_cfg.off_diag);
      jset(j, "outputs", cor_cfg.outputs);
      jset(j, "noise_var", cor_cfg.noise_var);
      Mat kf = uniform_coreg(cor_cfg.outputs, cor_cfg.off_diag);
      if (j.contains("kf")) {
        auto rows = j.at("kf").get<std::vector<std::vector<double>>>();
        kf.resize(static_cast<Eigen::Index>(rows.size()),
                  static_cast<Eigen::Index>(rows.size()));
        for (size_t r = 0; r < rows.size(); ++r) {
          if (rows[r].size() != rows.size())
            throw std::invalid_argument("config key 'kf' must be a square matrix");
          for (size_t c = 0; c < rows[r].size(); ++c)
            kf(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
        }
      }
      famgp::CorrelatedDraw draw = famgp::gen_correlated_draw(
          seed, cor_cfg.n, cor_cfg.l_se, kf, cor_cfg.noise_var);
      ensure_dir(out_dir);
      famgp::write_dataset_csv(join_path(out_dir, "data.csv"), draw.data.X,
                               draw.data.Y);
      famgp::write_dataset_csv(join_path(out_dir, "latent.csv"), draw.data.X,
                               draw.latent);
      std::printf("wrote %s and %s (N=%lld, M=%d)\n",
                  join_path(out_dir, "data.csv").c_str(),
                  join_path(out_dir, "latent.csv").c_str(), cor_cfg.n,
                  static_cast<int>(kf.rows()));
      return 0;
    };
  });

  // ---- fit -----------------------------------------------------------
  CLI::App* fit_cmd = app.add_subcommand("fit", "train a model on a dataset CSV");
  fit_cmd->fallthrough();
  struct {
    std::string data_path;
    KernelFlags kernel;
    int n = 75;
    double noise = -1.0;
    bool fixed_noise = false;
    bool train_noise_mo = false;
    bool train_scale = false;
    bool fast = false;
    std::vector<std::string> fixed;
    std::string kf_init = "empirical";
    int max_iters = 500;
    double initial_step = 1e-4;
    double grad_tol = 1e-5;
  } fit_cfg;
  fit_cmd->add_option("--data", fit_cfg.data_path, "dataset CSV (x,y1,...,yM)");
  fit_cfg.kernel.add_to(fit_cmd);
  fit_cmd->add_option("--n", fit_cfg.n, "eigenvalue count")->capture_default_str();
  fit_cmd->add_option("--noise", fit_cfg.noise,
                      "initial noise variance (default: var(Y)/10)");
  fit_cmd->add_flag("--fixed-noise", fit_cfg.fixed_noise,
                    "hold the noise variance at its initial value");
  fit_cmd->add_flag("--train-noise", fit_cfg.train_noise_mo,
                    "multi-output only: learn the noise variance (default fixed)");
  fit_cmd->add_flag("--train-scale", fit_cfg.train_scale,
                    "single-output only: learn a signal-variance scale");
  fit_cmd->add_flag("--fast", fit_cfg.fast,
                    "eigenvalue-only path: build the basis matrix once");
  fit_cmd->add_option("--fixed", fit_cfg.fixed,
                      "kernel parameters to hold at their init")
      ->delimiter(',');
  fit_cmd->add_option("--kf-init", fit_cfg.kf_init,
                      "multi-output K_f start: empirical or identity")
      ->capture_default_str();
  fit_cmd->add_option("--max-iters", fit_cfg.max_iters, "iteration budget")
      ->capture_default_str();
  fit_cmd->add_option("--initial-step", fit_cfg.initial_step, "first step size")
      ->capture_default_str();
  fit_cmd->add_option("--grad-tol", fit_cfg.grad_tol, "gradient-norm stop")
      ->capture_default_str();
  fit_cmd->callback([&] {
    action = [&](const json& j) {
      jset(j, "data", fit_cfg.data_path);
      fit_cfg.kernel.apply_config(j);
      jset(j, "n", fit_cfg.n);
      jset(j, "noise", fit_cfg.noise);
      if (j.contains("train_noise")) {
        bool v = j.at("train_noise").get<bool>();
        fit_cfg.fixed_noise = !v;
        fit_cfg.train_noise_mo = v;
      }
      jset(j, "train_scale", fit_cfg.train_scale);
      jset(j, "fast", fit_cfg.fast);
      jset(j, "fixed", fit_cfg.fixed);
      jset(j, "kf_init", fit_cfg.kf_init);
      jset(j, "max_iters", fit_cfg.max_iters);
      jset(j, "initial_step", fit_cfg.initial_step);
      jset(j, "grad_tol", fit_cfg.grad_tol);
      if (fit_cfg.data_path.empty())
        throw std::invalid_argument("fit requires --data (or config key 'data')");

      famgp::CsvDataset csv = famgp::read_dataset_csv(fit_cfg.data_path);
      famgp::KernelKind kind = fit_cfg.kernel.kind();
      famgp::KernelParams init = fit_cfg.kernel.init();
      ensure_dir(out_dir);
      std::string model_path = join_path(out_dir, "model.json");
      std::string trace_path = join_path(out_dir, "trace.csv");

      famgp::OptimizerConfig oc;
      oc.max_iters = fit_cfg.max_iters;
      oc.initial_step = fit_cfg.initial_step;
      oc.grad_tol = fit_cfg.grad_tol;
      oc.seed = seed;

      bool converged = false;
      if (csv.outputs() == 1) {
        double noise0 = fit_cfg.noise > 0
                            ? fit_cfg.noise
                            : famgp::default_noise_init(csv.y.col(0));
        famgp::Dataset data = famgp::to_dataset(csv, noise0);
        famgp::TrainOptions opt;
        opt.config = oc;
        opt.train_noise = !fit_cfg.fixed_noise;
        opt.init_noise = noise0;
        opt.train_scale = fit_cfg.train_scale;
        opt.fixed = fit_cfg.fixed;
        famgp::TrainResult r =
            fit_cfg.fast
                ? famgp::train_fast_path(data, kind, init, fit_cfg.n, opt)
                : famgp::train_general(data, kind, init, fit_cfg.n, opt);
        famgp::save_model_json(model_path, r.model);
        famgp::write_trace_csv(trace_path, r.trace);
        std::printf("lml = %s after %d iterations (%s)\n",
                    famgp::format_double(r.lml).c_str(), r.iters,
                    r.converged ? "converged" : "max iterations");
        print_params(r.params, kind);
        std::printf("  noise_variance = %s\n",
                    famgp::format_double(r.noise_variance).c_str());
        if (fit_cfg.train_scale)
          std::printf("  scale = %s\n", famgp::format_double(r.scale).c_str());
        converged = r.converged;
      } else {
        double noise0 = fit_cfg.noise > 0
                            ? fit_cfg.noise
                            : famgp::default_noise_init(
                                  Vec(csv.y.reshaped().eval()));
        famgp::MODataset data = famgp::to_mo_dataset(csv, noise0);
        famgp::MOTrainOptions opt;
        opt.config = oc;
        opt.train_noise = fit_cfg.train_noise_mo;
        opt.init_noise = noise0;
        opt.fixed = fit_cfg.fixed;
        if (fit_cfg.kf_init == "identity")
          opt.init_L = Mat::Identity(csv.outputs(), csv.outputs());
        else if (fit_cfg.kf_init != "empirical")
          throw std::invalid_argument("--kf-init must be 'empirical' or 'identity'");
        famgp::MOTrainResult r =
            famgp::train_multioutput(data, kind, init, fit_cfg.n, opt);
        famgp::save_mo_model_json(model_path, r.model);
        famgp::write_trace_csv(trace_path, r.trace);
        Mat kf = r.L * r.L.transpose();
        std::printf("lml = %s after %d iterations (%s)\n",
                    famgp::format_double(r.lml).c_str(), r.iters,
                    r.converged ? "converged" : "max iterations");
        print_params(r.params, kind);
        std::printf("  noise_variance = %s\n",
                    famgp::format_double(r.noise_variance).c_str());
        for (Eigen::Index p = 0; p < kf.rows(); ++p)
          for (Eigen::Index q = 0; q <= p; ++q)
            std::printf("  kf_%lld%lld = %s\n", static_cast<long long>(p),
                        static_cast<long long>(q),
                        famgp::format_double(kf(p, q)).c_str());
        converged = r.converged;
      }
      std::printf("wrote %s and %s\n", model_path.c_str(), trace_path.c_str());
      return converged ? 0 : 2;
    };
  });

  // ---- predict -------------------------------------------------------
  CLI::App* pred_cmd = app.add_subcommand("predict", "predict from a saved model");
  pred_cmd->fallthrough();
  struct {
    std::string model_path;
    std::string data_path;
    std::string grid_spec;
    int derivative = 0;
    bool variance = false;
    int output = -1;
  } pred_cfg;
  pred_cmd->add_option("--model", pred_cfg.model_path, "model JSON path");
  pred_cmd->add_option("--data", pred_cfg.data_path, "CSV whose x column is predicted");
  pred_cmd->add_option("--grid", pred_cfg.grid_spec, "lo:hi:count evaluation grid");
  pred_cmd->add_option("--derivative", pred_cfg.derivative, "derivative order k")
      ->capture_default_str();
  pred_cmd->add_flag("--variance", pred_cfg.variance, "emit posterior variances");
  pred_cmd->add_option("--output", pred_cfg.output,
                       "multi-output only: single output index (default all)");
  pred_cmd->callback([&] {
    action = [&](const json& j) {
      jset(j, "model", pred_cfg.model_path);
      jset(j, "data", pred_cfg.data_path);
      jset(j, "grid", pred_cfg.grid_spec);
      jset(j, "derivative", pred_cfg.derivative);
      jset(j, "variance", pred_cfg.variance);
      jset(j, "output", pred_cfg.output);
      if (pred_cfg.model_path.empty())
        throw std::invalid_argument("predict requires --model (or config key 'model')");
      if (pred_cfg.data_path.empty() == pred_cfg.grid_spec.empty())
        throw std::invalid_argument("predict requires exactly one of --data or --grid");

      Vec x = pred_cfg.grid_spec.empty()
                  ? famgp::read_dataset_csv(pred_cfg.data_path).x
                  : parse_grid_spec(pred_cfg.grid_spec);
      famgp::CovMode mode =
          pred_cfg.variance ? famgp::CovMode::Diagonal : famgp::CovMode::None;
      famgp::LoadedModel loaded = famgp::load_any_model_json(pred_cfg.model_path);
      std::vector<famgp::Posterior> posts;
      if (!loaded.multi) {
        posts.push_back(famgp::predict_derivative(loaded.single, x,
                                                  pred_cfg.derivative, mode));
      } else {
        int m = loaded.mo.outputs();
        if (pred_cfg.output >= m)
          throw std::invalid_argument("--output out of range: model has " +
                                      std::to_string(m) + " outputs");
        if (pred_cfg.output >= 0) {
          posts.push_back(famgp::mo_predict(loaded.mo, x, pred_cfg.output, mode,
                                            pred_cfg.derivative));
        } else {
          for (int out = 0; out < m; ++out)
            posts.push_back(
                famgp::mo_predict(loaded.mo, x, out, mode, pred_cfg.derivative));
        }
      }
      ensure_dir(out_dir);
      std::string path = join_path(out_dir, "predictions.csv");
      famgp::write_predictions_csv(path, x, posts);
      std::printf("wrote %s (%lld rows)\n", path.c_str(),
                  static_cast<long long>(x.size()));
      return 0;
    };
  });

  // ---- bench ---------------------------------------------------------
  CLI::App* bench = app.add_subcommand("bench", "run a benchmark suite");
  bench->require_subcommand(1);
  bench->fallthrough();

  famgp::ScalingConfig sc_cfg;
  std::vector<long long> sc_grid;
  CLI::App* bsc = bench->add_subcommand("scaling", "per-iteration cost vs N");
  bsc->add_option("--n-grid", sc_grid, "sample counts")->delimiter(',');
  bsc->add_option("--exact-cap", sc_cfg.exact_cap, "largest N for the dense GP")
      ->capture_default_str();
  bsc->add_option("--iters", sc_cfg.iters, "gradient evaluations per timed loop")
      ->capture_default_str();
  bsc->add_option("--reps", sc_cfg.reps, "timed repetitions (median)")
      ->capture_default_str();
  bsc->add_option("--n-eigs", sc_cfg.n_eigs, "eigenvalue count")->capture_default_str();
  bsc->callback([&] {
    action = [&](const json& j) {
      if (!sc_grid.empty()) sc_cfg.n_grid.assign(sc_grid.begin(), sc_grid.end());
      jset_grid(j, "n_grid", sc_cfg.n_grid);
      long long cap = sc_cfg.exact_cap;
      jset(j, "exact_cap", cap);
      sc_cfg.exact_cap = cap;
      jset(j, "iters", sc_cfg.iters);
      jset(j, "reps", sc_cfg.reps);
      jset(j, "n_eigs", sc_cfg.n_eigs);
      sc_cfg.seed = seed;
      famgp::BenchReport report = famgp::bench_scaling(sc_cfg);
      ensure_dir(out_dir);
      std::string path = join_path(out_dir, "report_scaling.json");
      famgp::write_report_json(path, report);
      for (const auto& [k, v] : report.summary)
        std::printf("%s = %s\n", k.c_str(), famgp::format_double(v).c_str());
      std::printf("wrote %s\n", path.c_str());
      return 0;
    };
  });

  famgp::RmseSamplesConfig rs_cfg;
  std::vector<long long> rs_grid;
  CLI::App* brs = bench->add_subcommand("rmse-samples", "regression error vs N");
  brs->add_option("--n-grid", rs_grid, "sample counts")->delimiter(',');
  brs->add_option("--exact-cap", rs_cfg.exact_cap, "largest N for the dense GP")
      ->capture_default_str();
  brs->add_option("--n-eigs", rs_cfg.n_eigs, "eigenvalue count")->capture_default_str();
  brs->add_option("--seeds", rs_cfg.seeds, "seeds per N")->capture_default_str();
  brs->add_option("--noise-sd", rs_cfg.noise_sd, "observation noise std dev")
      ->capture_default_str();
  brs->add_option("--max-iters", rs_cfg.max_iters, "training iteration budget")
      ->capture_default_str();
  brs->callback([&] {
    action = [&](const json& j) {
      if (!rs_grid.empty()) rs_cfg.n_grid.assign(rs_grid.begin(), rs_grid.end());
      jset_grid(j, "n_grid", rs_cfg.n_grid);
      long long cap = rs_cfg.exact_cap;
      jset(j, "exact_cap", cap);
      rs_cfg.exact_cap = cap;
      jset(j, "n_eigs", rs_cfg.n_eigs);
      jset(j, "seeds", rs_cfg.seeds);
      jset(j, "noise_sd", rs_cfg.noise_sd);
      jset(j, "max_iters", rs_cfg.max_iters);
      jset(j, "x_lo", rs_cfg.x_lo);
      jset(j, "x_hi", rs_cfg.x_hi);
      rs_cfg.seed0 = seed;
      famgp::BenchReport report = famgp::bench_rmse_vs_samples(rs_cfg);
      ensure_dir(out_dir);
      std::string path = join_path(out_dir, "report_rmse_samples.json");
      famgp::write_report_json(path, report);
      std::printf("wrote %s\n", path.c_str());
      return 0;
    };
  });

  famgp::RmseEigsConfig re_cfg;
  CLI::App* bre = bench->add_subcommand("rmse-eigs", "regression error vs n");
  bre->add_option("--n-grid", re_cfg.n_grid, "eigenvalue counts")->delimiter(',');
  bre->add_option("--n-samples", re_cfg.n_samples, "sample count")
      ->capture_default_str();
  bre->add_option("--noise-sd", re_cfg.noise_sd, "observation noise std dev")
      ->capture_default_str();
  bre->add_option("--max-iters", re_cfg.max_iters, "training iteration budget")
      ->capture_default_str();
  bre->callback([&] {
    action = [&](const json& j) {
      jset(j, "n_grid", re_cfg.n_grid);
      long long ns = re_cfg.n_samples;
      jset(j, "n_samples", ns);
      re_cfg.n_samples = ns;
      jset(j, "noise_sd", re_cfg.noise_sd);
      jset(j, "max_iters", re_cfg.max_iters);
      re_cfg.seed = seed;
      famgp::BenchReport report = famgp::bench_rmse_vs_eigs(re_cfg);
      ensure_dir(out_dir);
      std::string path = join_path(out_dir, "report_rmse_eigs.json");
      famgp::write_report_json(path, report);
      for (const auto& [k, v] : report.summary)
        std::printf("%s = %s\n", k.c_str(), famgp::format_double(v).c_str());
      std::printf("wrote %s\n", path.c_str());
      return 0;
    };
  });

  famgp::CorrelationConfig co_cfg;
  CLI::App* bco = bench->add_subcommand("correlation",
                                        "two-output correlation recovery study");
  bco->add_option("--n-total", co_cfg.n_total, "grid size on (-1,1)")
      ->capture_default_str();
  bco->add_option("--train-frac", co_cfg.train_frac, "leading fraction used to train")
      ->capture_default_str();
  bco->add_option("--l-true", co_cfg.l_true, "generating kernel width")
      ->capture_default_str();
  bco->add_option("--off-diag", co_cfg.off_diag, "true output covariance off-diagonal")
      ->capture_default_str();
  bco->add_option("--noise-var", co_cfg.noise_var, "observation noise variance")
      ->capture_default_str();
  bco->add_option("--init-l", co_cfg.init_l, "kernel width init")->capture_default_str();
  bco->add_option("--n-eigs", co_cfg.n_eigs, "eigenvalue count")->capture_default_str();
  bco->add_option("--seeds", co_cfg.seeds, "trial count")->capture_default_str();
  bco->add_option("--max-iters", co_cfg.max_iters, "training iteration budget")
      ->capture_default_str();
  bool no_exact = false;
  bco->add_flag("--no-exact", no_exact, "skip the dense oracle comparison");
  bco->add_flag("--exact-all-seeds", co_cfg.exact_all_seeds,
                "run the dense oracle on every seed");
  bco->callback([&] {
    action = [&](const json& j) {
      long long nt = co_cfg.n_total;
      jset(j, "n_total", nt);
      co_cfg.n_total = nt;
      jset(j, "train_frac", co_cfg.train_frac);
      jset(j, "l_true", co_cfg.l_true);
      jset(j, "off_diag", co_cfg.off_diag);
      jset(j, "noise_var", co_cfg.noise_var);
      jset(j, "init_l", co_cfg.init_l);
      jset(j, "n_eigs", co_cfg.n_eigs);
      jset(j, "seeds", co_cfg.seeds);
      jset(j, "max_iters", co_cfg.max_iters);
      jset(j, "no_exact", no_exact);
      jset(j, "exact_all_seeds", co_cfg.exact_all_seeds);
      co_cfg.run_exact = !no_exact;
      co_cfg.seed0 = seed;
      ensure_dir(out_dir);
      co_cfg.out_dir = out_dir;
      famgp::BenchReport report = famgp::bench_correlation(co_cfg);
      std::string path = join_path(out_dir, "report_correlation.json");
      famgp::write_report_json(path, report);
      for (const auto& [k, v] : report.summary)
        std::printf("%s = %s\n", k.c_str(), famgp::format_double(v).c_str());
      std::printf("wrote %s\n", path.c_str());
      return 0;
    };
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  try {
    json config;
    if (!config_path.empty()) {
      config = load_config(config_path);
      jset(config, "seed", seed);
      jset(config, "out_dir", out_dir);
    }
    return action(config);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "famgp: error: %s\n", e.what());
    return 1;
  }
}
