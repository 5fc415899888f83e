#include "famgp/bench.hpp"

#include "famgp/io.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <thread>

#include "json.hpp"

namespace famgp {

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

double median(std::vector<double> v) {
  if (v.empty()) return -1.0;
  std::sort(v.begin(), v.end());
  size_t mid = v.size() / 2;
  if (v.size() % 2 == 1) return v[mid];
  return 0.5 * (v[mid - 1] + v[mid]);
}

double slope_loglog(const std::vector<double>& xs, const std::vector<double>& ys) {
  if (xs.size() < 2 || xs.size() != ys.size()) return std::nan("");
  double mx = 0, my = 0;
  size_t k = xs.size();
  std::vector<double> lx(k), ly(k);
  for (size_t i = 0; i < k; ++i) {
    lx[i] = std::log(xs[i]);
    ly[i] = std::log(ys[i]);
    mx += lx[i];
    my += ly[i];
  }
  mx /= static_cast<double>(k);
  my /= static_cast<double>(k);
  double num = 0, den = 0;
  for (size_t i = 0; i < k; ++i) {
    num += (lx[i] - mx) * (ly[i] - my);
    den += (lx[i] - mx) * (lx[i] - mx);
  }
  return num / den;
}

double rmse(const Vec& a, const Vec& b) {
  if (a.size() != b.size() || a.size() == 0)
    throw std::invalid_argument("rmse inputs differ in length");
  return std::sqrt((a - b).squaredNorm() / static_cast<double>(a.size()));
}

Vec predict_mean_chunked(const FittedModel& model, const Vec& x,
                         Eigen::Index chunk = 8192) {
  Vec out(x.size());
  for (Eigen::Index start = 0; start < x.size(); start += chunk) {
    Eigen::Index len = std::min(chunk, x.size() - start);
    Posterior p = predict(model, Vec(x.segment(start, len)), CovMode::None);
    out.segment(start, len) = p.mean;
  }
  return out;
}

// Median over reps of one timed loop of `iters` gradient evaluations.
template <typename Fn>
double time_loop(int iters, int reps, Fn&& body) {
  std::vector<double> times;
  times.reserve(static_cast<size_t>(reps));
  for (int r = 0; r < reps; ++r) {
    auto t0 = Clock::now();
    for (int i = 0; i < iters; ++i) body();
    times.push_back(seconds_since(t0));
  }
  return median(std::move(times));
}

}  // namespace

void write_report_json(const std::string& path, const BenchReport& report) {
  nlohmann::json j;
  j["name"] = report.name;
  j["cases"] = nlohmann::json::array();
  for (const BenchCase& c : report.cases) {
    nlohmann::json row;
    row["id"] = c.id;
    row["method"] = c.method;
    row["seed"] = c.seed;
    row["N"] = c.n_samples;
    row["M"] = c.outputs;
    row["n"] = c.n_eigs;
    row["iters"] = c.iters;
    row["seconds"] = c.seconds;
    row["seconds_per_iter"] = c.seconds_per_iter;
    row["phi_build_seconds"] = c.phi_build_seconds;
    row["rmse"] = c.rmse;
    row["skipped"] = c.skipped;
    for (const auto& [k, v] : c.extra) row[k] = v;
    j["cases"].push_back(std::move(row));
  }
  j["summary"] = report.summary;
  j["environment"] = {{"cpu_count", std::thread::hardware_concurrency()},
                      {"build_flags", std::string(__VERSION__)
#ifdef NDEBUG
                                          + ", NDEBUG"
#endif
                      }};
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path + "'");
  out << j.dump(2) << "\n";
}

BenchReport bench_scaling(const ScalingConfig& cfg) {
  BenchReport report;
  report.name = "scaling";
  std::map<std::string, std::pair<std::vector<double>, std::vector<double>>> curves;

  for (Eigen::Index n_samples : cfg.n_grid) {
    SinusoidData sd = gen_sinusoids(cfg.seed, n_samples, -5.0, 5.0, 10, 1.0, 10.0,
                                    std::sqrt(5.0));
    const Dataset& data = sd.data;
    InputTransform tr = InputTransform::from_data(data.X);
    FitOptions fo;
    fo.transform = &tr;

    auto push = [&](const std::string& method, double loop_s, double phi_s,
                    bool skipped) {
      BenchCase c;
      c.id = "scaling/" + method + "/N=" + std::to_string(n_samples);
      c.method = method;
      c.seed = cfg.seed;
      c.n_samples = n_samples;
      c.n_eigs = cfg.n_eigs;
      c.iters = cfg.iters;
      c.skipped = skipped;
      if (!skipped) {
        c.seconds = loop_s;
        c.seconds_per_iter = loop_s / cfg.iters;
        c.phi_build_seconds = phi_s;
        curves[method].first.push_back(static_cast<double>(n_samples));
        curves[method].second.push_back(c.seconds_per_iter);
      }
      report.cases.push_back(std::move(c));
    };

    {  // dense exact GP, one (LML, grad) evaluation per iteration
      bool skip = n_samples > cfg.exact_cap;
      double loop_s = -1.0;
      if (!skip) {
        KernelParams p;
        p.l_se = 0.2;
        ExactOptions eo;
        eo.transform = &tr;
        loop_s = time_loop(cfg.iters, cfg.reps, [&] {
          ExactGP model = exact_fit(data, KernelKind::SquaredExponential, p, eo);
          (void)exact_lml_and_grad(model, "l_se");
        });
      }
      push("exact", loop_s, -1.0, skip);
    }

    {  // squared exponential, basis rebuilt every iteration
      KernelParams p;
      p.l_se = 0.2;
      std::vector<std::string> names = {"l_se", "noise_variance"};
      double loop_s = time_loop(cfg.iters, cfg.reps, [&] {
        MercerBasis basis =
            make_basis(KernelKind::SquaredExponential, p, cfg.n_eigs, 0.0);
        (void)lml_value_and_grads(data, basis, names, 1.0, fo);
      });
      push("se", loop_s, -1.0, false);
    }

    {  // periodic, basis and its parameter derivative rebuilt every iteration
      KernelParams p;
      std::vector<std::string> names = {"w_pr", "f_pr"};
      int n_odd = cfg.n_eigs % 2 == 1 ? cfg.n_eigs : cfg.n_eigs + 1;
      double loop_s = time_loop(cfg.iters, cfg.reps, [&] {
        MercerBasis basis = make_basis(KernelKind::Periodic, p, n_odd, 0.0);
        (void)lml_value_and_grads(data, basis, names, 1.0, fo);
      });
      push("pr", loop_s, -1.0, false);
    }

    {  // chebyshev fast path: Phi built once, eigenvalues move
      KernelParams p;
      MercerBasis basis0 = make_basis(KernelKind::Chebyshev, p, cfg.n_eigs, 0.0);
      auto t0 = Clock::now();
      FastCache cache = make_fast_cache(data, basis0, fo);
      double phi_s = seconds_since(t0);
      std::vector<std::string> names = {"a", "b", "noise_variance"};
      double loop_s = time_loop(cfg.iters, cfg.reps, [&] {
        MercerBasis basis = make_basis(KernelKind::Chebyshev, p, cfg.n_eigs, 0.0);
        (void)lml_fast_and_grads(cache, basis, data.noise_variance[0], names);
      });
      push("ch", loop_s, phi_s, false);
    }

    {  // periodic fast path with the frequency frozen
      KernelParams p;
      int n_odd = cfg.n_eigs % 2 == 1 ? cfg.n_eigs : cfg.n_eigs + 1;
      MercerBasis basis0 = make_basis(KernelKind::Periodic, p, n_odd, 0.0);
      auto t0 = Clock::now();
      FastCache cache = make_fast_cache(data, basis0, fo);
      double phi_s = seconds_since(t0);
      std::vector<std::string> names = {"w_pr", "noise_variance"};
      double loop_s = time_loop(cfg.iters, cfg.reps, [&] {
        MercerBasis basis = make_basis(KernelKind::Periodic, p, n_odd, 0.0);
        (void)lml_fast_and_grads(cache, basis, data.noise_variance[0], names);
      });
      push("prcf", loop_s, phi_s, false);
    }
  }

  for (const auto& [method, xy] : curves)
    report.summary["slope_" + method] = slope_loglog(xy.first, xy.second);
  return report;
}

BenchReport bench_rmse_vs_samples(const RmseSamplesConfig& cfg) {
  BenchReport report;
  report.name = "rmse_vs_samples";

  for (Eigen::Index n_samples : cfg.n_grid) {
    for (int s = 0; s < cfg.seeds; ++s) {
      std::uint64_t seed = cfg.seed0 + static_cast<std::uint64_t>(s);
      SinusoidData sd = gen_sinusoids(seed, n_samples, cfg.x_lo, cfg.x_hi, 10, 1.0, 10.0,
                                      cfg.noise_sd);

      auto push = [&](const std::string& method, double err, double secs, bool skipped,
                      const std::map<std::string, double>& extra = {}) {
        BenchCase c;
        c.id = "rmse_samples/" + method + "/N=" + std::to_string(n_samples) +
               "/seed=" + std::to_string(seed);
        c.method = method;
        c.seed = seed;
        c.n_samples = n_samples;
        c.n_eigs = cfg.n_eigs;
        c.rmse = err;
        c.seconds = secs;
        c.skipped = skipped;
        c.extra = extra;
        report.cases.push_back(std::move(c));
      };

      TrainOptions topt;
      topt.config.max_iters = cfg.max_iters;
      topt.record_trace = false;

      {  // squared exponential, width + scale + noise
        TrainOptions o = topt;
        o.train_scale = true;
        auto t0 = Clock::now();
        TrainResult r = train_general(sd.data, KernelKind::SquaredExponential,
                                      default_train_init(KernelKind::SquaredExponential),
                                      cfg.n_eigs, o);
        double err = rmse(predict_mean_chunked(r.model, sd.data.X), sd.y_true);
        push("se", err, seconds_since(t0), false,
             {{"l_se", r.params.l_se},
              {"scale", r.scale},
              {"noise_variance", r.noise_variance}});
      }

      {  // chebyshev fast path, (a, b) + noise
        auto t0 = Clock::now();
        TrainResult r = train_fast_path(sd.data, KernelKind::Chebyshev,
                                        default_train_init(KernelKind::Chebyshev),
                                        cfg.n_eigs, topt);
        double err = rmse(predict_mean_chunked(r.model, sd.data.X), sd.y_true);
        push("ch", err, seconds_since(t0), false,
             {{"a", r.params.a}, {"b", r.params.b},
              {"noise_variance", r.noise_variance}});
      }

      if (n_samples <= cfg.exact_cap && s == 0) {  // dense reference, first seed
        TrainOptions o = topt;
        o.train_scale = true;
        auto t0 = Clock::now();
        ExactTrainResult r = train_exact(sd.data, KernelKind::SquaredExponential,
                                         default_train_init(KernelKind::SquaredExponential),
                                         o);
        Posterior p = exact_predict(r.model, sd.data.X, CovMode::None);
        push("exact", rmse(p.mean, sd.y_true), seconds_since(t0), false,
             {{"l_se", r.params.l_se},
              {"scale", r.scale},
              {"noise_variance", r.noise_variance}});
      } else if (s == 0) {
        push("exact", -1.0, -1.0, true);
      }
    }
  }

  // per-method median RMSE at each N
  for (const std::string method : {"se", "ch", "exact"}) {
    for (Eigen::Index n_samples : cfg.n_grid) {
      std::vector<double> errs;
      for (const BenchCase& c : report.cases)
        if (c.method == method && c.n_samples == n_samples && !c.skipped)
          errs.push_back(c.rmse);
      if (!errs.empty())
        report.summary["median_rmse_" + method + "_N" + std::to_string(n_samples)] =
            median(std::move(errs));
    }
  }
  return report;
}

BenchReport bench_rmse_vs_eigs(const RmseEigsConfig& cfg) {
  BenchReport report;
  report.name = "rmse_vs_eigs";
  SinusoidData sd = gen_sinusoids(cfg.seed, cfg.n_samples, -1.0, 1.0, 10, 1.0, 10.0,
                                  cfg.noise_sd);

  TrainOptions topt;
  topt.config.max_iters = cfg.max_iters;
  topt.train_scale = true;
  topt.record_trace = false;
  // the sweep must hold the working truncation at exactly n; the relative
  // floor would trim the narrow init basis
  topt.eig_floor = 0.0;

  ExactTrainResult ex = train_exact(sd.data, KernelKind::SquaredExponential,
                                    default_train_init(KernelKind::SquaredExponential),
                                    topt);
  double exact_rmse =
      rmse(exact_predict(ex.model, sd.data.X, CovMode::None).mean, sd.y_true);
  {
    BenchCase c;
    c.id = "rmse_eigs/exact";
    c.method = "exact";
    c.seed = cfg.seed;
    c.n_samples = cfg.n_samples;
    c.rmse = exact_rmse;
    c.extra = {{"l_se", ex.params.l_se},
               {"scale", ex.scale},
               {"noise_variance", ex.noise_variance}};
    report.cases.push_back(std::move(c));
  }

  for (int n : cfg.n_grid) {
    TrainResult r = train_general(sd.data, KernelKind::SquaredExponential,
                                  default_train_init(KernelKind::SquaredExponential), n,
                                  topt);
    double err = rmse(predict_mean_chunked(r.model, sd.data.X), sd.y_true);
    // retained eigenvalue mass: the SE ladder is geometric, so the infinite
    // tail sums in closed form from the first ratio
    const Vec& lambda = r.model.basis.lambda;
    double mass = 1.0;
    if (lambda.size() >= 2) {
      double q = lambda[1] / lambda[0];
      double total = lambda[0] / (1.0 - q);
      mass = lambda.sum() / total;
    }
    BenchCase c;
    c.id = "rmse_eigs/famgp/n=" + std::to_string(n);
    c.method = "famgp";
    c.seed = cfg.seed;
    c.n_samples = cfg.n_samples;
    c.n_eigs = n;
    c.rmse = err;
    c.extra = {{"l_se", r.params.l_se},
               {"scale", r.scale},
               {"noise_variance", r.noise_variance},
               {"eig_mass", mass},
               {"rmse_vs_exact", err / exact_rmse - 1.0}};
    report.cases.push_back(std::move(c));
  }

  report.summary["exact_rmse"] = exact_rmse;
  report.summary["exact_l_se"] = ex.params.l_se;
  report.summary["exact_scale"] = ex.scale;
  return report;
}

BenchReport bench_correlation(const CorrelationConfig& cfg) {
  BenchReport report;
  report.name = "correlation";

  Mat kf_true(2, 2);
  kf_true << 1.0, cfg.off_diag, cfg.off_diag, 1.0;
  Eigen::Index n_train =
      static_cast<Eigen::Index>(std::lround(cfg.train_frac * cfg.n_total));
  InputTransform tr = InputTransform::from_range(-1.0, 1.0);

  std::vector<double> corrs, widths, ratios;

  for (int s = 0; s < cfg.seeds; ++s) {
    std::uint64_t seed = cfg.seed0 + static_cast<std::uint64_t>(s);
    CorrelatedDraw draw =
        gen_correlated_draw(seed, cfg.n_total, cfg.l_true, kf_true, cfg.noise_var);

    MODataset train = make_mo_dataset(Vec(draw.data.X.head(n_train)),
                                      Mat(draw.data.Y.topRows(n_train)), cfg.noise_var);

    KernelParams init;
    init.l_se = cfg.init_l;
    MOTrainOptions mopt;
    mopt.transform = &tr;
    mopt.config.max_iters = cfg.max_iters;
    mopt.record_trace = false;
    mopt.eig_floor = 0.0;  // keep all n eigenvalues despite the wide init

    MOTrainResult fam = train_multioutput(train, KernelKind::SquaredExponential, init,
                                          cfg.n_eigs, mopt);
    Mat kf = fam.L * fam.L.transpose();
    double corr = kf(0, 1) / std::sqrt(kf(0, 0) * kf(1, 1));

    // prediction stage: output 1 observed everywhere, output 2 only on the
    // training block
    MODataset hetero = make_mo_dataset(draw.data.X, draw.data.Y, cfg.noise_var);
    hetero.observed.resize(2);
    hetero.observed[0].resize(static_cast<size_t>(cfg.n_total));
    for (Eigen::Index i = 0; i < cfg.n_total; ++i)
      hetero.observed[0][static_cast<size_t>(i)] = i;
    hetero.observed[1].resize(static_cast<size_t>(n_train));
    for (Eigen::Index i = 0; i < n_train; ++i)
      hetero.observed[1][static_cast<size_t>(i)] = i;

    MOFitOptions pfo;
    pfo.transform = &tr;
    Vec x_test = draw.data.X.tail(cfg.n_total - n_train);
    Vec latent_test = draw.latent.col(1).tail(cfg.n_total - n_train);

    auto test_rmse = [&](const Mat& l_kf) {
      MOFittedModel m = mo_fit(hetero, fam.model.basis, l_kf, pfo);
      return rmse(mo_predict(m, x_test, 1, CovMode::None).mean, latent_test);
    };
    double rmse_learned = test_rmse(fam.L);
    double rmse_identity = test_rmse(Mat::Identity(2, 2));
    double ratio = rmse_identity / rmse_learned;

    corrs.push_back(corr);
    widths.push_back(fam.params.l_se);
    ratios.push_back(ratio);

    BenchCase c;
    c.id = "correlation/famgp/seed=" + std::to_string(seed);
    c.method = "famgp";
    c.seed = seed;
    c.n_samples = n_train;
    c.outputs = 2;
    c.n_eigs = cfg.n_eigs;
    c.iters = fam.iters;
    c.rmse = rmse_learned;
    c.extra = {{"kf_00", kf(0, 0)},
               {"kf_01", kf(0, 1)},
               {"kf_11", kf(1, 1)},
               {"corr", corr},
               {"l_se", fam.params.l_se},
               {"rmse_identity", rmse_identity},
               {"rmse_ratio", ratio},
               {"lml", fam.lml}};
    report.cases.push_back(std::move(c));

    if (!cfg.out_dir.empty()) {
      auto dump = [&](const Mat& l_kf, const std::string& tag) {
        MOFittedModel m = mo_fit(hetero, fam.model.basis, l_kf, pfo);
        std::vector<Posterior> posts = {mo_predict(m, draw.data.X, 0),
                                        mo_predict(m, draw.data.X, 1)};
        write_predictions_csv(cfg.out_dir + "/correlation_seed" + std::to_string(seed) +
                                  "_" + tag + ".csv",
                              draw.data.X, posts);
      };
      dump(fam.L, "learned");
      dump(Mat::Identity(2, 2), "identity");
    }

    if (cfg.run_exact && (s == 0 || cfg.exact_all_seeds)) {
      ExactMOTrainResult ex = train_exact_multioutput(
          train, KernelKind::SquaredExponential, init, mopt);
      Mat ekf = ex.L * ex.L.transpose();
      double ecorr = ekf(0, 1) / std::sqrt(ekf(0, 0) * ekf(1, 1));
      BenchCase c2;
      c2.id = "correlation/exact/seed=" + std::to_string(seed);
      c2.method = "exact";
      c2.seed = seed;
      c2.n_samples = n_train;
      c2.outputs = 2;
      c2.iters = ex.iters;
      c2.extra = {{"kf_00", ekf(0, 0)},
                  {"kf_01", ekf(0, 1)},
                  {"kf_11", ekf(1, 1)},
                  {"corr", ecorr},
                  {"l_se", ex.params.l_se},
                  {"lml", ex.lml},
                  {"rel_diff_l", std::abs(ex.params.l_se - fam.params.l_se) /
                                     std::abs(ex.params.l_se)},
                  {"rel_diff_kf01", std::abs(ekf(0, 1) - kf(0, 1)) / std::abs(ekf(0, 1))}};
      report.cases.push_back(std::move(c2));
    }
  }

  report.summary["median_corr"] = median(corrs);
  report.summary["median_l_se"] = median(widths);
  report.summary["median_rmse_ratio"] = median(ratios);
  return report;
}

}  // namespace famgp
