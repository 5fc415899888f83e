#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "famgp/bench.hpp"
#include "famgp/io.hpp"

namespace py = pybind11;
using namespace famgp;

namespace {

KernelKind kind_of(const std::string& s) { return kernel_kind_from_string(s); }

TrainOptions make_train_options(int max_iters, double initial_step, double grad_tol,
                                bool train_noise, double init_noise, bool train_scale,
                                const std::vector<std::string>& fixed) {
  TrainOptions opt;
  opt.config.max_iters = max_iters;
  opt.config.initial_step = initial_step;
  opt.config.grad_tol = grad_tol;
  opt.train_noise = train_noise;
  opt.init_noise = init_noise;
  opt.train_scale = train_scale;
  opt.fixed = fixed;
  return opt;
}

}  // namespace

PYBIND11_MODULE(famgp_py, m) {
  m.doc() = "Gaussian process regression through truncated Mercer expansions";

  py::class_<KernelParams>(m, "KernelParams")
      .def(py::init([](double l_se, double alpha_se, double f_pr, double w_pr,
                       double a, double b) {
             KernelParams p;
             p.l_se = l_se;
             p.alpha_se = alpha_se;
             p.f_pr = f_pr;
             p.w_pr = w_pr;
             p.a = a;
             p.b = b;
             return p;
           }),
           py::kw_only(), py::arg("l_se") = KernelParams{}.l_se,
           py::arg("alpha_se") = KernelParams{}.alpha_se,
           py::arg("f_pr") = KernelParams{}.f_pr,
           py::arg("w_pr") = KernelParams{}.w_pr, py::arg("a") = KernelParams{}.a,
           py::arg("b") = KernelParams{}.b)
      .def_readwrite("l_se", &KernelParams::l_se)
      .def_readwrite("alpha_se", &KernelParams::alpha_se)
      .def_readwrite("f_pr", &KernelParams::f_pr)
      .def_readwrite("w_pr", &KernelParams::w_pr)
      .def_readwrite("a", &KernelParams::a)
      .def_readwrite("b", &KernelParams::b);

  py::class_<MercerBasis>(m, "MercerBasis")
      .def_property_readonly("kind",
                             [](const MercerBasis& b) { return to_string(b.kind); })
      .def_readonly("params", &MercerBasis::params)
      .def_readonly("n", &MercerBasis::n)
      .def_readonly("lambda_", &MercerBasis::lambda);

  py::class_<InputTransform>(m, "InputTransform")
      .def_readonly("shift", &InputTransform::shift)
      .def_readonly("scale", &InputTransform::scale);

  py::class_<Posterior>(m, "Posterior")
      .def_readonly("mean", &Posterior::mean)
      .def_readonly("variance", &Posterior::variance)
      .def_readonly("covariance", &Posterior::covariance)
      .def_readonly("derivative_order", &Posterior::derivative_order);

  py::class_<FittedModel>(m, "FittedModel")
      .def_readonly("basis", &FittedModel::basis)
      .def_readonly("transform", &FittedModel::transform)
      .def_readonly("alpha_prime", &FittedModel::alpha_prime)
      .def_readonly("G", &FittedModel::G)
      .def_readonly("noise_variance", &FittedModel::noise_variance)
      .def(
          "predict",
          [](const FittedModel& model, const Vec& x, int derivative, bool variance) {
            return predict_derivative(model, x, derivative,
                                      variance ? CovMode::Diagonal : CovMode::None);
          },
          py::arg("x"), py::arg("derivative") = 0, py::arg("variance") = false);

  py::class_<MOFittedModel>(m, "MOFittedModel")
      .def_readonly("basis", &MOFittedModel::basis)
      .def_readonly("L", &MOFittedModel::L)
      .def_readonly("S", &MOFittedModel::S)
      .def_property_readonly("outputs", &MOFittedModel::outputs)
      .def(
          "predict",
          [](const MOFittedModel& model, const Vec& x, int output, int derivative,
             bool variance) {
            return mo_predict(model, x, output,
                              variance ? CovMode::Diagonal : CovMode::None,
                              derivative);
          },
          py::arg("x"), py::arg("output"), py::arg("derivative") = 0,
          py::arg("variance") = false);

  m.def(
      "kernel_eval",
      [](const std::string& kind, const KernelParams& p, double x, double x2) {
        return kernel_eval(kind_of(kind), p, x, x2);
      },
      py::arg("kind"), py::arg("params"), py::arg("x"), py::arg("x2"));

  m.def(
      "make_basis",
      [](const std::string& kind, const KernelParams& p, int n, double eig_floor) {
        return make_basis(kind_of(kind), p, n, eig_floor);
      },
      py::arg("kind"), py::arg("params"), py::arg("n"),
      py::arg("eig_floor") = kDefaultEigFloor);

  m.def(
      "basis_matrix",
      [](const MercerBasis& basis, const Vec& u, int derivative) {
        return derivative == 0 ? basis_matrix(basis, u).values
                               : basis_derivative(basis, u, derivative).values;
      },
      py::arg("basis"), py::arg("u"), py::arg("derivative") = 0,
      "Eigenfunction matrix on already-normalized inputs");

  m.def(
      "fit",
      [](const Vec& x, const Vec& y, double noise_variance, const std::string& kind,
         const KernelParams& params, int n) {
        return fit(make_dataset(x, y, noise_variance), kind_of(kind), params, n);
      },
      py::arg("x"), py::arg("y"), py::arg("noise_variance"), py::arg("kind"),
      py::arg("params"), py::arg("n"));

  m.def(
      "log_marginal_likelihood",
      [](const Vec& x, const Vec& y, double noise_variance, const std::string& kind,
         const KernelParams& params, int n) {
        return log_marginal_likelihood(make_dataset(x, y, noise_variance),
                                       kind_of(kind), params, n);
      },
      py::arg("x"), py::arg("y"), py::arg("noise_variance"), py::arg("kind"),
      py::arg("params"), py::arg("n"));

  auto train_result = [](py::module_& mod) {
    py::class_<TrainResult>(mod, "TrainResult")
        .def_readonly("model", &TrainResult::model)
        .def_readonly("params", &TrainResult::params)
        .def_readonly("noise_variance", &TrainResult::noise_variance)
        .def_readonly("scale", &TrainResult::scale)
        .def_readonly("lml", &TrainResult::lml)
        .def_readonly("iters", &TrainResult::iters)
        .def_readonly("converged", &TrainResult::converged);
  };
  train_result(m);

  m.def(
      "train",
      [](const Vec& x, const Vec& y, const std::string& kind, int n,
         const KernelParams* init, bool fast, int max_iters, double initial_step,
         double grad_tol, bool train_noise, double init_noise, bool train_scale,
         const std::vector<std::string>& fixed) {
        KernelKind k = kind_of(kind);
        KernelParams start = init ? *init : default_train_init(k);
        double noise0 = init_noise > 0 ? init_noise : default_noise_init(y);
        Dataset data = make_dataset(x, y, noise0);
        TrainOptions opt = make_train_options(max_iters, initial_step, grad_tol,
                                              train_noise, noise0, train_scale, fixed);
        return fast ? train_fast_path(data, k, start, n, opt)
                    : train_general(data, k, start, n, opt);
      },
      py::arg("x"), py::arg("y"), py::arg("kind"), py::arg("n"),
      py::arg("init") = nullptr, py::arg("fast") = false, py::arg("max_iters") = 500,
      py::arg("initial_step") = 1e-4, py::arg("grad_tol") = 1e-5,
      py::arg("train_noise") = true, py::arg("init_noise") = -1.0,
      py::arg("train_scale") = false,
      py::arg("fixed") = std::vector<std::string>{});

  py::class_<ExactGP>(m, "ExactGP")
      .def(
          "predict",
          [](const ExactGP& model, const Vec& x, bool variance) {
            return exact_predict(model, x,
                                 variance ? CovMode::Diagonal : CovMode::None);
          },
          py::arg("x"), py::arg("variance") = false)
      .def_property_readonly("lml", [](const ExactGP& model) { return exact_lml(model); });

  m.def(
      "exact_fit",
      [](const Vec& x, const Vec& y, double noise_variance, const std::string& kind,
         const KernelParams& params) {
        return exact_fit(make_dataset(x, y, noise_variance), kind_of(kind), params);
      },
      py::arg("x"), py::arg("y"), py::arg("noise_variance"), py::arg("kind"),
      py::arg("params"));

  m.def(
      "mo_fit",
      [](const Vec& x, const Mat& y, double noise_variance, const std::string& kind,
         const KernelParams& params, int n, const Mat& l_kf) {
        return mo_fit(make_mo_dataset(x, y, noise_variance), kind_of(kind), params, n,
                      l_kf);
      },
      py::arg("x"), py::arg("y"), py::arg("noise_variance"), py::arg("kind"),
      py::arg("params"), py::arg("n"), py::arg("l_kf"),
      "Multi-output fit; l_kf is the lower Cholesky factor of K_f");

  py::class_<MOTrainResult>(m, "MOTrainResult")
      .def_readonly("model", &MOTrainResult::model)
      .def_readonly("params", &MOTrainResult::params)
      .def_readonly("L", &MOTrainResult::L)
      .def_readonly("noise_variance", &MOTrainResult::noise_variance)
      .def_readonly("lml", &MOTrainResult::lml)
      .def_readonly("iters", &MOTrainResult::iters)
      .def_readonly("converged", &MOTrainResult::converged);

  m.def(
      "train_multioutput",
      [](const Vec& x, const Mat& y, double noise_variance, const std::string& kind,
         int n, const KernelParams* init, int max_iters, double initial_step,
         double grad_tol, bool train_noise) {
        KernelKind k = kind_of(kind);
        MOTrainOptions opt;
        opt.config.max_iters = max_iters;
        opt.config.initial_step = initial_step;
        opt.config.grad_tol = grad_tol;
        opt.train_noise = train_noise;
        opt.init_noise = noise_variance;
        return train_multioutput(make_mo_dataset(x, y, noise_variance), k,
                                 init ? *init : default_train_init(k), n, opt);
      },
      py::arg("x"), py::arg("y"), py::arg("noise_variance"), py::arg("kind"),
      py::arg("n"), py::arg("init") = nullptr, py::arg("max_iters") = 500,
      py::arg("initial_step") = 1e-4, py::arg("grad_tol") = 1e-5,
      py::arg("train_noise") = false);

  m.def(
      "gen_sinusoids",
      [](std::uint64_t seed, Eigen::Index n, double x_lo, double x_hi, int num_terms,
         double coeff_lo, double coeff_hi, double noise_sd, int derivative) {
        SinusoidData sd = gen_sinusoids(seed, n, x_lo, x_hi, num_terms, coeff_lo,
                                        coeff_hi, noise_sd);
        Vec truth = derivative == 0 ? sd.y_true
                                    : sd.signal.derivative(sd.data.X, derivative);
        return py::make_tuple(sd.data.X, sd.data.Y, sd.y_true, truth);
      },
      py::arg("seed"), py::arg("n"), py::arg("x_lo") = -1.0, py::arg("x_hi") = 1.0,
      py::arg("num_terms") = 10, py::arg("coeff_lo") = 1.0,
      py::arg("coeff_hi") = 10.0, py::arg("noise_sd") = 0.0,
      py::arg("derivative") = 0,
      "Returns (x, y, y_true, d^k y_true) for the requested derivative order");

  m.def(
      "gen_correlated",
      [](std::uint64_t seed, Eigen::Index n, double l_se, const Mat& kf,
         double noise_var) {
        CorrelatedDraw draw = gen_correlated_draw(seed, n, l_se, kf, noise_var);
        return py::make_tuple(draw.data.X, draw.data.Y, draw.latent);
      },
      py::arg("seed"), py::arg("n"), py::arg("l_se"), py::arg("kf"),
      py::arg("noise_var"), "Returns (x, y, latent)");

  m.def("save_model", &save_model_json, py::arg("path"), py::arg("model"));
  m.def("load_model", &load_model_json, py::arg("path"));
  m.def("save_mo_model", &save_mo_model_json, py::arg("path"), py::arg("model"));
  m.def("load_mo_model", &load_mo_model_json, py::arg("path"));
}
