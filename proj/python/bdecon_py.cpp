#include <memory>
#include <optional>
#include <string>

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "bdecon/conv.hpp"
#include "bdecon/error.hpp"
#include "bdecon/harness.hpp"
#include "bdecon/lmmse.hpp"
#include "bdecon/map.hpp"
#include "bdecon/priors.hpp"

namespace py = pybind11;
using namespace bdecon;

namespace {

MapVariant parse_variant(const std::string& s) {
  if (s == "sigma" || s == "map_sigma") return MapVariant::Sigma;
  if (s == "h" || s == "kernel" || s == "map_h") return MapVariant::KernelSmooth;
  throw InvalidArgument("unknown variant: " + s);
}

py::dict trace_dict(const std::vector<TraceRecord>& trace) {
  std::vector<int> it;
  std::vector<double> mx, mh, obj;
  for (const auto& t : trace) {
    it.push_back(t.iter);
    mx.push_back(t.mse_x);
    mh.push_back(t.mse_h);
    obj.push_back(t.objective);
  }
  py::dict d;
  d["iter"] = it;
  d["mse_x"] = mx;
  d["mse_h"] = mh;
  d["objective"] = obj;
  return d;
}

std::string config_text(const py::handle& v) {
  if (py::isinstance<py::str>(v) || !py::isinstance<py::sequence>(v)) return py::str(v);
  std::string out;
  for (auto item : v) {
    if (!out.empty()) out += ',';
    if (py::isinstance<py::tuple>(item)) {
      auto t = item.cast<py::tuple>();
      if (t.size() != 2) throw InvalidArgument("config: tuple entries must be pairs");
      out += std::string(py::str(t[0])) + ':' + std::string(py::str(t[1]));
    } else {
      out += py::str(item);
    }
  }
  return out;
}

ExperimentConfig make_config(const std::string& preset, const py::dict& overrides) {
  if (preset != "paper" && preset != "desk") throw InvalidArgument("unknown preset: " + preset);
  ExperimentConfig cfg = preset == "paper" ? ExperimentConfig::paper() : ExperimentConfig::desk();
  std::map<std::string, std::string> kv;
  for (auto item : overrides) kv[py::str(item.first)] = config_text(item.second);
  apply_config(cfg, kv, false);
  cfg.validate();
  return cfg;
}

}  // namespace

PYBIND11_MODULE(_bdecon, m) {
  m.doc() = "Bayesian blind deconvolution: priors, LMMSE and MAP estimators";
  m.attr("__version__") = kVersion;

  py::register_exception<IoError>(m, "IoError", PyExc_OSError);
  py::register_exception<MalformedFile>(m, "MalformedFile", PyExc_ValueError);
  py::register_exception<VersionMismatch>(m, "VersionMismatch", PyExc_ValueError);
  py::register_exception<SingularMoments>(m, "SingularMoments", PyExc_ArithmeticError);
  py::register_exception<Divergence>(m, "Divergence", PyExc_ArithmeticError);
  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);

  py::class_<Dictionary>(m, "Dictionary")
      .def_readonly("n", &Dictionary::n)
      .def_readonly("atom_indices", &Dictionary::atom_indices)
      .def_readonly("mu_alpha", &Dictionary::mu_alpha)
      .def("size", &Dictionary::size);

  m.def("make_dictionary", &make_dictionary, py::arg("n"), py::arg("K"), py::arg("seed"));
  m.def("dct2_atom", &dct2_atom, py::arg("p"), py::arg("q"), py::arg("n"));
  m.def("synthesize", &synthesize, py::arg("dict"), py::arg("alpha"));
  m.def("analyze", &analyze, py::arg("dict"), py::arg("x"));
  m.def("dct2", &dct2, py::arg("x"));
  m.def("idct2", &idct2, py::arg("coeffs"));
  m.def("embed_kernel", py::overload_cast<const Grid&, int>(&embed_kernel), py::arg("h"), py::arg("n"));
  m.def("conv2_circ", py::overload_cast<const Image&, const Image&>(&conv2_circ), py::arg("x"),
        py::arg("filter"));
  m.def("conv2_adj", py::overload_cast<const Image&, const Image&>(&conv2_adj), py::arg("filter"),
        py::arg("r"));

  m.def("gaussian_kernel", [](double sigma, int d) { return gaussian_kernel(sigma, d).weights(); },
        py::arg("sigma"), py::arg("d"));
  m.def("dgaussian_dsigma", &dgaussian_dsigma, py::arg("sigma"), py::arg("d"));

  py::class_<SignalPrior>(m, "SignalPrior")
      .def(py::init([](const Dictionary& dict, double b) { return SignalPrior{dict, b}; }), py::arg("dict"),
           py::arg("b") = 0.5)
      .def_readonly("dict", &SignalPrior::dict)
      .def_readonly("b", &SignalPrior::b);

  py::class_<KernelPrior>(m, "KernelPrior")
      .def(py::init([](int d, double a, double beta) { return KernelPrior{d, a, beta}; }), py::arg("d") = 15,
           py::arg("a") = 2.0, py::arg("beta") = 1.0)
      .def_readonly("d", &KernelPrior::d)
      .def_readonly("a", &KernelPrior::a)
      .def_readonly("beta", &KernelPrior::beta);

  py::class_<NoiseModel>(m, "NoiseModel")
      .def(py::init([](double c_eps) { return NoiseModel{c_eps}; }), py::arg("c_eps") = 9e-4)
      .def_readonly("c_eps", &NoiseModel::c_eps);

  py::class_<ProblemInstance>(m, "ProblemInstance")
      .def_readonly("alpha", &ProblemInstance::alpha)
      .def_readonly("x", &ProblemInstance::x)
      .def_readonly("sigma", &ProblemInstance::sigma)
      .def_property_readonly("h", [](const ProblemInstance& p) { return p.h.weights(); })
      .def_readonly("eps", &ProblemInstance::eps)
      .def_readonly("y", &ProblemInstance::y);

  m.def("generate_instance_at", &generate_instance_at, py::arg("signal"), py::arg("kernel"), py::arg("noise"),
        py::arg("base_seed"), py::arg("index"));
  m.def(
      "generate_dataset",
      [](const SignalPrior& s, const KernelPrior& k, const NoiseModel& e, int count, std::uint64_t seed,
         int workers) { return generate_dataset(s, k, e, count, seed, workers).instances; },
      py::arg("signal"), py::arg("kernel"), py::arg("noise"), py::arg("count"), py::arg("base_seed"),
      py::arg("workers") = 1);

  py::class_<QuadratureRule>(m, "QuadratureRule")
      .def_readonly("nodes", &QuadratureRule::nodes)
      .def_readonly("weights", &QuadratureRule::weights);
  m.def("gamma_quadrature", &gamma_quadrature, py::arg("a"), py::arg("beta"), py::arg("M"));

  py::class_<MomentSet, std::shared_ptr<MomentSet>>(m, "MomentSet")
      .def_readonly("n", &MomentSet::n)
      .def_readonly("d", &MomentSet::d)
      .def_readonly("n_samples", &MomentSet::n_samples)
      .def_readonly("mean_x", &MomentSet::mean_x)
      .def_readonly("mean_h", &MomentSet::mean_h)
      .def_readonly("mean_y", &MomentSet::mean_y)
      .def_readonly("C_xy", &MomentSet::C_xy)
      .def_readonly("C_hy", &MomentSet::C_hy)
      .def_readonly("C_yy", &MomentSet::C_yy)
      .def_readonly("c_eps", &MomentSet::c_eps)
      .def_property_readonly("empirical", [](const MomentSet& s) { return s.kind == MomentKind::Empirical; });

  m.def(
      "theoretical_moments",
      [](const SignalPrior& s, const KernelPrior& k, const NoiseModel& e, int M, int workers) {
        return std::make_shared<MomentSet>(theoretical_moments(s, k, e, gamma_quadrature(k.a, k.beta, M), workers));
      },
      py::arg("signal"), py::arg("kernel"), py::arg("noise"), py::arg("M") = 64, py::arg("workers") = 1);
  m.def(
      "empirical_moments",
      [](const std::vector<ProblemInstance>& instances, int n_samples) {
        return std::make_shared<MomentSet>(empirical_moments(instances, n_samples));
      },
      py::arg("instances"), py::arg("n_samples"));
  m.def("default_ridge", &default_ridge, py::arg("moments"));

  m.def(
      "lmmse_estimate",
      [](const MomentSet& mset, const Image& y, std::optional<double> ridge) {
        auto est = lmmse_estimate(mset, y, ridge ? *ridge : default_ridge(mset));
        return py::make_tuple(est.x_hat, est.h_hat);
      },
      py::arg("moments"), py::arg("y"), py::arg("ridge") = py::none());
  m.def(
      "tikhonov_residual",
      [](const MomentSet& mset, const Image& x_hat, const Grid& h_hat, const Image& y) {
        return tikhonov_residual(mset, LmmseEstimate{x_hat, h_hat}, y);
      },
      py::arg("moments"), py::arg("x_hat"), py::arg("h_hat"), py::arg("y"));

  m.def("project_simplex", py::overload_cast<const Vector&>(&project_simplex), py::arg("v"));
  m.def("project_simplex_grid", py::overload_cast<const Grid&>(&project_simplex), py::arg("g"));
  m.def("soft_threshold_shifted", &soft_threshold_shifted, py::arg("v"), py::arg("mu"), py::arg("tau"));
  m.def("fit_sigma", &fit_sigma, py::arg("h_hat"), py::arg("lo"), py::arg("hi"));
  m.def("smoothness", &smoothness, py::arg("h"));

  m.def(
      "map_solve",
      [](const Image& y, const SignalPrior& s, const KernelPrior& k, const std::string& variant,
         double lambda_alpha, double lambda_h, int max_iter, std::uint64_t init_seed,
         std::optional<std::pair<Image, Grid>> boost, std::optional<std::pair<Image, Grid>> truth,
         double step_alpha, double step_h, int inner_steps) {
        MapConfig cfg;
        cfg.variant = parse_variant(variant);
        cfg.lambda_alpha = lambda_alpha;
        cfg.lambda_h = lambda_h;
        cfg.max_iter = max_iter;
        cfg.init_seed = init_seed;
        cfg.step_alpha = step_alpha;
        cfg.step_h = step_h;
        cfg.inner_steps = inner_steps;
        if (boost) cfg.init = BoostedInit{LmmseEstimate{boost->first, boost->second}};
        std::optional<GroundTruth> gt;
        if (truth) gt = GroundTruth{truth->first, truth->second};
        MapResult r;
        {
          py::gil_scoped_release release;
          r = map_solve(y, s, k, cfg, gt);
        }
        py::dict out;
        out["alpha"] = r.alpha;
        out["x_hat"] = r.x_hat;
        out["h_hat"] = r.h_hat.weights();
        out["sigma"] = r.sigma;
        out["iterations"] = r.iterations;
        out["trace"] = trace_dict(r.trace);
        return out;
      },
      py::arg("y"), py::arg("signal"), py::arg("kernel"), py::arg("variant") = "sigma",
      py::arg("lambda_alpha") = 0.1, py::arg("lambda_h") = 1e-3, py::arg("max_iter") = 1000,
      py::arg("init_seed") = 0, py::arg("boost") = py::none(), py::arg("truth") = py::none(),
      py::arg("step_alpha") = 1e-1, py::arg("step_h") = 1e-3, py::arg("inner_steps") = 5);

  m.def(
      "config",
      [](const std::string& preset, const py::dict& overrides) {
        return to_key_values(make_config(preset, overrides));
      },
      py::arg("preset") = "desk", py::arg("overrides") = py::dict());

  m.def(
      "run_grid_search",
      [](const std::string& preset, const py::dict& overrides) {
        auto cfg = make_config(preset, overrides);
        GridResult r;
        {
          py::gil_scoped_release release;
          r = run_grid_search(cfg);
        }
        py::list rows;
        for (const auto& row : r.rows) {
          py::dict d;
          d["method"] = row.method;
          d["boost"] = row.boost;
          d["lambda_alpha"] = row.lambda_alpha;
          d["lambda_h"] = row.lambda_h;
          d["mean_mse_x"] = row.mean_mse_x;
          d["mean_mse_h"] = row.mean_mse_h;
          rows.append(d);
        }
        py::dict out;
        out["lmmse_mse_x"] = r.lmmse_mse_x;
        out["lmmse_mse_h"] = r.lmmse_mse_h;
        out["rows"] = rows;
        return out;
      },
      py::arg("preset") = "desk", py::arg("overrides") = py::dict());

  m.def(
      "run_empirical_convergence",
      [](const std::string& preset, const py::dict& overrides) {
        auto cfg = make_config(preset, overrides);
        EmpConvResult r;
        {
          py::gil_scoped_release release;
          r = run_empirical_convergence(cfg);
        }
        py::dict out;
        out["n_samples"] = r.n_samples;
        out["mean_x"] = r.mean_x;
        out["mean_h"] = r.mean_h;
        out["slope_x"] = r.slope_x;
        out["slope_h"] = r.slope_h;
        return out;
      },
      py::arg("preset") = "desk", py::arg("overrides") = py::dict());
}
