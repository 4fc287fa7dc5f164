// bdecon: blind deconvolution benchmark driver.
//
//   bdecon gen      --desk --out data/
//   bdecon grid     --config paper.cfg --seed 7 --out results/
//   bdecon map      --dataset data/ --instance 0 --variant sigma --boost \
//                   --lambda-alpha 0.1 --lambda-h 0.001 --out run/

#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "bdecon/error.hpp"
#include "bdecon/harness.hpp"
#include "bdecon/lmmse.hpp"
#include "bdecon/map.hpp"
#include "bdecon/priors.hpp"
#include "blob_cli.hpp"

namespace fs = std::filesystem;
using namespace bdecon;

namespace {

enum ExitCode : int {
  kOk = 0,
  kInternal = 1,
  kUsage = 2,
  kConfig = 3,
  kIo = 4,
  kNumerical = 5,
  kInvalidArgument = 6,
};

struct CommonOptions {
  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> workers;
  std::string out = ".";
  bool desk = false;
  bool paper = false;
  std::string dataset;
};

void add_common(CLI::App* sub, CommonOptions& o) {
  sub->add_option("--config", o.config_path, "flat key = value experiment config");
  sub->add_option("--seed", o.seed, "base seed (overrides config)");
  sub->add_option("--workers", o.workers, "worker threads, 0 = all cores (overrides config)");
  sub->add_option("--out", o.out, "output directory");
  auto* desk = sub->add_flag("--desk", o.desk, "fast preset: n=16, K=128, d=7, 10 instances");
  auto* paper = sub->add_flag("--paper", o.paper, "full preset: n=32, K=512, d=15, 50 instances");
  desk->excludes(paper);
  sub->add_option("--dataset", o.dataset, "load instances from a saved dataset directory");
}

ExperimentConfig resolve_config(const CommonOptions& o) {
  ExperimentConfig cfg = o.paper ? ExperimentConfig::paper() : ExperimentConfig::desk();
  if (!o.config_path.empty()) {
    if (!fs::exists(o.config_path)) throw IoError("config file not found: " + o.config_path);
    apply_config(cfg, read_config_file(o.config_path), !(o.desk || o.paper));
  }
  if (o.seed) cfg.base_seed = *o.seed;
  if (o.workers) cfg.workers = *o.workers;
  cfg.validate();
  return cfg;
}

/// Problem dimensions and priors come from the dataset when one is given.
void adopt_dataset(ExperimentConfig& cfg, const Dataset& ds) {
  cfg.n = ds.signal.dict.n;
  cfg.K = ds.signal.dict.size();
  cfg.b = ds.signal.b;
  cfg.d = ds.kernel.d;
  cfg.a = ds.kernel.a;
  cfg.beta = ds.kernel.beta;
  cfg.c_eps = ds.noise.c_eps;
  cfg.dataset_size = ds.count();
  cfg.base_seed = ds.base_seed;
}

std::optional<Dataset> maybe_load(const CommonOptions& o, ExperimentConfig& cfg) {
  if (o.dataset.empty()) return std::nullopt;
  Dataset ds = load_dataset(o.dataset);
  adopt_dataset(cfg, ds);
  return ds;
}

void ensure_dir(const fs::path& p) {
  std::error_code ec;
  fs::create_directories(p, ec);
  if (ec) throw IoError("cannot create directory " + p.string() + ": " + ec.message());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Blind deconvolution benchmark: LMMSE and MAP estimators under a synthetic model"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kVersion);

  CommonOptions gen_o, mom_o, lm_o, map_o, grid_o, evo_o, emp_o;
  auto* gen = app.add_subcommand("gen", "generate and save a dataset");
  add_common(gen, gen_o);
  auto* moments = app.add_subcommand("moments", "compute and cache theoretical moments");
  add_common(moments, mom_o);
  auto* lmmse = app.add_subcommand("lmmse", "LMMSE estimate of one instance");
  add_common(lmmse, lm_o);
  auto* map = app.add_subcommand("map", "run one MAP solver on one instance");
  add_common(map, map_o);
  auto* grid = app.add_subcommand("grid", "grid search over (lambda_alpha, lambda_h)");
  add_common(grid, grid_o);
  auto* evolve = app.add_subcommand("evolve", "per-iteration MSE traces");
  add_common(evolve, evo_o);
  auto* empconv = app.add_subcommand("empconv", "empirical vs theoretical LMMSE convergence");
  add_common(empconv, emp_o);

  int lm_instance = 0, map_instance = 0, evo_instance = 0;
  lmmse->add_option("--instance", lm_instance, "instance index");
  map->add_option("--instance", map_instance, "instance index");
  evolve->add_option("--instance", evo_instance, "instance index");
  std::string variant = "sigma";
  bool boost = false;
  double lambda_alpha = 0.1, lambda_h = 1e-3;
  map->add_option("--variant", variant, "sigma | kernel")->check(CLI::IsMember({"sigma", "kernel"}));
  map->add_flag("--boost", boost, "initialize from the LMMSE estimate");
  map->add_option("--lambda-alpha", lambda_alpha, "weight of the l1 coefficient prior");
  map->add_option("--lambda-h", lambda_h, "weight of the kernel prior");
  bool svg = false;
  evolve->add_flag("--svg", svg, "also write SVG plots of the traces");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsage;
  }

  try {
    if (gen->parsed()) {
      auto cfg = resolve_config(gen_o);
      const Dataset ds = make_dataset(cfg);
      save_dataset(ds, gen_o.out);
      std::printf("wrote %d instances to %s\n", ds.count(), gen_o.out.c_str());
    } else if (moments->parsed()) {
      auto cfg = resolve_config(mom_o);
      auto ds = maybe_load(mom_o, cfg);
      const SignalPrior signal = ds ? ds->signal : cfg.signal_prior();
      const auto rule = gamma_quadrature(cfg.a, cfg.beta, cfg.quad_nodes);
      const MomentSet m = theoretical_moments(signal, cfg.kernel_prior(), cfg.noise_model(), rule, cfg.workers);
      const auto key = moment_cache_key(signal, cfg.kernel_prior(), cfg.noise_model(), cfg.quad_nodes, cfg.ridge);
      save_moments(m, mom_o.out, key);
      std::printf("wrote theoretical moments (key %s) to %s\n", key.c_str(), mom_o.out.c_str());
    } else if (lmmse->parsed()) {
      auto cfg = resolve_config(lm_o);
      auto ds = maybe_load(lm_o, cfg);
      if (!ds) ds = make_dataset(cfg);
      if (lm_instance < 0 || lm_instance >= ds->count()) throw InvalidArgument("instance index out of range");
      const auto rule = gamma_quadrature(cfg.a, cfg.beta, cfg.quad_nodes);
      const auto m = theoretical_moments(ds->signal, ds->kernel, ds->noise, rule, cfg.workers);
      const auto& inst = ds->instances[lm_instance];
      const auto est = lmmse_estimate(m, inst.y, cfg.ridge);
      const fs::path out(lm_o.out);
      ensure_dir(out);
      cli::write_grid(out / "x_hat.f64", est.x_hat);
      cli::write_grid(out / "h_hat.f64", est.h_hat);
      write_run_manifest(cfg, "lmmse", out / "manifest.json");
      std::printf("mse_x=%.10g mse_h=%.10g sqerr_x=%.10g sqerr_h=%.10g\n", mse(est.x_hat, inst.x),
                  mse(est.h_hat, inst.h.weights()), (est.x_hat - inst.x).squaredNorm(),
                  (est.h_hat - inst.h.weights()).squaredNorm());
    } else if (map->parsed()) {
      auto cfg = resolve_config(map_o);
      auto ds = maybe_load(map_o, cfg);
      if (!ds) ds = make_dataset(cfg);
      if (map_instance < 0 || map_instance >= ds->count()) throw InvalidArgument("instance index out of range");
      const auto& inst = ds->instances[map_instance];
      MapConfig mc = cfg.map_config(variant == "sigma" ? MapVariant::Sigma : MapVariant::KernelSmooth, lambda_alpha,
                                    lambda_h);
      mc.init_seed = map_init_seed(cfg, map_instance);
      if (boost) {
        const auto rule = gamma_quadrature(cfg.a, cfg.beta, cfg.quad_nodes);
        const auto m = theoretical_moments(ds->signal, ds->kernel, ds->noise, rule, cfg.workers);
        mc.init = BoostedInit{lmmse_estimate(m, inst.y, cfg.ridge)};
      }
      const auto r = map_solve(inst.y, ds->signal, ds->kernel, mc, GroundTruth{inst.x, inst.h.weights()});
      const fs::path out(map_o.out);
      ensure_dir(out);
      cli::write_grid(out / "x_hat.f64", r.x_hat);
      cli::write_grid(out / "h_hat.f64", r.h_hat.weights());
      write_trace_csv({TraceSet{"", to_string(mc.variant), boost, lambda_alpha, lambda_h, r.trace}}, out / "trace.csv");
      write_run_manifest(cfg, "map", out / "manifest.json");
      std::printf("mse_x=%.10g mse_h=%.10g sqerr_x=%.10g sqerr_h=%.10g iterations=%d\n", mse(r.x_hat, inst.x),
                  mse(r.h_hat.weights(), inst.h.weights()), (r.x_hat - inst.x).squaredNorm(),
                  (r.h_hat.weights() - inst.h.weights()).squaredNorm(), r.iterations);
    } else if (grid->parsed()) {
      auto cfg = resolve_config(grid_o);
      auto ds = maybe_load(grid_o, cfg);
      const auto r = run_grid_search(cfg, ds ? &*ds : nullptr);
      const fs::path out(grid_o.out);
      ensure_dir(out);
      write_grid_csv(r, out / "grid.csv");
      write_run_manifest(cfg, "grid", out / "manifest.json");
      const double N = static_cast<double>(cfg.n) * cfg.n;
      std::printf("lmmse mean mse_x=%.6g (mean sqerr_x=%.6g); wrote %zu grid rows to %s\n", r.lmmse_mse_x,
                  r.lmmse_mse_x * N, r.rows.size(), (out / "grid.csv").c_str());
    } else if (evolve->parsed()) {
      auto cfg = resolve_config(evo_o);
      auto ds = maybe_load(evo_o, cfg);
      const auto r = run_evolution(cfg, evo_instance, default_parameter_sets(), ds ? &*ds : nullptr);
      const fs::path out(evo_o.out);
      ensure_dir(out);
      write_trace_csv(r.traces, out / "trace.csv");
      if (svg) {
        write_trace_svg(r.traces, "mse_x", r.lmmse_mse_x, out / "trace_mse_x.svg");
        write_trace_svg(r.traces, "mse_h", r.lmmse_mse_h, out / "trace_mse_h.svg");
      }
      write_run_manifest(cfg, "evolve", out / "manifest.json");
      std::printf("wrote %zu traces to %s\n", r.traces.size(), (out / "trace.csv").c_str());
    } else if (empconv->parsed()) {
      auto cfg = resolve_config(emp_o);
      const auto r = run_empirical_convergence(cfg);
      const fs::path out(emp_o.out);
      ensure_dir(out);
      write_empconv_csv(r, out / "empconv.csv");
      write_run_manifest(cfg, "empconv", out / "manifest.json");
      std::printf("slope_x=%.4f slope_h=%.4f\n", r.slope_x, r.slope_h);
    }
  } catch (const ConfigError& e) {
    std::fprintf(stderr, "bdecon: %s\n", e.what());
    return kConfig;
  } catch (const IoError& e) {
    std::fprintf(stderr, "bdecon: %s\n", e.what());
    return kIo;
  } catch (const MalformedFile& e) {
    std::fprintf(stderr, "bdecon: %s\n", e.what());
    return kIo;
  } catch (const VersionMismatch& e) {
    std::fprintf(stderr, "bdecon: %s\n", e.what());
    return kIo;
  } catch (const SingularMoments& e) {
    std::fprintf(stderr, "bdecon: %s\n", e.what());
    return kNumerical;
  } catch (const Divergence& e) {
    std::fprintf(stderr, "bdecon: %s\n", e.what());
    return kNumerical;
  } catch (const InvalidArgument& e) {
    std::fprintf(stderr, "bdecon: %s\n", e.what());
    return kInvalidArgument;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bdecon: internal error: %s\n", e.what());
    return kInternal;
  }
  return kOk;
}
