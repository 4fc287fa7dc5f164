#pragma once

// Experiment drivers: grid search over (lambda_alpha, lambda_h), iteration
// traces, and empirical-vs-theoretical LMMSE convergence.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "bdecon/lmmse.hpp"
#include "bdecon/map.hpp"
#include "bdecon/priors.hpp"

namespace bdecon {

inline constexpr const char* kVersion = "0.1.0";

struct ExperimentConfig {
  // problem
  int n = 16;
  int K = 128;
  double b = 0.5;
  int d = 7;
  double a = 2.0;
  double beta = 1.0;
  double c_eps = 9e-4;
  int dataset_size = 10;
  std::uint64_t base_seed = 7;
  // grid
  std::vector<double> lambda_alpha_grid;
  std::vector<double> lambda_h_grid;
  std::vector<std::pair<double, double>> extra_cells;
  // LMMSE
  int quad_nodes = 64;
  double ridge = 0.0;
  // MAP solver
  double step_alpha = 1e-1;
  double step_h = 1e-3;
  int inner_steps = 5;
  int max_iter = 300;
  double sigma_floor = 1e-3;
  double rel_tol = 0.0;
  // empirical convergence
  std::vector<int> n_samples_list;
  int repeats = 10;
  int eval_size = 20;
  // execution
  int workers = 0;

  /// n=16, K=128, d=7, 10 instances, 300 iterations, 4 x 3 grid.
  static ExperimentConfig desk();
  /// n=32, K=512, d=15, 50 instances, 1000 iterations, 5 x 4 grid.
  static ExperimentConfig paper();

  void validate() const;

  SignalPrior signal_prior() const;
  KernelPrior kernel_prior() const { return {d, a, beta}; }
  NoiseModel noise_model() const { return {c_eps}; }
  MapConfig map_config(MapVariant variant, double lambda_alpha, double lambda_h) const;
  /// Product grid followed by the extra cells not already in it.
  std::vector<std::pair<double, double>> cells() const;
};

/// Flat `key = value` configuration; lists are comma separated, extra cells
/// are written `la:lh`. '#' starts a comment.
std::map<std::string, std::string> parse_config_text(const std::string& text);
std::map<std::string, std::string> read_config_file(const std::filesystem::path& path);
/// Applies key/value pairs onto `cfg`. Unknown keys are rejected; with
/// `require_all` every field must be present.
void apply_config(ExperimentConfig& cfg, const std::map<std::string, std::string>& kv, bool require_all);
std::map<std::string, std::string> to_key_values(const ExperimentConfig& cfg);
const std::vector<std::string>& config_keys();

/// Seed of an auxiliary stream family (dictionary, MAP init, held-out sets).
std::uint64_t derive_seed(std::uint64_t base_seed, std::uint64_t tag, std::uint64_t a = 0, std::uint64_t b = 0);

/// Dictionary, priors and the dataset described by `cfg`.
Dataset make_dataset(const ExperimentConfig& cfg);
/// Seed of the alpha^0 prior draw for instance i; shared by all cells and methods.
std::uint64_t map_init_seed(const ExperimentConfig& cfg, int instance);

struct Method {
  MapVariant variant;
  bool boost;
};
const std::vector<Method>& all_methods();

struct GridRow {
  std::string method;  // map_sigma | map_h
  bool boost = false;
  double lambda_alpha = 0.0;
  double lambda_h = 0.0;
  double mean_mse_x = 0.0;
  double mean_mse_h = 0.0;
};

struct GridResult {
  double lmmse_mse_x = 0.0;
  double lmmse_mse_h = 0.0;
  std::vector<GridRow> rows;

  const GridRow* find(const std::string& method, bool boost, double lambda_alpha, double lambda_h) const;
  /// Row with the smallest mean_mse_x for a method.
  const GridRow& best(const std::string& method, bool boost) const;
};

/// Runs the four MAP methods on every cell and instance. Uses `dataset` when
/// given, otherwise generates it from `cfg`.
GridResult run_grid_search(const ExperimentConfig& cfg, const Dataset* dataset = nullptr);
void write_grid_csv(const GridResult& r, const std::filesystem::path& path);

struct ParameterSet {
  std::string label;
  double sigma_lambda_alpha, sigma_lambda_h;
  double kernel_lambda_alpha, kernel_lambda_h;
};
/// The tuned (0.1, 0.001) set and the untuned sets (1e-4, 1e-3) / (1e-3, 1e-3).
std::vector<ParameterSet> default_parameter_sets();

struct TraceSet {
  std::string label;
  std::string method;
  bool boost = false;
  double lambda_alpha = 0.0;
  double lambda_h = 0.0;
  std::vector<TraceRecord> trace;
};

struct EvolutionResult {
  int instance = 0;
  double lmmse_mse_x = 0.0;
  double lmmse_mse_h = 0.0;
  std::vector<TraceSet> traces;
};

EvolutionResult run_evolution(const ExperimentConfig& cfg, int instance_index,
                              const std::vector<ParameterSet>& parameter_sets, const Dataset* dataset = nullptr);
void write_trace_csv(const std::vector<TraceSet>& traces, const std::filesystem::path& path);
/// Line plot of one metric ("mse_x" or "mse_h") against iteration, log scale,
/// with a horizontal reference line.
void write_trace_svg(const std::vector<TraceSet>& traces, const std::string& metric, double reference,
                     const std::filesystem::path& path);

struct EmpConvRow {
  std::string target;  // x | h
  int n_samples = 0;
  int run = 0;
  double mse_vs_theoretical = 0.0;
};

struct EmpConvResult {
  std::vector<EmpConvRow> rows;
  std::vector<int> n_samples;
  std::vector<double> mean_x;
  std::vector<double> mean_h;
  double slope_x = 0.0;
  double slope_h = 0.0;
};

EmpConvResult run_empirical_convergence(const ExperimentConfig& cfg);
/// Per-run rows followed by one `mean` row per (target, n_samples).
void write_empconv_csv(const EmpConvResult& r, const std::filesystem::path& path);
/// Least-squares slope of log(y) against log(x) over the upper half of the points.
double loglog_slope_upper_half(const std::vector<int>& x, const std::vector<double>& y);

/// Resolved configuration, seed and version.
void write_run_manifest(const ExperimentConfig& cfg, const std::string& command, const std::filesystem::path& path);

}  // namespace bdecon
