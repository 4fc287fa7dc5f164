#pragma once

// MAP alternating minimization over (alpha, kernel) with the two kernel
// models: the Gaussian spread sigma under its Gamma prior, or a free kernel on
// the simplex with a smoothness penalty.

#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "bdecon/conv.hpp"
#include "bdecon/lmmse.hpp"
#include "bdecon/priors.hpp"

namespace bdecon {

enum class MapVariant { Sigma, KernelSmooth };

const char* to_string(MapVariant v) noexcept;

struct PriorInit {};
struct BoostedInit {
  LmmseEstimate estimate;
};
using MapInit = std::variant<PriorInit, BoostedInit>;

struct MapConfig {
  MapVariant variant = MapVariant::Sigma;
  double lambda_alpha = 0.1;
  double lambda_h = 1e-3;
  double step_alpha = 1e-1;
  double step_h = 1e-3;
  int inner_steps = 5;
  int max_iter = 1000;
  double sigma_floor = 1e-3;
  /// Stop early once the relative change of alpha falls below this; 0 disables.
  double rel_tol = 0.0;
  /// Seeds the prior draw of alpha^0 under PriorInit.
  std::uint64_t init_seed = 0;
  MapInit init = PriorInit{};

  void validate() const;
};

struct TraceRecord {
  int iter = 0;
  double mse_x = 0.0;
  double mse_h = 0.0;
  double objective = 0.0;
};

struct GroundTruth {
  Image x;
  Grid h;
};

struct MapResult {
  Vector alpha;
  Image x_hat;
  Kernel h_hat;
  double sigma = 0.0;  // Sigma variant only
  int iterations = 0;
  /// One record per outer iteration, taken at the start of that iteration
  /// (record 0 is the initialization). Empty without ground truth.
  std::vector<TraceRecord> trace;
};

/// (1 / len) * ||u - v||^2.
double mse(std::span<const double> u, std::span<const double> v);
double mse(const Grid& u, const Grid& v);

/// ||h * D^T alpha - y||^2.
double data_term(const Vector& alpha, const Grid& h, const Image& y, const Dictionary& dict);
/// ||grad h||^2 with forward differences and replicate (Neumann) boundary.
double smoothness(const Grid& h);
Grid smoothness_gradient(const Grid& h);
/// beta * sigma - (a - 1) * log(sigma).
double gamma_penalty(double sigma, const KernelPrior& prior);

double objective_sigma(const Vector& alpha, double sigma, const Image& y, const Dictionary& dict,
                       const KernelPrior& prior, double lambda_alpha, double lambda_h);
double objective_kernel(const Vector& alpha, const Grid& h, const Image& y, const Dictionary& dict,
                        double lambda_alpha, double lambda_h);

/// Proximal map of tau * ||. - mu||_1.
Vector soft_threshold_shifted(const Vector& v, const Vector& mu, double tau);

/// Gradient of the data term with respect to alpha.
Vector grad_alpha(const Vector& alpha, const Grid& h, const Image& y, const Dictionary& dict);
/// Gradient of the data term with respect to the d x d kernel grid.
Grid grad_h_data(const Vector& alpha, const Grid& h, const Image& y, const Dictionary& dict);
/// Data gradient plus lambda_h times the smoothness gradient.
Grid grad_h_smooth(const Vector& alpha, const Grid& h, const Image& y, const Dictionary& dict, double lambda_h);
double grad_sigma(const Vector& alpha, double sigma, const Image& y, const Dictionary& dict,
                  const KernelPrior& prior, double lambda_h);

/// Euclidean projection onto {u >= 0, sum u = 1}.
Vector project_simplex(const Vector& v);
Grid project_simplex(const Grid& g);

/// Golden-section search of ||h_hat - gaussian_kernel(sigma)||^2 over [lo, hi]
/// down to bracket width 1e-5.
double fit_sigma(const Grid& h_hat, double lo, double hi);

MapResult map_solve(const Image& y, const SignalPrior& signal, const KernelPrior& kernel, const MapConfig& cfg,
                    const std::optional<GroundTruth>& truth = std::nullopt);

}  // namespace bdecon
