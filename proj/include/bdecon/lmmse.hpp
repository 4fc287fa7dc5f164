#pragma once

#include <cstdint>
#include <filesystem>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Cholesky>

#include "bdecon/conv.hpp"
#include "bdecon/priors.hpp"

namespace bdecon {

/// Discrete approximation of the Gamma(a, beta) law of the kernel spread:
/// E[f(sigma)] ~= sum_k weights[k] * f(nodes[k]).
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;

  int size() const noexcept { return static_cast<int>(nodes.size()); }
};

/// Gauss-Legendre nodes in log(sigma) on [q(1e-8), q(1 - 1e-8)] of the Gamma
/// law, split into two panels at the spread below which every kernel is a
/// Dirac. Weights are Legendre weight times Gamma density times sigma,
/// renormalized to one.
QuadratureRule gamma_quadrature(double a, double beta, int M);

/// Gauss-Legendre nodes and weights on [-1, 1].
void gauss_legendre(int M, std::vector<double>& nodes, std::vector<double>& weights);

enum class MomentKind { Theoretical, Empirical };

/// First and second moments of (x, h, y). Vectors are flattened row-major
/// grids: x and y have N = n^2 entries, h has D = d^2 entries.
struct MomentSet {
  int n = 0;
  int d = 0;
  MomentKind kind = MomentKind::Theoretical;
  int n_samples = 0;  // empirical only

  Vector mean_x;
  Vector mean_h;
  Vector mean_y;
  Eigen::MatrixXd C_xy;  // N x N
  Eigen::MatrixXd C_hy;  // D x N
  Eigen::MatrixXd C_yy;  // N x N

  // Theoretical moments keep the generating model; C_xx = 2 b^2 D^T D is
  // never formed densely.
  SignalPrior signal;
  double c_eps = 0.0;
};

/// `workers` parallelizes the per-node kernel moments; the result does not depend on it.
MomentSet theoretical_moments(const SignalPrior& signal, const KernelPrior& kernel, const NoiseModel& noise,
                              const QuadratureRule& rule, int workers = 1);

/// Sample means and unbiased (divisor N_samples - 1) covariances over the
/// first `n_samples` instances.
MomentSet empirical_moments(std::span<const ProblemInstance> instances, int n_samples);
MomentSet empirical_moments(const Dataset& ds, int n_samples);

/// 0 for theoretical moments; 1e-6 * trace(C_yy) / N for empirical moments
/// whose sample count does not exceed N (centered rank is at most N_samples - 1).
double default_ridge(const MomentSet& m);

struct LmmseEstimate {
  Image x_hat;
  Grid h_hat;  // d x d, not necessarily on the simplex
};

/// Closed-form blind LMMSE estimator with a cached Cholesky factor of
/// C_yy + ridge * I.
class LmmseEstimator {
 public:
  LmmseEstimator(std::shared_ptr<const MomentSet> moments, double ridge);

  LmmseEstimate estimate(const Image& y) const;
  const MomentSet& moments() const noexcept { return *m_; }
  double ridge() const noexcept { return ridge_; }

 private:
  std::shared_ptr<const MomentSet> m_;
  double ridge_;
  Eigen::LLT<Eigen::MatrixXd> llt_;
};

LmmseEstimate lmmse_estimate(const MomentSet& m, const Image& y, double ridge);

/// Relative residual of the normal equations of
///   min_x ||E[h] * x - y||^2_{C_p^-1} + ||x - E[x]||^2_{C_xx^+}
/// over x - E[x] in the dictionary range, evaluated at est.x_hat.
double tikhonov_residual(const MomentSet& m, const LmmseEstimate& est, const Image& y);

/// Hex digest identifying a theoretical moment computation.
std::string moment_cache_key(const SignalPrior& signal, const KernelPrior& kernel, const NoiseModel& noise, int M,
                             double ridge);
/// Same manifest + raw-blob layout as datasets.
void save_moments(const MomentSet& m, const std::filesystem::path& dir, const std::string& key);
MomentSet load_moments(const std::filesystem::path& dir, const std::string& expected_key = {});

}  // namespace bdecon
