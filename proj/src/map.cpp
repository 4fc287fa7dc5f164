#include "bdecon/map.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <numeric>
#include <string>

#include "bdecon/error.hpp"

namespace bdecon {

using detail::require;

const char* to_string(MapVariant v) noexcept { return v == MapVariant::Sigma ? "map_sigma" : "map_h"; }

void MapConfig::validate() const {
  require(lambda_alpha >= 0.0 && lambda_h >= 0.0, "MapConfig: lambdas must be nonnegative");
  require(step_alpha > 0.0 && step_h >= 0.0, "MapConfig: step_alpha must be positive and step_h nonnegative");
  require(inner_steps >= 1, "MapConfig: inner_steps must be at least one");
  require(max_iter >= 1, "MapConfig: max_iter must be at least one");
  require(sigma_floor > 0.0, "MapConfig: sigma_floor must be positive");
  require(rel_tol >= 0.0, "MapConfig: rel_tol must be nonnegative");
}

double mse(std::span<const double> u, std::span<const double> v) {
  require(u.size() == v.size(), "mse: length mismatch");
  require(!u.empty(), "mse: empty input");
  double s = 0.0;
  for (size_t i = 0; i < u.size(); ++i) {
    const double e = u[i] - v[i];
    s += e * e;
  }
  return s / static_cast<double>(u.size());
}

double mse(const Grid& u, const Grid& v) {
  require(u.rows() == v.rows() && u.cols() == v.cols(), "mse: shape mismatch");
  return mse(std::span<const double>(u.data(), u.size()), std::span<const double>(v.data(), v.size()));
}

namespace {

Image residual(const Vector& alpha, const CirculantOperator& H, const Image& y, const Dictionary& dict) {
  return H.apply(synthesize(dict, alpha)) - y;
}

void require_image(const Image& y, const Dictionary& dict) {
  require(y.rows() == dict.n && y.cols() == dict.n, "observation side must equal dictionary n");
}

}  // namespace

double data_term(const Vector& alpha, const Grid& h, const Image& y, const Dictionary& dict) {
  require_image(y, dict);
  return residual(alpha, CirculantOperator(embed_kernel(h, dict.n)), y, dict).squaredNorm();
}

double smoothness(const Grid& h) {
  const Grid dv = h.bottomRows(h.rows() - 1) - h.topRows(h.rows() - 1);
  const Grid dh = h.rightCols(h.cols() - 1) - h.leftCols(h.cols() - 1);
  return dv.squaredNorm() + dh.squaredNorm();
}

Grid smoothness_gradient(const Grid& h) {
  Grid g = Grid::Zero(h.rows(), h.cols());
  for (Eigen::Index i = 0; i + 1 < h.rows(); ++i)
    for (Eigen::Index j = 0; j < h.cols(); ++j) {
      const double delta = h(i + 1, j) - h(i, j);
      g(i + 1, j) += 2.0 * delta;
      g(i, j) -= 2.0 * delta;
    }
  for (Eigen::Index i = 0; i < h.rows(); ++i)
    for (Eigen::Index j = 0; j + 1 < h.cols(); ++j) {
      const double delta = h(i, j + 1) - h(i, j);
      g(i, j + 1) += 2.0 * delta;
      g(i, j) -= 2.0 * delta;
    }
  return g;
}

double gamma_penalty(double sigma, const KernelPrior& prior) {
  require(sigma > 0.0, "gamma_penalty: sigma must be positive");
  return prior.beta * sigma - (prior.a - 1.0) * std::log(sigma);
}

double objective_sigma(const Vector& alpha, double sigma, const Image& y, const Dictionary& dict,
                       const KernelPrior& prior, double lambda_alpha, double lambda_h) {
  require(sigma > 0.0, "objective: sigma must be positive");
  const Kernel h = gaussian_kernel(sigma, prior.d);
  return data_term(alpha, h.weights(), y, dict) + lambda_alpha * (alpha - dict.mu_alpha).lpNorm<1>() +
         lambda_h * gamma_penalty(sigma, prior);
}

double objective_kernel(const Vector& alpha, const Grid& h, const Image& y, const Dictionary& dict,
                        double lambda_alpha, double lambda_h) {
  return data_term(alpha, h, y, dict) + lambda_alpha * (alpha - dict.mu_alpha).lpNorm<1>() +
         lambda_h * smoothness(h);
}

Vector soft_threshold_shifted(const Vector& v, const Vector& mu, double tau) {
  require(v.size() == mu.size(), "soft_threshold_shifted: length mismatch");
  require(tau >= 0.0, "soft_threshold_shifted: tau must be nonnegative");
  Vector out(v.size());
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const double u = v(i) - mu(i);
    out(i) = std::abs(u) <= tau ? mu(i) : v(i) - std::copysign(tau, u);
  }
  return out;
}

Vector grad_alpha(const Vector& alpha, const Grid& h, const Image& y, const Dictionary& dict) {
  require_image(y, dict);
  const CirculantOperator H(embed_kernel(h, dict.n));
  return 2.0 * analyze(dict, H.apply_adjoint(residual(alpha, H, y, dict)));
}

Grid grad_h_data(const Vector& alpha, const Grid& h, const Image& y, const Dictionary& dict) {
  require_image(y, dict);
  const Image x = synthesize(dict, alpha);
  const Image r = CirculantOperator(embed_kernel(h, dict.n)).apply(x) - y;
  return 2.0 * restrict_to_kernel(CirculantOperator(x).apply_adjoint(r), static_cast<int>(h.rows()));
}

Grid grad_h_smooth(const Vector& alpha, const Grid& h, const Image& y, const Dictionary& dict, double lambda_h) {
  Grid g = grad_h_data(alpha, h, y, dict);
  if (lambda_h != 0.0) g += lambda_h * smoothness_gradient(h);
  return g;
}

double grad_sigma(const Vector& alpha, double sigma, const Image& y, const Dictionary& dict,
                  const KernelPrior& prior, double lambda_h) {
  require(sigma > 0.0, "grad_sigma: sigma must be positive");
  const Grid h = gaussian_kernel(sigma, prior.d).weights();
  const Grid gh = grad_h_data(alpha, h, y, dict);
  return (gh.array() * dgaussian_dsigma(sigma, prior.d).array()).sum() +
         lambda_h * (prior.beta - (prior.a - 1.0) / sigma);
}

Vector project_simplex(const Vector& v) {
  require(v.size() >= 1, "project_simplex: empty input");
  require(v.allFinite(), "project_simplex: non-finite input");
  const auto D = v.size();
  if (v.minCoeff() >= 0.0 && std::abs(v.sum() - 1.0) <= 4.0 * D * 1e-16) return v;
  std::vector<double> u(v.data(), v.data() + D);
  std::sort(u.begin(), u.end(), std::greater<>());
  double cumsum = 0.0;
  double theta = 0.0;
  for (Eigen::Index j = 0; j < D; ++j) {
    cumsum += u[j];
    const double t = (cumsum - 1.0) / static_cast<double>(j + 1);
    if (u[j] - t > 0.0) theta = t;
  }
  return (v.array() - theta).max(0.0).matrix();
}

Grid project_simplex(const Grid& g) {
  const Vector p = project_simplex(Vector(Eigen::Map<const Vector>(g.data(), g.size())));
  return Eigen::Map<const Grid>(p.data(), g.rows(), g.cols());
}

double fit_sigma(const Grid& h_hat, double lo, double hi) {
  require(lo > 0.0 && hi > lo, "fit_sigma: bounds must satisfy 0 < lo < hi");
  require(h_hat.rows() == h_hat.cols() && h_hat.rows() % 2 == 1, "fit_sigma: kernel grid must be square and odd");
  const int d = static_cast<int>(h_hat.rows());
  auto f = [&](double s) { return (h_hat - gaussian_kernel(s, d).weights()).squaredNorm(); };
  const double invphi = (std::sqrt(5.0) - 1.0) / 2.0;
  double a = lo, b = hi;
  double c = b - invphi * (b - a);
  double e = a + invphi * (b - a);
  double fc = f(c), fe = f(e);
  while (b - a > 1e-5) {
    if (fc <= fe) {
      b = e;
      e = c;
      fe = fc;
      c = b - invphi * (b - a);
      fc = f(c);
    } else {
      a = c;
      c = e;
      fc = fe;
      e = a + invphi * (b - a);
      fe = f(e);
    }
  }
  // The interval endpoints win when the objective is monotone on [lo, hi].
  double best = 0.5 * (a + b);
  double fbest = f(best);
  for (double s : {lo, hi}) {
    const double fs = f(s);
    if (fs < fbest) {
      best = s;
      fbest = fs;
    }
  }
  return best;
}

MapResult map_solve(const Image& y, const SignalPrior& signal, const KernelPrior& kernel, const MapConfig& cfg,
                    const std::optional<GroundTruth>& truth) {
  cfg.validate();
  validate(kernel);
  const Dictionary& dict = signal.dict;
  require_image(y, dict);
  const int n = dict.n;
  const int d = kernel.d;
  require(d <= n, "map_solve: kernel side exceeds image side");
  const bool sigma_variant = cfg.variant == MapVariant::Sigma;

  Vector alpha;
  double sigma = kernel.a / kernel.beta;
  Grid h;
  if (const auto* boost = std::get_if<BoostedInit>(&cfg.init)) {
    require(boost->estimate.x_hat.rows() == n && boost->estimate.h_hat.rows() == d,
            "map_solve: boosted initialization has the wrong shape");
    alpha = analyze(dict, boost->estimate.x_hat);
    if (sigma_variant) {
      sigma = fit_sigma(boost->estimate.h_hat, cfg.sigma_floor, 2.0 * d);
    } else {
      h = project_simplex(boost->estimate.h_hat);
    }
  } else {
    auto rng = RandomStream(cfg.init_seed);
    alpha = sample_alpha(signal, rng);
  }
  if (sigma_variant) {
    sigma = std::max(sigma, cfg.sigma_floor);
    h = gaussian_kernel(sigma, d).weights();
  } else if (h.size() == 0) {
    h = gaussian_kernel(sigma, d).weights();
  }

  auto current_objective = [&] {
    return sigma_variant ? objective_sigma(alpha, sigma, y, dict, kernel, cfg.lambda_alpha, cfg.lambda_h)
                         : objective_kernel(alpha, h, y, dict, cfg.lambda_alpha, cfg.lambda_h);
  };

  MapResult result;
  if (truth) result.trace.reserve(cfg.max_iter);
  const double tau = cfg.step_alpha * cfg.lambda_alpha;
  int iter = 0;
  for (; iter < cfg.max_iter; ++iter) {
    if (truth) {
      TraceRecord rec{iter, mse(synthesize(dict, alpha), truth->x), mse(h, truth->h), current_objective()};
      if (!std::isfinite(rec.objective) || !std::isfinite(rec.mse_x)) {
        throw Divergence(iter, "map_solve diverged at iteration " + std::to_string(iter));
      }
      result.trace.push_back(rec);
    }
    const Vector alpha_prev = alpha;
    const CirculantOperator H(embed_kernel(h, n));
    for (int s = 0; s < cfg.inner_steps; ++s) {
      const Vector g = 2.0 * analyze(dict, H.apply_adjoint(residual(alpha, H, y, dict)));
      alpha = soft_threshold_shifted(alpha - cfg.step_alpha * g, dict.mu_alpha, tau);
    }

    const Image x = synthesize(dict, alpha);
    const Image r = H.apply(x) - y;
    const Grid gh = 2.0 * restrict_to_kernel(CirculantOperator(x).apply_adjoint(r), d);
    if (sigma_variant) {
      const double gs = (gh.array() * dgaussian_dsigma(sigma, d).array()).sum() +
                        cfg.lambda_h * (kernel.beta - (kernel.a - 1.0) / sigma);
      const double next = sigma - cfg.step_h * gs;
      if (!std::isfinite(next)) throw Divergence(iter, "map_solve: sigma diverged at iteration " + std::to_string(iter));
      sigma = std::max(next, cfg.sigma_floor);
      h = gaussian_kernel(sigma, d).weights();
    } else {
      Grid step = gh;
      if (cfg.lambda_h != 0.0) step += cfg.lambda_h * smoothness_gradient(h);
      const Grid moved = h - cfg.step_h * step;
      if (!moved.allFinite()) throw Divergence(iter, "map_solve: kernel diverged at iteration " + std::to_string(iter));
      h = project_simplex(moved);
    }
    if (!alpha.allFinite()) throw Divergence(iter, "map_solve: alpha diverged at iteration " + std::to_string(iter));

    if (cfg.rel_tol > 0.0) {
      const double change = (alpha - alpha_prev).norm() / std::max(alpha_prev.norm(), 1e-300);
      if (change < cfg.rel_tol) {
        ++iter;
        break;
      }
    }
  }

  result.alpha = alpha;
  result.x_hat = synthesize(dict, alpha);
  result.h_hat = Kernel::from_weights(h, 1e-9);
  result.sigma = sigma_variant ? sigma : 0.0;
  result.iterations = iter;
  return result;
}

}  // namespace bdecon
