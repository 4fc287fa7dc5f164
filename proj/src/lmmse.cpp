#include "bdecon/lmmse.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdio>
#include <numbers>
#include <sstream>
#include <utility>

#include "bdecon/error.hpp"
#include "bdecon/parallel.hpp"
#include "blob.hpp"

namespace bdecon {

using detail::require;
using Eigen::MatrixXcd;
using Eigen::MatrixXd;

void gauss_legendre(int M, std::vector<double>& nodes, std::vector<double>& weights) {
  require(M >= 1, "gauss_legendre: M must be positive");
  nodes.assign(M, 0.0);
  weights.assign(M, 0.0);
  for (int i = 0; i < (M + 1) / 2; ++i) {
    double z = std::cos(std::numbers::pi * (i + 0.75) / (M + 0.5));
    double pp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p1 = 1.0, p2 = 0.0;
      for (int j = 1; j <= M; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = ((2.0 * j - 1.0) * z * p2 - (j - 1.0) * p3) / j;
      }
      pp = M * (z * p1 - p2) / (z * z - 1.0);
      const double z1 = z;
      z = z1 - p1 / pp;
      if (std::abs(z - z1) < 1e-15) break;
    }
    nodes[i] = -z;
    nodes[M - 1 - i] = z;
    weights[i] = weights[M - 1 - i] = 2.0 / ((1.0 - z * z) * pp * pp);
  }
}

QuadratureRule gamma_quadrature(double a, double beta, int M) {
  require(a > 0.0 && beta > 0.0, "gamma_quadrature: a and beta must be positive");
  require(M >= 2, "gamma_quadrature: M must be at least 2");
  const double lo = boost::math::gamma_p_inv(a, 1e-8) / beta;
  const double hi = boost::math::gamma_p_inv(a, 1.0 - 1e-8) / beta;

  // Below kDeltaSpread every Gaussian kernel is a Dirac to double precision
  // (off-center weights under exp(-40)), so the integrands are flat there.
  // That panel gets a quarter of the nodes, the rest resolve the transition.
  // Both panels use Gauss-Legendre in log(sigma).
  constexpr double kDeltaSpread = 0.11180339887498948;  // 1 / sqrt(80)
  std::vector<std::pair<double, double>> panels;
  std::vector<int> counts;
  if (lo < kDeltaSpread && kDeltaSpread < hi) {
    const int m_flat = std::max(1, M / 4);
    panels = {{lo, kDeltaSpread}, {kDeltaSpread, hi}};
    counts = {m_flat, M - m_flat};
  } else {
    panels = {{lo, hi}};
    counts = {M};
  }

  QuadratureRule rule;
  std::vector<double> logw;
  for (size_t p = 0; p < panels.size(); ++p) {
    std::vector<double> t, gw;
    gauss_legendre(counts[p], t, gw);
    const double ta = std::log(panels[p].first), tb = std::log(panels[p].second);
    const double half = 0.5 * (tb - ta);
    for (int k = 0; k < counts[p]; ++k) {
      const double u = ta + half * (t[k] + 1.0);
      const double s = std::exp(u);
      rule.nodes.push_back(s);
      // Unnormalized Gamma log density plus the Jacobian d sigma = sigma du.
      logw.push_back(std::log(gw[k] * half) + a * u - beta * s);
    }
  }
  const double top = *std::max_element(logw.begin(), logw.end());
  double total = 0.0;
  for (double lw : logw) {
    rule.weights.push_back(std::exp(lw - top));
    total += rule.weights.back();
  }
  for (double& w : rule.weights) w /= total;
  return rule;
}

namespace {

Vector flat(const Grid& g) { return Eigen::Map<const Vector>(g.data(), g.size()); }

Image as_image(const Vector& v, int n) { return Eigen::Map<const Image>(v.data(), n, n); }

Image unit_image(int n, Eigen::Index j) {
  Image e = Image::Zero(n, n);
  e.data()[j] = 1.0;
  return e;
}

}  // namespace

MomentSet theoretical_moments(const SignalPrior& signal, const KernelPrior& kernel, const NoiseModel& noise,
                              const QuadratureRule& rule, int workers) {
  validate(signal);
  validate(kernel);
  validate(noise);
  require(rule.size() >= 1 && rule.weights.size() == rule.nodes.size(), "theoretical_moments: empty quadrature rule");
  const Dictionary& dict = signal.dict;
  const int n = dict.n;
  const int d = kernel.d;
  require(d <= n, "theoretical_moments: kernel side exceeds image side");
  const Eigen::Index N = static_cast<Eigen::Index>(n) * n;
  const Eigen::Index D = static_cast<Eigen::Index>(d) * d;
  const int M = rule.size();
  const double cxx = 2.0 * signal.b * signal.b;

  MomentSet m;
  m.n = n;
  m.d = d;
  m.kind = MomentKind::Theoretical;
  m.signal = signal;
  m.c_eps = noise.c_eps;

  const Image mean_x_img = synthesize(dict, dict.mu_alpha);
  m.mean_x = flat(mean_x_img);

  // Per-node kernels and their spectra.
  MatrixXd G(D, M);
  MatrixXcd Lambda(N, M);
  parallel_for(M, workers, [&](int k) {
    const Kernel g = gaussian_kernel(rule.nodes[k], d);
    G.col(k) = flat(g.weights());
    const auto spec = dft2_full(embed_kernel(g, n));
    Lambda.col(k) = Eigen::Map<const Eigen::VectorXcd>(spec.data(), N);
  });
  const Eigen::Map<const Vector> w(rule.weights.data(), M);

  m.mean_h = G * w;
  const MatrixXd C_hh = G * w.asDiagonal() * G.transpose() - m.mean_h * m.mean_h.transpose();
  const Grid mean_h_grid = Eigen::Map<const Grid>(m.mean_h.data(), d, d);

  const CirculantOperator mbar(embed_kernel(mean_h_grid, n));
  m.mean_y = flat(mbar.apply(mean_x_img));

  // C_xy = C_xx Mbar^T, C_hy = C_hh Xbar^T, built column by column.
  const CirculantOperator xbar(mean_x_img);
  m.C_xy.resize(N, N);
  MatrixXd XbarT(D, N);
  for (Eigen::Index j = 0; j < N; ++j) {
    const Image e = unit_image(n, j);
    const Image mt = mbar.apply_adjoint(e);
    m.C_xy.col(j) = cxx * flat(synthesize(dict, analyze(dict, mt)));
    XbarT.col(j) = flat(restrict_to_kernel(xbar.apply_adjoint(e), d));
  }
  m.C_hy = C_hh * XbarT;

  // E[H S_x H^T] = F^* (S^ o W) F with S^ = F S_x F^*, W = sum_k w_k lambda_k lambda_k^H.
  const MatrixXd A = atom_matrix(dict);
  MatrixXd S = cxx * (A.transpose() * A) + m.mean_x * m.mean_x.transpose();
  MatrixXcd T = S.cast<std::complex<double>>();
  S.resize(0, 0);
  unitary_dft2_columns(T, n, -1);
  MatrixXcd Shat = T.adjoint();
  T.resize(0, 0);
  unitary_dft2_columns(Shat, n, -1);
  const MatrixXcd W = Lambda * w.cast<std::complex<double>>().asDiagonal() * Lambda.adjoint();
  Shat.array() *= W.array();
  unitary_dft2_columns(Shat, n, +1);
  MatrixXcd V = Shat.adjoint();
  Shat.resize(0, 0);
  unitary_dft2_columns(V, n, +1);
  MatrixXd Eyy = V.adjoint().real();
  V.resize(0, 0);
  m.C_yy = 0.5 * (Eyy + Eyy.transpose()) - m.mean_y * m.mean_y.transpose();
  m.C_yy.diagonal().array() += noise.c_eps;
  return m;
}

MomentSet empirical_moments(std::span<const ProblemInstance> instances, int n_samples) {
  require(n_samples >= 2, "empirical_moments: at least two samples are required");
  require(static_cast<size_t>(n_samples) <= instances.size(), "empirical_moments: not enough instances");
  const int n = static_cast<int>(instances[0].x.rows());
  const int d = instances[0].h.side();
  const Eigen::Index N = static_cast<Eigen::Index>(n) * n;
  const Eigen::Index D = static_cast<Eigen::Index>(d) * d;
  MatrixXd X(n_samples, N), H(n_samples, D), Y(n_samples, N);
  for (int s = 0; s < n_samples; ++s) {
    const auto& inst = instances[s];
    require(inst.x.rows() == n && inst.h.side() == d, "empirical_moments: inconsistent instance sizes");
    X.row(s) = flat(inst.x).transpose();
    H.row(s) = flat(inst.h.weights()).transpose();
    Y.row(s) = flat(inst.y).transpose();
  }
  MomentSet m;
  m.n = n;
  m.d = d;
  m.kind = MomentKind::Empirical;
  m.n_samples = n_samples;
  // Shift by the first sample before centering; identical samples then give
  // exactly zero deviations.
  auto center = [](MatrixXd& A, Vector& mean) {
    const Eigen::RowVectorXd shift = A.row(0);
    A.rowwise() -= shift;
    const Eigen::RowVectorXd dm = A.colwise().mean();
    A.rowwise() -= dm;
    mean = (shift + dm).transpose();
  };
  center(X, m.mean_x);
  center(H, m.mean_h);
  center(Y, m.mean_y);
  const double inv = 1.0 / (n_samples - 1);
  m.C_xy = inv * (X.transpose() * Y);
  m.C_hy = inv * (H.transpose() * Y);
  m.C_yy = inv * (Y.transpose() * Y);
  return m;
}

MomentSet empirical_moments(const Dataset& ds, int n_samples) {
  return empirical_moments(std::span<const ProblemInstance>(ds.instances), n_samples);
}

double default_ridge(const MomentSet& m) {
  const auto N = m.C_yy.rows();
  if (m.kind == MomentKind::Empirical && m.n_samples <= N) return 1e-6 * m.C_yy.trace() / static_cast<double>(N);
  return 0.0;
}

LmmseEstimator::LmmseEstimator(std::shared_ptr<const MomentSet> moments, double ridge)
    : m_(std::move(moments)), ridge_(ridge) {
  require(m_ != nullptr, "LmmseEstimator: null moments");
  require(ridge >= 0.0, "LmmseEstimator: ridge must be nonnegative");
  MatrixXd C = m_->C_yy;
  C.diagonal().array() += ridge;
  llt_.compute(C);
  if (llt_.info() != Eigen::Success) {
    std::ostringstream os;
    os << "C_yy + " << ridge << " I is not positive definite; retry with a larger ridge";
    throw SingularMoments(os.str());
  }
}

LmmseEstimate LmmseEstimator::estimate(const Image& y) const {
  const int n = m_->n;
  require(y.rows() == n && y.cols() == n, "lmmse_estimate: observation size does not match moments");
  const Vector z = llt_.solve(flat(y) - m_->mean_y);
  const Vector x = m_->mean_x + m_->C_xy * z;
  const Vector h = m_->mean_h + m_->C_hy * z;
  return {as_image(x, n), Eigen::Map<const Grid>(h.data(), m_->d, m_->d)};
}

LmmseEstimate lmmse_estimate(const MomentSet& m, const Image& y, double ridge) {
  // Non-owning alias; the estimator does not outlive this call.
  const LmmseEstimator est(std::shared_ptr<const MomentSet>(&m, [](const MomentSet*) {}), ridge);
  return est.estimate(y);
}

double tikhonov_residual(const MomentSet& m, const LmmseEstimate& est, const Image& y) {
  require(m.kind == MomentKind::Theoretical, "tikhonov_residual: requires theoretical moments");
  const int n = m.n;
  require(y.rows() == n && est.x_hat.rows() == n, "tikhonov_residual: size mismatch");
  const Dictionary& dict = m.signal.dict;
  const double cxx = 2.0 * m.signal.b * m.signal.b;
  const int K = dict.size();
  const Eigen::Index N = static_cast<Eigen::Index>(n) * n;

  const Grid mean_h = Eigen::Map<const Grid>(m.mean_h.data(), m.d, m.d);
  const CirculantOperator mbar(embed_kernel(mean_h, n));
  // B = Mbar A^T, columns are blurred atoms.
  MatrixXd B(N, K);
  for (int k = 0; k < K; ++k) {
    const auto [p, q] = dict.atom_indices[k];
    B.col(k) = flat(mbar.apply(dct2_atom(p, q, n)));
  }
  // C_p = C_yy - E[(E[h] * x)(E[h] * x)^T] + E[y]E[y]^T = C_yy - Mbar C_xx Mbar^T.
  const MatrixXd Cp = m.C_yy - cxx * (B * B.transpose());
  const Eigen::LLT<MatrixXd> llt(Cp);
  if (llt.info() != Eigen::Success) throw SingularMoments("tikhonov_residual: C_p is not positive definite");
  const MatrixXd CpB = llt.solve(B);
  MatrixXd Gm = B.transpose() * CpB;
  Gm.diagonal().array() += 1.0 / cxx;
  const Vector rhs = CpB.transpose() * (flat(y) - m.mean_y);
  const Vector c = analyze(dict, est.x_hat - as_image(m.mean_x, n));
  const Vector r = Gm * c - rhs;
  const double scale = rhs.norm();
  if (scale == 0.0) return r.norm();
  return r.norm() / scale;
}

std::string moment_cache_key(const SignalPrior& signal, const KernelPrior& kernel, const NoiseModel& noise, int M,
                             double ridge) {
  std::ostringstream os;
  os.precision(17);
  os << "n=" << signal.dict.n << ";K=" << signal.dict.size() << ";b=" << signal.b << ";d=" << kernel.d
     << ";a=" << kernel.a << ";beta=" << kernel.beta << ";c=" << noise.c_eps << ";M=" << M << ";ridge=" << ridge;
  for (const auto& [p, q] : signal.dict.atom_indices) os << ';' << p << ',' << q;
  for (double mu : signal.dict.mu_alpha) os << (mu > 0 ? '+' : '-');
  // FNV-1a 64.
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char ch : os.str()) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
  return buf;
}

namespace {

void write_matrix(const std::filesystem::path& p, const MatrixXd& a) {
  // Blobs are always row-major.
  const Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> r = a;
  blob::write_f64(p, r.data(), r.size());
}

MatrixXd read_matrix(const std::filesystem::path& p, Eigen::Index rows, Eigen::Index cols) {
  auto v = blob::read_f64(p, static_cast<size_t>(rows * cols));
  return Eigen::Map<Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>>(v.data(), rows, cols);
}

}  // namespace

void save_moments(const MomentSet& m, const std::filesystem::path& dir, const std::string& key) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create directory " + dir.string() + ": " + ec.message());
  nlohmann::json j;
  j["version"] = kDatasetFormatVersion;
  j["key"] = key;
  j["n"] = m.n;
  j["d"] = m.d;
  j["kind"] = m.kind == MomentKind::Theoretical ? "theoretical" : "empirical";
  j["n_samples"] = m.n_samples;
  j["c_eps"] = m.c_eps;
  j["b"] = m.signal.b;
  auto idx = nlohmann::json::array();
  for (const auto& [p, q] : m.signal.dict.atom_indices) idx.push_back({p, q});
  j["atom_indices"] = idx;
  j["mu_alpha"] = std::vector<double>(m.signal.dict.mu_alpha.data(),
                                      m.signal.dict.mu_alpha.data() + m.signal.dict.mu_alpha.size());
  blob::write_f64(dir / "mean_x.f64", m.mean_x.data(), m.mean_x.size());
  blob::write_f64(dir / "mean_h.f64", m.mean_h.data(), m.mean_h.size());
  blob::write_f64(dir / "mean_y.f64", m.mean_y.data(), m.mean_y.size());
  write_matrix(dir / "C_xy.f64", m.C_xy);
  write_matrix(dir / "C_hy.f64", m.C_hy);
  write_matrix(dir / "C_yy.f64", m.C_yy);
  blob::write_json(dir / "manifest.json", j);
}

MomentSet load_moments(const std::filesystem::path& dir, const std::string& expected_key) {
  const auto mpath = dir / "manifest.json";
  const auto j = blob::read_json(mpath);
  try {
    if (j.at("version").get<int>() != kDatasetFormatVersion)
      throw VersionMismatch(mpath.string() + ": unsupported moment cache version");
    if (!expected_key.empty() && j.at("key").get<std::string>() != expected_key)
      throw VersionMismatch(mpath.string() + ": moment cache key mismatch");
    MomentSet m;
    m.n = j.at("n").get<int>();
    m.d = j.at("d").get<int>();
    m.kind = j.at("kind").get<std::string>() == "theoretical" ? MomentKind::Theoretical : MomentKind::Empirical;
    m.n_samples = j.at("n_samples").get<int>();
    m.c_eps = j.at("c_eps").get<double>();
    m.signal.b = j.at("b").get<double>();
    m.signal.dict.n = m.n;
    m.signal.dict.atom_indices = j.at("atom_indices").get<std::vector<std::pair<int, int>>>();
    const auto mu = j.at("mu_alpha").get<std::vector<double>>();
    m.signal.dict.mu_alpha = Eigen::Map<const Vector>(mu.data(), static_cast<Eigen::Index>(mu.size()));
    const Eigen::Index N = static_cast<Eigen::Index>(m.n) * m.n;
    const Eigen::Index D = static_cast<Eigen::Index>(m.d) * m.d;
    auto mx = blob::read_f64(dir / "mean_x.f64", N);
    auto mh = blob::read_f64(dir / "mean_h.f64", D);
    auto my = blob::read_f64(dir / "mean_y.f64", N);
    m.mean_x = Eigen::Map<Vector>(mx.data(), N);
    m.mean_h = Eigen::Map<Vector>(mh.data(), D);
    m.mean_y = Eigen::Map<Vector>(my.data(), N);
    m.C_xy = read_matrix(dir / "C_xy.f64", N, N);
    m.C_hy = read_matrix(dir / "C_hy.f64", D, N);
    m.C_yy = read_matrix(dir / "C_yy.f64", N, N);
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw MalformedFile(mpath.string() + ": " + e.what());
  }
}

}  // namespace bdecon
