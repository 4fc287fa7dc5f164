#include "bdecon/conv.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>
#include <set>
#include <string>

#include "bdecon/error.hpp"
#include "bdecon/random.hpp"
#include "fft.hpp"

namespace bdecon {

using detail::require;

namespace {

int wrap(int i, int n) {
  const int m = i % n;
  return m < 0 ? m + n : m;
}

double dct_scale(int k, int n) { return k == 0 ? std::sqrt(1.0 / n) : std::sqrt(2.0 / n); }

void require_square(const Grid& g, const char* what) {
  require(g.rows() == g.cols() && g.rows() >= 1, std::string(what) + ": grid must be square and non-empty");
}

}  // namespace

Kernel Kernel::from_weights(Grid weights, double tol) {
  require_square(weights, "Kernel");
  require(weights.rows() % 2 == 1, "Kernel: side must be odd");
  require(on_simplex(weights, tol), "Kernel: weights must be nonnegative and sum to one");
  return Kernel(std::move(weights));
}

Kernel Kernel::delta(int d) {
  require(d >= 1 && d % 2 == 1, "Kernel::delta: side must be odd and positive");
  Grid w = Grid::Zero(d, d);
  w((d - 1) / 2, (d - 1) / 2) = 1.0;
  return Kernel(std::move(w));
}

bool on_simplex(const Grid& g, double tol) {
  if (!g.allFinite()) return false;
  if ((g.array() < 0.0).any()) return false;
  return std::abs(g.sum() - 1.0) <= tol;
}

void Dictionary::validate() const {
  require(n >= 1, "Dictionary: n must be positive");
  require(static_cast<long>(atom_indices.size()) <= static_cast<long>(n) * n,
          "Dictionary: more atoms than frequencies");
  require(mu_alpha.size() == size(), "Dictionary: mu_alpha length must equal K");
  std::set<std::pair<int, int>> seen;
  for (const auto& [p, q] : atom_indices) {
    require(p >= 0 && p < n && q >= 0 && q < n, "Dictionary: frequency index out of range");
    require(seen.insert({p, q}).second, "Dictionary: duplicate atom index");
  }
  for (double m : mu_alpha) require(m == 0.5 || m == -0.5, "Dictionary: mu_alpha entries must be +-1/2");
}

Image dct2_atom(int p, int q, int n) {
  require(n >= 1, "dct2_atom: n must be positive");
  require(p >= 0 && p < n && q >= 0 && q < n, "dct2_atom: frequency index out of range");
  const double pi = std::numbers::pi;
  Vector row(n), col(n);
  for (int i = 0; i < n; ++i) {
    row(i) = dct_scale(p, n) * std::cos(pi * (2 * i + 1) * p / (2.0 * n));
    col(i) = dct_scale(q, n) * std::cos(pi * (2 * i + 1) * q / (2.0 * n));
  }
  return row * col.transpose();
}

Dictionary make_dictionary(int n, int K, std::uint64_t seed) {
  require(n >= 1, "make_dictionary: n must be positive");
  require(K >= 0 && static_cast<long>(K) <= static_cast<long>(n) * n, "make_dictionary: K must not exceed n^2");
  RandomStream rng(seed);
  std::vector<int> pool(static_cast<size_t>(n) * n);
  std::iota(pool.begin(), pool.end(), 0);
  Dictionary dict;
  dict.n = n;
  dict.atom_indices.reserve(K);
  for (int k = 0; k < K; ++k) {
    const auto j = k + static_cast<int>(rng.uniform_index(pool.size() - k));
    std::swap(pool[k], pool[j]);
    dict.atom_indices.emplace_back(pool[k] / n, pool[k] % n);
  }
  dict.mu_alpha.resize(K);
  for (int k = 0; k < K; ++k) dict.mu_alpha(k) = rng.fair_coin() ? 0.5 : -0.5;
  return dict;
}

Image dct2(const Image& x) {
  require_square(x, "dct2");
  const int n = static_cast<int>(x.rows());
  Image out(n, n);
  fft::redft10_2d(x.data(), out.data(), n);
  for (int p = 0; p < n; ++p)
    for (int q = 0; q < n; ++q) out(p, q) *= 0.25 * dct_scale(p, n) * dct_scale(q, n);
  return out;
}

Image idct2(const Image& coeffs) {
  require_square(coeffs, "idct2");
  const int n = static_cast<int>(coeffs.rows());
  Image scaled(n, n);
  for (int p = 0; p < n; ++p) {
    const double sp = p == 0 ? std::sqrt(1.0 / n) : 1.0 / std::sqrt(2.0 * n);
    for (int q = 0; q < n; ++q) {
      const double sq = q == 0 ? std::sqrt(1.0 / n) : 1.0 / std::sqrt(2.0 * n);
      scaled(p, q) = sp * sq * coeffs(p, q);
    }
  }
  Image out(n, n);
  fft::redft01_2d(scaled.data(), out.data(), n);
  return out;
}

Image synthesize(const Dictionary& dict, const Vector& alpha) {
  require(alpha.size() == dict.size(), "synthesize: alpha length must equal K");
  Image coeffs = Image::Zero(dict.n, dict.n);
  for (int k = 0; k < dict.size(); ++k) {
    const auto [p, q] = dict.atom_indices[k];
    coeffs(p, q) += alpha(k);
  }
  return idct2(coeffs);
}

Vector analyze(const Dictionary& dict, const Image& x) {
  require(x.rows() == dict.n && x.cols() == dict.n, "analyze: image side must equal dictionary n");
  const Image coeffs = dct2(x);
  Vector out(dict.size());
  for (int k = 0; k < dict.size(); ++k) {
    const auto [p, q] = dict.atom_indices[k];
    out(k) = coeffs(p, q);
  }
  return out;
}

Eigen::MatrixXd atom_matrix(const Dictionary& dict) {
  const int N = dict.n * dict.n;
  Eigen::MatrixXd A(dict.size(), N);
  for (int k = 0; k < dict.size(); ++k) {
    const auto [p, q] = dict.atom_indices[k];
    const Image atom = dct2_atom(p, q, dict.n);
    A.row(k) = Eigen::Map<const Eigen::RowVectorXd>(atom.data(), N);
  }
  return A;
}

Image embed_kernel(const Grid& h, int n) {
  require_square(h, "embed_kernel");
  const int d = static_cast<int>(h.rows());
  require(d % 2 == 1, "embed_kernel: kernel side must be odd");
  require(d <= n, "embed_kernel: kernel side exceeds image side");
  const int r = (d - 1) / 2;
  Image out = Image::Zero(n, n);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) out(wrap(a - r, n), wrap(b - r, n)) += h(a, b);
  return out;
}

Grid restrict_to_kernel(const Image& g, int d) {
  require_square(g, "restrict_to_kernel");
  const int n = static_cast<int>(g.rows());
  require(d >= 1 && d % 2 == 1, "restrict_to_kernel: kernel side must be odd");
  require(d <= n, "restrict_to_kernel: kernel side exceeds image side");
  const int r = (d - 1) / 2;
  Grid out(d, d);
  for (int a = 0; a < d; ++a)
    for (int b = 0; b < d; ++b) out(a, b) = g(wrap(a - r, n), wrap(b - r, n));
  return out;
}

CirculantOperator::CirculantOperator(const Image& filter) {
  require_square(filter, "CirculantOperator");
  n_ = static_cast<int>(filter.rows());
  spectrum_.resize(static_cast<size_t>(n_) * (n_ / 2 + 1));
  fft::rfft2(filter.data(), spectrum_.data(), n_);
}

Image CirculantOperator::apply(const Image& x) const {
  require(x.rows() == n_ && x.cols() == n_, "conv2_circ: size mismatch");
  std::vector<std::complex<double>> buf(spectrum_.size());
  fft::rfft2(x.data(), buf.data(), n_);
  const double scale = 1.0 / (static_cast<double>(n_) * n_);
  for (size_t i = 0; i < buf.size(); ++i) buf[i] *= spectrum_[i] * scale;
  Image out(n_, n_);
  fft::irfft2(buf.data(), out.data(), n_);
  return out;
}

Image CirculantOperator::apply_adjoint(const Image& r) const {
  require(r.rows() == n_ && r.cols() == n_, "conv2_adj: size mismatch");
  std::vector<std::complex<double>> buf(spectrum_.size());
  fft::rfft2(r.data(), buf.data(), n_);
  const double scale = 1.0 / (static_cast<double>(n_) * n_);
  for (size_t i = 0; i < buf.size(); ++i) buf[i] *= std::conj(spectrum_[i]) * scale;
  Image out(n_, n_);
  fft::irfft2(buf.data(), out.data(), n_);
  return out;
}

Image conv2_circ(const Image& x, const Image& filter) {
  require_square(x, "conv2_circ");
  require(filter.rows() == x.rows() && filter.cols() == x.cols(), "conv2_circ: size mismatch");
  return CirculantOperator(filter).apply(x);
}

Image conv2_circ(const Image& x, const Kernel& h) {
  require_square(x, "conv2_circ");
  return CirculantOperator(h, static_cast<int>(x.rows())).apply(x);
}

Image conv2_adj(const Image& filter, const Image& r) {
  require_square(r, "conv2_adj");
  require(filter.rows() == r.rows() && filter.cols() == r.cols(), "conv2_adj: size mismatch");
  return CirculantOperator(filter).apply_adjoint(r);
}

Image conv2_adj(const Kernel& h, const Image& r) {
  require_square(r, "conv2_adj");
  return CirculantOperator(h, static_cast<int>(r.rows())).apply_adjoint(r);
}

std::vector<std::complex<double>> dft2_full(const Image& x) {
  require_square(x, "dft2_full");
  const int n = static_cast<int>(x.rows());
  std::vector<std::complex<double>> out(x.data(), x.data() + x.size());
  fft::cfft2(out.data(), n, -1);
  return out;
}

void unitary_dft2_columns(Eigen::MatrixXcd& m, int n, int sign) {
  require(m.rows() == static_cast<Eigen::Index>(n) * n, "unitary_dft2_columns: rows must equal n^2");
  const double scale = 1.0 / n;
  for (Eigen::Index j = 0; j < m.cols(); ++j) {
    fft::cfft2(m.col(j).data(), n, sign);
    m.col(j) *= scale;
  }
}

}  // namespace bdecon
