#pragma once

// Linear-algebra substrate: periodic 2D convolution on the n x n torus, its
// adjoint, kernel embedding, and the orthonormal 2D DCT-II dictionary.

#include <complex>
#include <cstdint>
#include <utility>
#include <vector>

#include <Eigen/Dense>

namespace bdecon {

/// Row-major real grid. Images are n x n, kernel-shaped grids are d x d.
using Grid = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Image = Grid;
using Vector = Eigen::VectorXd;

/// A d x d blur kernel on the probability simplex, d odd. The entry at array
/// position (a, b) is the weight of spatial offset (a - r, b - r), r = (d-1)/2.
class Kernel {
 public:
  Kernel() = default;

  /// Validates nonnegativity, unit sum (within `tol`) and odd side.
  static Kernel from_weights(Grid weights, double tol = 1e-12);
  static Kernel delta(int d);

  int side() const noexcept { return static_cast<int>(w_.rows()); }
  int radius() const noexcept { return (side() - 1) / 2; }
  const Grid& weights() const noexcept { return w_; }

 private:
  explicit Kernel(Grid w) : w_(std::move(w)) {}
  Grid w_;
};

bool on_simplex(const Grid& g, double tol);

/// K orthonormal DCT atoms chosen among the n^2 frequency pairs, with the
/// location vector of the coefficient prior.
struct Dictionary {
  int n = 0;
  std::vector<std::pair<int, int>> atom_indices;  // (row frequency, column frequency)
  Vector mu_alpha;

  int size() const noexcept { return static_cast<int>(atom_indices.size()); }
  /// Checks distinctness, ranges and the +-1/2 location entries.
  void validate() const;
};

/// Orthonormal 2D DCT-II basis image for frequencies (p, q); p varies along rows.
Image dct2_atom(int p, int q, int n);

Dictionary make_dictionary(int n, int K, std::uint64_t seed);

/// x = sum_k alpha_k atom_k.
Image synthesize(const Dictionary& dict, const Vector& alpha);
/// The K inner products <atom_k, x>; adjoint of synthesize.
Vector analyze(const Dictionary& dict, const Image& x);
/// K x N matrix whose rows are the flattened atoms.
Eigen::MatrixXd atom_matrix(const Dictionary& dict);

/// Orthonormal 2D DCT-II / DCT-III of a full n x n grid.
Image dct2(const Image& x);
Image idct2(const Image& coeffs);

Image embed_kernel(const Grid& h, int n);
inline Image embed_kernel(const Kernel& h, int n) { return embed_kernel(h.weights(), n); }
/// Adjoint of embed_kernel: reads the d^2 wrapped positions of g.
Grid restrict_to_kernel(const Image& g, int d);

/// Circular convolution operator x -> g * x for a fixed n x n filter g,
/// diagonalized by the 2D DFT.
class CirculantOperator {
 public:
  CirculantOperator() = default;
  explicit CirculantOperator(const Image& filter);
  explicit CirculantOperator(const Kernel& h, int n) : CirculantOperator(embed_kernel(h, n)) {}

  int side() const noexcept { return n_; }
  Image apply(const Image& x) const;
  Image apply_adjoint(const Image& r) const;
  /// Unnormalized DFT of the filter, half-spectrum layout n x (n/2 + 1).
  const std::vector<std::complex<double>>& spectrum() const noexcept { return spectrum_; }

 private:
  int n_ = 0;
  std::vector<std::complex<double>> spectrum_;
};

/// (g * x)(i, j) = sum_{k,l} g(k, l) x(i - k, j - l), indices mod n.
Image conv2_circ(const Image& x, const Image& filter);
Image conv2_circ(const Image& x, const Kernel& h);
/// Circular correlation: satisfies <g * x, r> = <x, conv2_adj(g, r)>.
Image conv2_adj(const Image& filter, const Image& r);
Image conv2_adj(const Kernel& h, const Image& r);

/// Full unnormalized 2D DFT of a real n x n grid (n x n complex, row-major).
std::vector<std::complex<double>> dft2_full(const Image& x);

/// In-place unitary 2D DFT (sign -1) or its inverse (sign +1) of each column
/// of a column-major complex N x m matrix, columns read as row-major n x n grids.
void unitary_dft2_columns(Eigen::MatrixXcd& m, int n, int sign);

}  // namespace bdecon
