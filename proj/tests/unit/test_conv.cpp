#include <doctest.h>

#include <set>

#include "bdecon/conv.hpp"
#include "bdecon/error.hpp"
#include "oracles.hpp"

using namespace bdecon;

TEST_CASE("dct2_atom: DC atom, unit norm, closed form") {
  const Image dc = dct2_atom(0, 0, 5);
  CHECK((dc.array() - 1.0 / 5).abs().maxCoeff() < 1e-15);
  for (int p = 0; p < 6; ++p)
    for (int q = 0; q < 6; ++q) CHECK(std::abs(dct2_atom(p, q, 6).norm() - 1.0) < 1e-12);

  const Image a = dct2_atom(1, 0, 4);
  const double c = std::sqrt(2.0 / 4) * std::sqrt(1.0 / 4);
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) CHECK(a(i, j) == doctest::Approx(c * std::cos(std::numbers::pi * (2 * i + 1) / 8)).epsilon(1e-14));
}

TEST_CASE("dct2_atom: Gram matrix of all 16 atoms at n=4 is the identity") {
  std::vector<Image> atoms;
  for (int p = 0; p < 4; ++p)
    for (int q = 0; q < 4; ++q) atoms.push_back(dct2_atom(p, q, 4));
  for (size_t i = 0; i < atoms.size(); ++i)
    for (size_t j = 0; j < atoms.size(); ++j)
      CHECK(std::abs(oracle::inner(atoms[i], atoms[j]) - (i == j ? 1.0 : 0.0)) < 1e-12);
}

TEST_CASE("dct2_atom: out-of-range index") {
  CHECK_THROWS_AS(dct2_atom(4, 0, 4), InvalidArgument);
  CHECK_THROWS_AS(dct2_atom(0, -1, 4), InvalidArgument);
}

TEST_CASE("make_dictionary: paper size, reproducible, valid") {
  const auto d1 = make_dictionary(32, 512, 11);
  const auto d2 = make_dictionary(32, 512, 11);
  CHECK(d1.size() == 512);
  CHECK(d1.atom_indices == d2.atom_indices);
  CHECK(d1.mu_alpha == d2.mu_alpha);
  CHECK_NOTHROW(d1.validate());
  std::set<std::pair<int, int>> s(d1.atom_indices.begin(), d1.atom_indices.end());
  CHECK(s.size() == 512);
  const int plus = static_cast<int>((d1.mu_alpha.array() > 0).count());
  CHECK(plus > 200);
  CHECK(plus < 312);
}

TEST_CASE("make_dictionary: exhaustive and seed dependence") {
  const auto d = make_dictionary(2, 4, 3);
  std::set<std::pair<int, int>> s(d.atom_indices.begin(), d.atom_indices.end());
  CHECK(s == std::set<std::pair<int, int>>{{0, 0}, {0, 1}, {1, 0}, {1, 1}});
  CHECK(make_dictionary(16, 64, 1).atom_indices != make_dictionary(16, 64, 2).atom_indices);
  CHECK_THROWS_AS(make_dictionary(4, 17, 0), InvalidArgument);
}

TEST_CASE("dictionary atoms are orthonormal") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto dict = make_dictionary(8, 40, seed);
    const Eigen::MatrixXd A = atom_matrix(dict);
    const Eigen::MatrixXd G = A * A.transpose();
    CHECK((G - Eigen::MatrixXd::Identity(40, 40)).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("synthesize and analyze") {
  std::mt19937_64 rng(5);
  const auto dict = make_dictionary(8, 30, 9);
  CHECK(synthesize(dict, Vector::Zero(30)).cwiseAbs().maxCoeff() == 0.0);

  for (int k : {0, 7, 29}) {
    Vector e = Vector::Zero(30);
    e(k) = 1.0;
    const auto [p, q] = dict.atom_indices[k];
    Image expect(8, 8);
    for (int i = 0; i < 8; ++i)
      for (int j = 0; j < 8; ++j) expect(i, j) = oracle::cosine_atom(p, q, 8, i, j);
    CHECK((synthesize(dict, e) - expect).cwiseAbs().maxCoeff() < 1e-13);
    CHECK((analyze(dict, expect) - e).cwiseAbs().maxCoeff() < 1e-13);
  }

  const Vector alpha = oracle::random_vector(30, rng);
  CHECK((analyze(dict, synthesize(dict, alpha)) - alpha).cwiseAbs().maxCoeff() < 1e-10);

  // An atom outside the dictionary is orthogonal to all of it.
  std::set<std::pair<int, int>> used(dict.atom_indices.begin(), dict.atom_indices.end());
  for (int p = 0; p < 8; ++p)
    for (int q = 0; q < 8; ++q)
      if (!used.count({p, q})) {
        CHECK(analyze(dict, dct2_atom(p, q, 8)).cwiseAbs().maxCoeff() < 1e-13);
        p = q = 8;
      }

  for (int t = 0; t < 20; ++t) {
    const Vector a = oracle::random_vector(30, rng);
    const Image x = oracle::random_image(8, rng);
    CHECK(std::abs(oracle::inner(synthesize(dict, a), x) - a.dot(analyze(dict, x))) < 1e-10);
  }

  CHECK_THROWS_AS(synthesize(dict, Vector::Zero(29)), InvalidArgument);
  CHECK_THROWS_AS(analyze(dict, Image::Zero(7, 7)), InvalidArgument);
}

TEST_CASE("embed_kernel and restrict_to_kernel") {
  const Image e = embed_kernel(Kernel::delta(3), 5);
  CHECK(e(0, 0) == 1.0);
  CHECK(e.sum() == 1.0);

  std::mt19937_64 rng(1);
  const Grid h = oracle::random_simplex(5, rng);
  CHECK(std::abs(embed_kernel(h, 7).sum() - 1.0) < 1e-14);

  Grid k3(3, 3);
  k3 << 1, 2, 3, 4, 5, 6, 7, 8, 9;
  const Image e4 = embed_kernel(k3, 4);
  // offset (i, j) in {-1, 0, 1}^2 sits at ((i mod 4), (j mod 4)).
  CHECK(e4(3, 3) == 1);
  CHECK(e4(3, 0) == 2);
  CHECK(e4(3, 1) == 3);
  CHECK(e4(0, 3) == 4);
  CHECK(e4(0, 0) == 5);
  CHECK(e4(0, 1) == 6);
  CHECK(e4(1, 3) == 7);
  CHECK(e4(1, 0) == 8);
  CHECK(e4(1, 1) == 9);
  CHECK(e4.sum() == 45);

  CHECK(restrict_to_kernel(embed_kernel(k3, 4), 3) == k3);
  CHECK(restrict_to_kernel(Image::Zero(6, 6), 3).cwiseAbs().maxCoeff() == 0.0);
  for (int t = 0; t < 20; ++t) {
    const Grid hh = oracle::random_image(5, rng);
    const Image g = oracle::random_image(9, rng);
    CHECK(std::abs(oracle::inner(embed_kernel(hh, 9), g) - oracle::inner(hh, restrict_to_kernel(g, 5))) < 1e-12);
  }
  CHECK_THROWS_AS(embed_kernel(Grid::Zero(5, 5), 4), InvalidArgument);
  CHECK_THROWS_AS(restrict_to_kernel(Image::Zero(4, 4), 5), InvalidArgument);
}

TEST_CASE("conv2_circ: identity, constants, brute force for n <= 6, d <= 5") {
  std::mt19937_64 rng(2);
  const Image x = oracle::random_image(6, rng);
  CHECK((conv2_circ(x, Kernel::delta(3)) - x).cwiseAbs().maxCoeff() < 1e-14);
  const Kernel h = Kernel::from_weights(oracle::random_simplex(3, rng));
  const Image c = Image::Constant(6, 6, 2.5);
  CHECK((conv2_circ(c, h).array() - 2.5).abs().maxCoeff() < 1e-14);

  for (int n = 1; n <= 6; ++n)
    for (int d = 1; d <= std::min(n, 5); d += 2) {
      const Image xx = oracle::random_image(n, rng);
      const Grid hh = oracle::random_image(d, rng);
      const Image want = oracle::conv_kernel(xx, hh);
      CHECK((conv2_circ(xx, embed_kernel(hh, n)) - want).cwiseAbs().maxCoeff() < 1e-12);
      CHECK((oracle::conv_circ(xx, embed_kernel(hh, n)) - want).cwiseAbs().maxCoeff() < 1e-12);
    }
}

TEST_CASE("conv2_circ: linearity and commutativity") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 20; ++t) {
    const Image x1 = oracle::random_image(8, rng), x2 = oracle::random_image(8, rng);
    const Image g = embed_kernel(oracle::random_simplex(5, rng), 8);
    const double a = 1.7, b = -0.3;
    CHECK((conv2_circ(a * x1 + b * x2, g) - (a * conv2_circ(x1, g) + b * conv2_circ(x2, g))).cwiseAbs().maxCoeff() <
          1e-12);
    CHECK((conv2_circ(x1, g) - conv2_circ(g, x1)).cwiseAbs().maxCoeff() < 1e-10);
  }
  CHECK_THROWS_AS(conv2_circ(Image::Zero(4, 4), Image::Zero(5, 5)), InvalidArgument);
}

TEST_CASE("conv2_adj: delta, symmetric kernels, adjoint identity") {
  std::mt19937_64 rng(4);
  const Image r = oracle::random_image(7, rng);
  CHECK((conv2_adj(Kernel::delta(5), r) - r).cwiseAbs().maxCoeff() < 1e-14);

  Grid sym = oracle::random_simplex(5, rng);
  sym = 0.5 * (sym + sym.reverse().eval());
  const Kernel hs = Kernel::from_weights(sym);
  CHECK((conv2_adj(hs, r) - conv2_circ(r, hs)).cwiseAbs().maxCoeff() < 1e-13);

  for (int t = 0; t < 100; ++t) {
    const int n = 3 + t % 8;
    const Image x = oracle::random_image(n, rng), rr = oracle::random_image(n, rng), g = oracle::random_image(n, rng);
    const double lhs = oracle::inner(conv2_circ(x, g), rr);
    const double rhs = oracle::inner(x, conv2_adj(g, rr));
    CHECK(std::abs(lhs - rhs) <= 1e-10 * std::max(1.0, std::abs(lhs)));
  }
  CHECK_THROWS_AS(conv2_adj(Image::Zero(4, 4), Image::Zero(3, 3)), InvalidArgument);
}

TEST_CASE("Kernel validation") {
  CHECK_THROWS_AS(Kernel::from_weights(Grid::Constant(2, 2, 0.25)), InvalidArgument);
  Grid neg = Grid::Zero(3, 3);
  neg(1, 1) = 1.5;
  neg(0, 0) = -0.5;
  CHECK_THROWS_AS(Kernel::from_weights(neg), InvalidArgument);
  CHECK_THROWS_AS(Kernel::from_weights(Grid::Constant(3, 3, 0.2)), InvalidArgument);
  CHECK(Kernel::from_weights(Grid::Constant(3, 3, 1.0 / 9), 1e-12).side() == 3);
}
