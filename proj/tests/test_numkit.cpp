#include <Eigen/Dense>

#include <cmath>
#include <random>

#include "doctest.h"
#include "hgd/error.hpp"
#include "hgd/numkit.hpp"
#include "hgd/rng.hpp"

using namespace hgd;

namespace {

DenseMatrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  DenseMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i)
    for (std::size_t j = 0; j < c; ++j) m(i, j) = u(rng);
  return m;
}

Eigen::MatrixXd to_eigen(const DenseMatrix& m) {
  Eigen::MatrixXd e(m.rows(), m.cols());
  for (std::size_t i = 0; i < m.rows(); ++i)
    for (std::size_t j = 0; j < m.cols(); ++j) e(i, j) = m(i, j);
  return e;
}

double max_dev(const DenseMatrix& a, const Eigen::MatrixXd& b) {
  double d = 0.0;
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) d = std::max(d, std::abs(a(i, j) - b(i, j)));
  return d;
}

DenseMatrix reconstruct(const SvdFactors& f) {
  DenseMatrix us = f.u;
  for (std::size_t i = 0; i < us.rows(); ++i)
    for (std::size_t k = 0; k < us.cols(); ++k) us(i, k) *= f.sigma[k];
  return matmul(us, transpose(f.v));
}

}  // namespace

TEST_CASE("construction rejects bad shapes and non-finite entries") {
  CHECK_THROWS_AS(DenseMatrix(2, 2, {1.0, 2.0, 3.0}), ShapeMismatch);
  CHECK_THROWS_AS(DenseMatrix(1, 2, {1.0, std::nan("")}), NonFiniteValue);
  CHECK_THROWS_AS(DenseMatrix(1, 1, {INFINITY}), NonFiniteValue);
  CHECK_THROWS_AS(matmul(DenseMatrix(2, 3), DenseMatrix(2, 3)), ShapeMismatch);
}

TEST_CASE("basic arithmetic") {
  const Vector v{0.3, -1.7};
  CHECK(matvec(DenseMatrix::identity(2), v) == v);
  CHECK(norm2(Vector{3.0, 4.0}) == doctest::Approx(5.0).epsilon(1e-15));
  CHECK(norm2(Vector{1e300, 1e300}) == doctest::Approx(std::sqrt(2.0) * 1e300));

  Rng rng = make_rng(11);
  for (auto [r, k, c] : {std::tuple{2, 3, 4}, std::tuple{3, 4, 2}}) {
    const DenseMatrix a = random_matrix(r, k, rng);
    const DenseMatrix b = random_matrix(k, c, rng);
    CHECK(max_abs(sub(transpose(matmul(a, b)), matmul(transpose(b), transpose(a)))) <= 1e-15);
    CHECK(max_dev(matmul(a, b), to_eigen(a) * to_eigen(b)) <= 1e-14);
  }
}

TEST_CASE("svd of identity and diagonal matrices") {
  const SvdFactors id = svd(DenseMatrix::identity(3));
  CHECK(id.sigma == Vector{1.0, 1.0, 1.0});
  CHECK(max_abs(sub(id.u, DenseMatrix::identity(3))) == 0.0);
  CHECK(max_abs(sub(id.v, DenseMatrix::identity(3))) == 0.0);

  const SvdFactors d = svd(DenseMatrix::from_rows({{3.0, 0.0}, {0.0, 0.0}}));
  CHECK(d.sigma[0] == 3.0);
  CHECK(d.sigma[1] == 0.0);
}

TEST_CASE("svd matches an independent decomposition on random shapes") {
  Rng rng = make_rng(12);
  for (std::size_t r = 1; r <= 7; ++r)
    for (std::size_t c = 1; c <= 7; ++c) {
      const DenseMatrix m = random_matrix(r, c, rng);
      const SvdFactors f = svd(m);
      const Eigen::JacobiSVD<Eigen::MatrixXd> oracle(to_eigen(m));
      REQUIRE(f.sigma.size() == std::min(r, c));
      for (std::size_t k = 0; k < f.sigma.size(); ++k) {
        CHECK(f.sigma[k] == doctest::Approx(oracle.singularValues()(k)).epsilon(1e-12));
        if (k) CHECK(f.sigma[k] <= f.sigma[k - 1]);
      }
      const double smax = f.sigma.front();
      CHECK(max_abs(sub(reconstruct(f), m)) <= 1e-10 * (1.0 + smax));
      CHECK(max_abs(sub(matmul(transpose(f.u), f.u), DenseMatrix::identity(f.sigma.size()))) <= 1e-10);
      CHECK(max_abs(sub(matmul(transpose(f.v), f.v), DenseMatrix::identity(f.sigma.size()))) <= 1e-10);
    }
}

TEST_CASE("svd handles rank-deficient and zero matrices") {
  const DenseMatrix dup = DenseMatrix::from_rows({{0.3, -0.8, 0.1}, {0.3, -0.8, 0.1}, {1.0, 2.0, 0.5}});
  const SvdFactors f = svd(dup);
  CHECK(f.sigma[2] <= 1e-14);
  CHECK(numerical_rank(f, 3, 3) == 2);
  CHECK(max_abs(sub(reconstruct(f), dup)) <= 1e-14);

  const SvdFactors z = svd(DenseMatrix(2, 3));
  CHECK(z.sigma == Vector{0.0, 0.0});
  CHECK(max_abs(pinv(DenseMatrix(2, 3))) == 0.0);
}

TEST_CASE("pinv examples") {
  CHECK(max_abs(sub(pinv(DenseMatrix::identity(3)), DenseMatrix::identity(3))) <= 1e-15);
  const DenseMatrix p = pinv(DenseMatrix::from_rows({{4.0, 0.0}, {0.0, 0.0}}));
  CHECK(p(0, 0) == doctest::Approx(0.25));
  CHECK(p(0, 1) == 0.0);
  CHECK(p(1, 0) == 0.0);
  CHECK(p(1, 1) == 0.0);
}

TEST_CASE("pinv agrees with a complete orthogonal decomposition") {
  Rng rng = make_rng(13);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t r = 1 + trial % 6, c = 1 + (trial / 6) % 6;
    DenseMatrix m = random_matrix(r, c, rng);
    if (trial % 3 == 0 && r > 1)
      for (std::size_t j = 0; j < c; ++j) m(r - 1, j) = 2.0 * m(0, j);
    const Eigen::MatrixXd oracle = to_eigen(m).completeOrthogonalDecomposition().pseudoInverse();
    CHECK(max_dev(pinv(m), oracle) <= 1e-9);
  }
}

TEST_CASE("Penrose conditions on every shape up to 6x6") {
  Rng rng = make_rng(14);
  for (std::size_t r = 1; r <= 6; ++r)
    for (std::size_t c = 1; c <= 6; ++c)
      for (int rep = 0; rep < 10; ++rep) {
        DenseMatrix m = random_matrix(r, c, rng);
        if (rep % 2 && c > 1)
          for (std::size_t i = 0; i < r; ++i) m(i, c - 1) = -m(i, 0);
        const DenseMatrix p = pinv(m);
        CHECK(max_abs(sub(matmul(matmul(m, p), m), m)) <= 1e-9);
        CHECK(max_abs(sub(matmul(matmul(p, m), p), p)) <= 1e-9);
        const DenseMatrix mp = matmul(m, p), pm = matmul(p, m);
        CHECK(max_abs(sub(mp, transpose(mp))) <= 1e-9);
        CHECK(max_abs(sub(pm, transpose(pm))) <= 1e-9);
      }
}

TEST_CASE("pinv of pinv is the matrix for full rank") {
  Rng rng = make_rng(15);
  for (int t = 0; t < 50; ++t) {
    const DenseMatrix m = random_matrix(1 + t % 5, 1 + (t / 5) % 5, rng);
    CHECK(max_abs(sub(pinv(pinv(m)), m)) <= 1e-8);
  }
}
