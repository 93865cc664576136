#pragma once

// Small dense linear algebra: just enough for the per-player Jacobians and
// preconditioners, which never exceed a handful of rows and columns.

#include <cstddef>
#include <initializer_list>
#include <span>
#include <vector>

namespace hgd {

using Vector = std::vector<double>;

class DenseMatrix {
 public:
  DenseMatrix() = default;
  // Zero-filled rows x cols matrix.
  DenseMatrix(std::size_t rows, std::size_t cols);
  // Row-major entries; throws ShapeMismatch on a size mismatch and
  // NonFiniteValue if any entry is NaN or infinite.
  DenseMatrix(std::size_t rows, std::size_t cols, std::vector<double> entries);

  static DenseMatrix identity(std::size_t n);
  static DenseMatrix diagonal(std::span<const double> diag);
  static DenseMatrix from_rows(
      std::initializer_list<std::initializer_list<double>> rows);
  static DenseMatrix column(std::span<const double> v);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  double operator()(std::size_t r, std::size_t c) const {
    return data_[r * cols_ + c];
  }
  double& operator()(std::size_t r, std::size_t c) {
    return data_[r * cols_ + c];
  }
  std::span<const double> entries() const { return data_; }

  Vector row(std::size_t r) const;
  Vector col(std::size_t c) const;

  bool operator==(const DenseMatrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

DenseMatrix transpose(const DenseMatrix& a);
DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b);
Vector matvec(const DenseMatrix& a, std::span<const double> v);
DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b);
DenseMatrix scale(const DenseMatrix& a, double s);
// Largest absolute entry.
double max_abs(const DenseMatrix& a);
// Frobenius norm.
double frobenius(const DenseMatrix& a);

double dot(std::span<const double> a, std::span<const double> b);
double norm2(std::span<const double> v);
Vector axpy(double alpha, std::span<const double> x, std::span<const double> y);

struct SvdFactors {
  DenseMatrix u;  // m x r, orthonormal columns
  Vector sigma;   // r values, descending, >= 0
  DenseMatrix v;  // n x r, orthonormal columns
};

// Thin SVD by one-sided Jacobi rotations, r = min(rows, cols). Throws
// IterationLimit if the sweeps have not converged after 200 passes.
SvdFactors svd(const DenseMatrix& m);

inline constexpr double kDefaultRankTol = 1e-12;

// Singular values at or below rank_tol * sigma_max * max(rows, cols) count
// as zero.
double rank_cutoff(std::span<const double> sigma, std::size_t rows,
                   std::size_t cols, double rank_tol);
std::size_t numerical_rank(const SvdFactors& f, std::size_t rows,
                           std::size_t cols, double rank_tol = kDefaultRankTol);

// Moore-Penrose pseudoinverse.
DenseMatrix pinv(const DenseMatrix& m, double rank_tol = kDefaultRankTol);

}  // namespace hgd
