#include "hgd/numkit.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "hgd/error.hpp"

namespace hgd {
namespace {

void require(bool ok, const char* what) {
  if (!ok) throw ShapeMismatch(what);
}

constexpr int kMaxSweeps = 200;

// Replaces the flagged columns of q with unit vectors orthogonal to every
// other column (Gram-Schmidt against the standard basis).
void complete_orthonormal(DenseMatrix& q, const std::vector<bool>& needs_fill) {
  const std::size_t m = q.rows();
  std::size_t candidate = 0;
  for (std::size_t c = 0; c < q.cols(); ++c) {
    if (!needs_fill[c]) continue;
    while (candidate < m) {
      Vector w(m, 0.0);
      w[candidate++] = 1.0;
      // Two passes of modified Gram-Schmidt keep the result orthogonal to
      // round-off.
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t k = 0; k < q.cols(); ++k) {
          if (needs_fill[k] && k >= c) continue;
          double proj = 0.0;
          for (std::size_t i = 0; i < m; ++i) proj += q(i, k) * w[i];
          for (std::size_t i = 0; i < m; ++i) w[i] -= proj * q(i, k);
        }
      }
      const double n = norm2(w);
      if (n > 1e-6) {
        for (std::size_t i = 0; i < m; ++i) q(i, c) = w[i] / n;
        break;
      }
    }
  }
}

// One-sided Jacobi on a tall (rows >= cols) matrix.
SvdFactors svd_tall(const DenseMatrix& a) {
  const std::size_t m = a.rows();
  const std::size_t n = a.cols();
  DenseMatrix w = a;
  DenseMatrix v = DenseMatrix::identity(n);

  // Columns below this squared norm are round-off and need no rotation.
  const double negligible = std::pow(1e-15 * frobenius(a), 2);
  const double tol = std::numeric_limits<double>::epsilon() * static_cast<double>(std::max<std::size_t>(m, 1));
  bool converged = (n < 2);
  for (int sweep = 0; sweep < kMaxSweeps && !converged; ++sweep) {
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double alpha = 0.0, beta = 0.0, gamma = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          alpha += w(i, p) * w(i, p);
          beta += w(i, q) * w(i, q);
          gamma += w(i, p) * w(i, q);
        }
        if (gamma == 0.0 || std::min(alpha, beta) <= negligible ||
            std::abs(gamma) <= tol * std::sqrt(alpha * beta))
          continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) /
                         (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
        for (std::size_t i = 0; i < n; ++i) {
          const double vp = v(i, p), vq = v(i, q);
          v(i, p) = c * vp - s * vq;
          v(i, q) = s * vp + c * vq;
        }
      }
    }
  }
  if (!converged) {
    throw IterationLimit("svd: Jacobi sweeps did not converge in " +
                         std::to_string(kMaxSweeps) + " sweeps");
  }

  Vector norms(n);
  for (std::size_t j = 0; j < n; ++j) norms[j] = norm2(w.col(j));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  // Stable insertion sort by decreasing norm; n is small and this avoids a merge buffer.
  for (std::size_t k = 1; k < n; ++k) {
    const std::size_t key = order[k];
    std::size_t j = k;
    for (; j > 0 && norms[order[j - 1]] < norms[key]; --j) order[j] = order[j - 1];
    order[j] = key;
  }

  SvdFactors f{DenseMatrix(m, n), Vector(n), DenseMatrix(n, n)};
  const double smax = n ? norms[order[0]] : 0.0;
  std::vector<bool> needs_fill(n, false);
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t j = order[k];
    f.sigma[k] = norms[j];
    for (std::size_t i = 0; i < n; ++i) f.v(i, k) = v(i, j);
    // Columns whose norm is pure round-off carry no direction information.
    if (norms[j] > 1e-300 && norms[j] > 1e-15 * smax) {
      for (std::size_t i = 0; i < m; ++i) f.u(i, k) = w(i, j) / norms[j];
    } else {
      needs_fill[k] = true;
    }
  }
  complete_orthonormal(f.u, needs_fill);
  return f;
}

}  // namespace

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {}

DenseMatrix::DenseMatrix(std::size_t rows, std::size_t cols,
                         std::vector<double> entries)
    : rows_(rows), cols_(cols), data_(std::move(entries)) {
  if (data_.size() != rows * cols) {
    throw ShapeMismatch("DenseMatrix: expected " + std::to_string(rows * cols) +
                        " entries, got " + std::to_string(data_.size()));
  }
  for (double e : data_) {
    if (!std::isfinite(e)) throw NonFiniteValue("DenseMatrix: non-finite entry");
  }
}

DenseMatrix DenseMatrix::identity(std::size_t n) {
  DenseMatrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

DenseMatrix DenseMatrix::diagonal(std::span<const double> diag) {
  DenseMatrix m(diag.size(), diag.size());
  for (std::size_t i = 0; i < diag.size(); ++i) m(i, i) = diag[i];
  return m;
}

DenseMatrix DenseMatrix::from_rows(
    std::initializer_list<std::initializer_list<double>> rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.begin()->size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ShapeMismatch("from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return DenseMatrix(r, c, std::move(data));
}

DenseMatrix DenseMatrix::column(std::span<const double> v) {
  return DenseMatrix(v.size(), 1, Vector(v.begin(), v.end()));
}

Vector DenseMatrix::row(std::size_t r) const {
  return Vector(data_.begin() + r * cols_, data_.begin() + (r + 1) * cols_);
}

Vector DenseMatrix::col(std::size_t c) const {
  Vector out(rows_);
  for (std::size_t i = 0; i < rows_; ++i) out[i] = (*this)(i, c);
  return out;
}

DenseMatrix transpose(const DenseMatrix& a) {
  DenseMatrix t(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) t(j, i) = a(i, j);
  return t;
}

DenseMatrix matmul(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.cols() == b.rows(), "matmul: inner dimensions differ");
  DenseMatrix c(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) c(i, j) += aik * b(k, j);
    }
  return c;
}

Vector matvec(const DenseMatrix& a, std::span<const double> v) {
  require(a.cols() == v.size(), "matvec: dimension mismatch");
  Vector out(a.rows(), 0.0);
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * v[j];
    out[i] = s;
  }
  return out;
}

DenseMatrix add(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "add: shape mismatch");
  DenseMatrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) + b(i, j);
  return c;
}

DenseMatrix sub(const DenseMatrix& a, const DenseMatrix& b) {
  require(a.rows() == b.rows() && a.cols() == b.cols(), "sub: shape mismatch");
  DenseMatrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = a(i, j) - b(i, j);
  return c;
}

DenseMatrix scale(const DenseMatrix& a, double s) {
  DenseMatrix c(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) c(i, j) = s * a(i, j);
  return c;
}

double max_abs(const DenseMatrix& a) {
  double m = 0.0;
  for (double e : a.entries()) m = std::max(m, std::abs(e));
  return m;
}

double frobenius(const DenseMatrix& a) { return norm2(a.entries()); }

double dot(std::span<const double> a, std::span<const double> b) {
  require(a.size() == b.size(), "dot: length mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

double norm2(std::span<const double> v) {
  // Scaled accumulation avoids overflow for the occasional huge iterate.
  double scale_ = 0.0;
  for (double e : v) scale_ = std::max(scale_, std::abs(e));
  if (scale_ == 0.0 || !std::isfinite(scale_)) return scale_;
  double s = 0.0;
  for (double e : v) {
    const double r = e / scale_;
    s += r * r;
  }
  return scale_ * std::sqrt(s);
}

Vector axpy(double alpha, std::span<const double> x, std::span<const double> y) {
  require(x.size() == y.size(), "axpy: length mismatch");
  Vector out(y.begin(), y.end());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] += alpha * x[i];
  return out;
}

SvdFactors svd(const DenseMatrix& m) {
  if (m.rows() >= m.cols()) return svd_tall(m);
  SvdFactors t = svd_tall(transpose(m));
  return SvdFactors{std::move(t.v), std::move(t.sigma), std::move(t.u)};
}

double rank_cutoff(std::span<const double> sigma, std::size_t rows,
                   std::size_t cols, double rank_tol) {
  const double smax = sigma.empty() ? 0.0 : sigma.front();
  return rank_tol * smax * static_cast<double>(std::max(rows, cols));
}

std::size_t numerical_rank(const SvdFactors& f, std::size_t rows,
                           std::size_t cols, double rank_tol) {
  const double cut = rank_cutoff(f.sigma, rows, cols, rank_tol);
  std::size_t r = 0;
  for (double s : f.sigma)
    if (s > cut) ++r;
  return r;
}

DenseMatrix pinv(const DenseMatrix& m, double rank_tol) {
  const SvdFactors f = svd(m);
  const double cut = rank_cutoff(f.sigma, m.rows(), m.cols(), rank_tol);
  DenseMatrix out(m.cols(), m.rows());
  for (std::size_t k = 0; k < f.sigma.size(); ++k) {
    if (!(f.sigma[k] > cut)) continue;
    const double inv = 1.0 / f.sigma[k];
    for (std::size_t i = 0; i < m.cols(); ++i) {
      const double vik = f.v(i, k) * inv;
      for (std::size_t j = 0; j < m.rows(); ++j) out(i, j) += vik * f.u(j, k);
    }
  }
  return out;
}

}  // namespace hgd
