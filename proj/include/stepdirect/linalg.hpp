#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "stepdirect/errors.hpp"
#include "stepdirect/rng.hpp"

namespace stepdirect {

using Vector = std::vector<double>;

// Dense row-major matrix.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0)
      : rows_(rows), cols_(cols), data_(rows * cols, fill) {}

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }

  double& operator()(std::size_t i, std::size_t j) noexcept { return data_[i * cols_ + j]; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * cols_ + j]; }

  std::span<const double> row(std::size_t i) const noexcept {
    return {data_.data() + i * cols_, cols_};
  }

  bool operator==(const Matrix&) const = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

/// Symmetric matrix; set() writes both triangles so symmetry holds by storage.
class SymMatrix {
 public:
  SymMatrix() = default;
  explicit SymMatrix(std::size_t n, double diag = 0.0) : n_(n), data_(n * n, 0.0) {
    for (std::size_t i = 0; i < n; ++i) data_[i * n + i] = diag;
  }

  // Takes the lower triangle of a square matrix.
  static SymMatrix from_lower(const Matrix& m) {
    if (m.rows() != m.cols()) throw DomainError("SymMatrix: matrix must be square");
    SymMatrix s(m.rows());
    for (std::size_t i = 0; i < m.rows(); ++i) {
      for (std::size_t j = 0; j <= i; ++j) s.set(i, j, m(i, j));
    }
    return s;
  }

  std::size_t dim() const noexcept { return n_; }
  double operator()(std::size_t i, std::size_t j) const noexcept { return data_[i * n_ + j]; }
  void set(std::size_t i, std::size_t j, double v) noexcept {
    data_[i * n_ + j] = v;
    data_[j * n_ + i] = v;
  }
  void add(std::size_t i, std::size_t j, double v) noexcept {
    data_[i * n_ + j] += v;
    if (i != j) data_[j * n_ + i] += v;
  }

  double trace() const noexcept {
    double t = 0.0;
    for (std::size_t i = 0; i < n_; ++i) t += (*this)(i, i);
    return t;
  }

  bool operator==(const SymMatrix&) const = default;

 private:
  std::size_t n_ = 0;
  std::vector<double> data_;
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline Vector matvec(const Matrix& m, std::span<const double> x) {
  Vector out(m.rows(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) out[i] = dot(m.row(i), x);
  return out;
}

inline Vector matvec(const SymMatrix& m, std::span<const double> x) {
  const std::size_t n = m.dim();
  Vector out(n, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < n; ++j) s += m(i, j) * x[j];
    out[i] = s;
  }
  return out;
}

// m^T x
inline Vector tmatvec(const Matrix& m, std::span<const double> x) {
  Vector out(m.cols(), 0.0);
  for (std::size_t i = 0; i < m.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < m.cols(); ++j) out[j] += m(i, j) * xi;
  }
  return out;
}

// m^T diag(weights) m; unit weights when empty.
inline SymMatrix crossprod(const Matrix& m, std::span<const double> weights = {}) {
  SymMatrix out(m.cols());
  for (std::size_t r = 0; r < m.rows(); ++r) {
    const double w = weights.empty() ? 1.0 : weights[r];
    for (std::size_t i = 0; i < m.cols(); ++i) {
      const double a = m(r, i) * w;
      if (a == 0.0) continue;
      for (std::size_t j = 0; j <= i; ++j) out.add(i, j, a * m(r, j));
    }
  }
  return out;
}

inline double quad_form(const SymMatrix& m, std::span<const double> x) {
  return dot(x, matvec(m, x));
}

/// Lower Cholesky factor L with m = L L^T.
class Cholesky {
 public:
  explicit Cholesky(const SymMatrix& m) : n_(m.dim()), l_(m.dim(), m.dim()) {
    for (std::size_t j = 0; j < n_; ++j) {
      double d = m(j, j);
      for (std::size_t k = 0; k < j; ++k) d -= l_(j, k) * l_(j, k);
      if (!(d > 0.0) || !std::isfinite(d)) {
        throw NotPositiveDefinite("Cholesky: matrix is not positive definite");
      }
      const double ljj = std::sqrt(d);
      l_(j, j) = ljj;
      for (std::size_t i = j + 1; i < n_; ++i) {
        double s = m(i, j);
        for (std::size_t k = 0; k < j; ++k) s -= l_(i, k) * l_(j, k);
        l_(i, j) = s / ljj;
      }
    }
  }

  const Matrix& lower() const noexcept { return l_; }

  // Solves L y = b.
  Vector solve_lower(std::span<const double> b) const {
    Vector y(b.begin(), b.end());
    for (std::size_t i = 0; i < n_; ++i) {
      double s = y[i];
      for (std::size_t k = 0; k < i; ++k) s -= l_(i, k) * y[k];
      y[i] = s / l_(i, i);
    }
    return y;
  }

  // Solves L^T x = y.
  Vector solve_upper(std::span<const double> y) const {
    Vector x(y.begin(), y.end());
    for (std::size_t ii = n_; ii-- > 0;) {
      double s = x[ii];
      for (std::size_t k = ii + 1; k < n_; ++k) s -= l_(k, ii) * x[k];
      x[ii] = s / l_(ii, ii);
    }
    return x;
  }

  Vector solve(std::span<const double> b) const { return solve_upper(solve_lower(b)); }

  double log_det() const noexcept {
    double s = 0.0;
    for (std::size_t i = 0; i < n_; ++i) s += std::log(l_(i, i));
    return 2.0 * s;
  }

 private:
  std::size_t n_;
  Matrix l_;
};

/// Draws N(P^{-1} b, P^{-1}) given precision P and linear term b, by
/// factorize-and-solve; P^{-1} is never formed.
inline Vector draw_mvn_precision(Rng& rng, const SymMatrix& precision,
                                 std::span<const double> linear) {
  if (linear.size() != precision.dim()) throw DomainError("draw_mvn_precision: size mismatch");
  const Cholesky chol(precision);
  Vector mean = chol.solve(linear);
  Vector z(precision.dim());
  for (double& zi : z) zi = draw_standard_normal(rng);
  const Vector dev = chol.solve_upper(z);
  for (std::size_t i = 0; i < mean.size(); ++i) mean[i] += dev[i];
  return mean;
}

struct SymEigen {
  Vector values;   // descending
  Matrix vectors;  // column j pairs with values[j]; empty unless requested
};

/// Cyclic Jacobi eigensolver for dense symmetric matrices.
inline SymEigen sym_eigen(const SymMatrix& m, bool want_vectors = false) {
  const std::size_t n = m.dim();
  Matrix a(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) a(i, j) = m(i, j);
  Matrix v = want_vectors ? Matrix::identity(n) : Matrix();

  double scale = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < n; ++j) scale += a(i, j) * a(i, j);
  scale = std::sqrt(scale);

  bool converged = n < 2 || scale == 0.0;
  for (int sweep = 0; sweep < 100 && !converged; ++sweep) {
    double off = 0.0;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    if (std::sqrt(off) <= 1e-15 * scale) {
      converged = true;
      break;
    }
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (std::abs(apq) <= 1e-300) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - s * akq;
          a(k, q) = s * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - s * aqk;
          a(q, k) = s * apk + c * aqk;
        }
        if (want_vectors) {
          for (std::size_t k = 0; k < n; ++k) {
            const double vkp = v(k, p);
            const double vkq = v(k, q);
            v(k, p) = c * vkp - s * vkq;
            v(k, q) = s * vkp + c * vkq;
          }
        }
      }
    }
  }
  if (!converged) throw NonConvergence("sym_eigen: Jacobi sweeps did not converge");

  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  std::sort(order.begin(), order.end(),
            [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymEigen out;
  out.values.resize(n);
  if (want_vectors) out.vectors = Matrix(n, n);
  for (std::size_t j = 0; j < n; ++j) {
    out.values[j] = a(order[j], order[j]);
    if (want_vectors)
      for (std::size_t k = 0; k < n; ++k) out.vectors(k, j) = v(k, order[j]);
  }
  return out;
}

inline Vector sym_eigenvalues(const SymMatrix& m) { return sym_eigen(m, false).values; }

}  // namespace stepdirect
