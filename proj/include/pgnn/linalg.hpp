#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "pgnn/errors.hpp"
#include "pgnn/rng.hpp"

namespace pgnn::linalg {

// Dense 64-bit kernels sized for the experiments in this repo (dims up to a
// few hundred). Row-major storage, value semantics, no hidden state.

namespace detail {

inline void check_finite(const std::vector<double>& data, const char* what) {
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (!std::isfinite(data[i])) {
      throw ValidationError(std::string(what) + ": non-finite entry at flat index " +
                            std::to_string(i));
    }
  }
}

inline std::string shape_str(std::size_t r, std::size_t c) {
  return std::to_string(r) + "x" + std::to_string(c);
}

}  // namespace detail

// ============================================================================
// Vector
// ============================================================================

class Vector {
 public:
  explicit Vector(std::size_t dim) : data_(dim, 0.0) {
    if (dim == 0) throw ValidationError("Vector: dim must be >= 1");
  }

  explicit Vector(std::vector<double> values) : data_(std::move(values)) {
    if (data_.empty()) throw ValidationError("Vector: dim must be >= 1");
    detail::check_finite(data_, "Vector");
  }

  std::size_t size() const { return data_.size(); }

  double operator[](std::size_t i) const { return data_[i]; }
  double& operator[](std::size_t i) { return data_[i]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  bool operator==(const Vector& other) const = default;

 private:
  std::vector<double> data_;
};

inline double dot(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw ShapeError("dot: dims " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm(const Vector& v) { return std::sqrt(dot(v, v)); }

inline Vector add(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw ShapeError("add: dims " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

inline Vector subtract(const Vector& a, const Vector& b) {
  if (a.size() != b.size()) {
    throw ShapeError("subtract: dims " + std::to_string(a.size()) + " vs " +
                     std::to_string(b.size()));
  }
  Vector out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

inline Vector scale(const Vector& v, double s) {
  Vector out(v.size());
  for (std::size_t i = 0; i < v.size(); ++i) out[i] = v[i] * s;
  return out;
}

// ============================================================================
// Matrix
// ============================================================================

class Matrix {
 public:
  Matrix(std::size_t rows, std::size_t cols) : rows_(rows), cols_(cols), data_(rows * cols, 0.0) {
    if (rows == 0 || cols == 0) {
      throw ValidationError("Matrix: rows and cols must be >= 1, got " +
                            detail::shape_str(rows, cols));
    }
  }

  Matrix(std::size_t rows, std::size_t cols, std::vector<double> values)
      : rows_(rows), cols_(cols), data_(std::move(values)) {
    if (rows == 0 || cols == 0) {
      throw ValidationError("Matrix: rows and cols must be >= 1, got " +
                            detail::shape_str(rows, cols));
    }
    if (data_.size() != rows * cols) {
      throw ValidationError("Matrix: data length " + std::to_string(data_.size()) +
                            " does not match shape " + detail::shape_str(rows, cols));
    }
    detail::check_finite(data_, "Matrix");
  }

  static Matrix identity(std::size_t n) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }

  double operator()(std::size_t i, std::size_t j) const { return data_[i * cols_ + j]; }
  double& operator()(std::size_t i, std::size_t j) { return data_[i * cols_ + j]; }

  const std::vector<double>& data() const { return data_; }
  std::vector<double>& data() { return data_; }

  std::string shape() const { return detail::shape_str(rows_, cols_); }

  bool operator==(const Matrix& other) const = default;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<double> data_;
};

inline Matrix transpose(const Matrix& a) {
  Matrix out(a.cols(), a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i)
    for (std::size_t j = 0; j < a.cols(); ++j) out(j, i) = a(i, j);
  return out;
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) {
    throw ShapeError("matmul: " + a.shape() + " * " + b.shape());
  }
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      if (aik == 0.0) continue;
      for (std::size_t j = 0; j < b.cols(); ++j) out(i, j) += aik * b(k, j);
    }
  }
  for (double v : out.data()) {
    if (!std::isfinite(v)) throw NumericError("matmul: non-finite entry in product");
  }
  return out;
}

// a * x
inline Vector matvec(const Matrix& a, const Vector& x) {
  if (a.cols() != x.size()) {
    throw ShapeError("matvec: " + a.shape() + " * vector of dim " +
                     std::to_string(x.size()));
  }
  Vector out(a.rows());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < a.cols(); ++j) s += a(i, j) * x[j];
    out[i] = s;
  }
  return out;
}

// a^T * x
inline Vector matvec_transposed(const Matrix& a, const Vector& x) {
  if (a.rows() != x.size()) {
    throw ShapeError("matvec_transposed: " + a.shape() + "^T * vector of dim " +
                     std::to_string(x.size()));
  }
  Vector out(a.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    for (std::size_t j = 0; j < a.cols(); ++j) out[j] += a(i, j) * xi;
  }
  return out;
}

// x * y^T
inline Matrix outer(const Vector& x, const Vector& y) {
  Matrix out(x.size(), y.size());
  for (std::size_t i = 0; i < x.size(); ++i)
    for (std::size_t j = 0; j < y.size(); ++j) out(i, j) = x[i] * y[j];
  return out;
}

inline Matrix add(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("add: " + a.shape() + " vs " + b.shape());
  }
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.data().size(); ++i) out.data()[i] = a.data()[i] + b.data()[i];
  return out;
}

inline Matrix subtract(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("subtract: " + a.shape() + " vs " + b.shape());
  }
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.data().size(); ++i) out.data()[i] = a.data()[i] - b.data()[i];
  return out;
}

inline Matrix scale(const Matrix& a, double s) {
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.data().size(); ++i) out.data()[i] = a.data()[i] * s;
  return out;
}

inline Matrix hadamard(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw ShapeError("hadamard: " + a.shape() + " vs " + b.shape());
  }
  Matrix out(a.rows(), a.cols());
  for (std::size_t i = 0; i < a.data().size(); ++i) out.data()[i] = a.data()[i] * b.data()[i];
  return out;
}

inline double frobenius_norm(const Matrix& a) {
  double s = 0.0;
  for (double v : a.data()) s += v * v;
  return std::sqrt(s);
}

// ============================================================================
// Singular values — one-sided Jacobi
// ============================================================================

// All singular values of a, sorted descending. One-sided Jacobi rotations on
// the tall orientation: cheap and accurate at the dimensions this library
// targets. Sweeps until every column pair is orthogonal to relative
// tolerance 1e-12; throws past max_sweeps with the residual off-diagonal
// mass attached.
inline std::vector<double> svd_values(const Matrix& a, std::size_t max_sweeps = 100) {
  Matrix w = a.rows() >= a.cols() ? a : transpose(a);
  const std::size_t m = w.rows();
  const std::size_t n = w.cols();
  constexpr double kOffTol = 1e-12;
  // Columns whose mass falls below this fraction of the matrix total hold only
  // rounding noise (their singular value is 0 at double precision). Noise
  // columns stay mutually correlated at O(1) relative scale no matter how many
  // rotations run, so they must be excluded or rank-deficient inputs never
  // satisfy the relative criterion below.
  constexpr double kNullTol = 1e-28;

  double total = 0.0;
  for (std::size_t i = 0; i < m; ++i)
    for (std::size_t j = 0; j < n; ++j) total += w(i, j) * w(i, j);

  bool converged = (n == 1 || total == 0.0);
  for (std::size_t sweep = 0; sweep < max_sweeps && !converged; ++sweep) {
    bool rotated = false;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double app = 0.0, aqq = 0.0, apq = 0.0;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          app += wp * wp;
          aqq += wq * wq;
          apq += wp * wq;
        }
        if (app <= kNullTol * total || aqq <= kNullTol * total) continue;
        if (apq * apq <= kOffTol * kOffTol * app * aqq) continue;
        rotated = true;
        const double zeta = (aqq - app) / (2.0 * apq);
        const double t = (zeta >= 0.0 ? 1.0 : -1.0) / (std::abs(zeta) + std::sqrt(1.0 + zeta * zeta));
        const double c = 1.0 / std::sqrt(1.0 + t * t);
        const double s = c * t;
        for (std::size_t i = 0; i < m; ++i) {
          const double wp = w(i, p), wq = w(i, q);
          w(i, p) = c * wp - s * wq;
          w(i, q) = s * wp + c * wq;
        }
      }
    }
    if (!rotated) converged = true;
  }

  if (!converged) {
    double off = 0.0;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        double apq = 0.0;
        for (std::size_t i = 0; i < m; ++i) apq += w(i, p) * w(i, q);
        off += apq * apq;
      }
    }
    throw NumericError("svd_values: no convergence after " + std::to_string(max_sweeps) +
                           " sweeps, off-diagonal mass " + std::to_string(std::sqrt(off)),
                       std::sqrt(off));
  }

  std::vector<double> sigma(n);
  for (std::size_t j = 0; j < n; ++j) {
    double s = 0.0;
    for (std::size_t i = 0; i < m; ++i) s += w(i, j) * w(i, j);
    sigma[j] = std::sqrt(s);
  }
  std::sort(sigma.begin(), sigma.end(), std::greater<>());
  return sigma;
}

// ============================================================================
// DCT basis
// ============================================================================

// Orthonormal DCT-II basis, n x n. Row k is frequency mode k; row 0 is the
// constant mode. D * D^T = I by construction.
inline Matrix dct_basis(std::size_t n) {
  if (n == 0) throw ValidationError("dct_basis: n must be >= 1");
  constexpr double kPi = 3.14159265358979323846;
  Matrix d(n, n);
  const double s0 = std::sqrt(1.0 / static_cast<double>(n));
  const double sk = std::sqrt(2.0 / static_cast<double>(n));
  for (std::size_t k = 0; k < n; ++k) {
    const double s = (k == 0) ? s0 : sk;
    for (std::size_t j = 0; j < n; ++j) {
      d(k, j) = s * std::cos(kPi * (static_cast<double>(j) + 0.5) * static_cast<double>(k) /
                             static_cast<double>(n));
    }
  }
  return d;
}

// ============================================================================
// Graph Laplacian
// ============================================================================

// Unnormalized Laplacian L = D - A of an undirected simple graph on n nodes.
// Rejects self-loops, out-of-range endpoints, and duplicate edges (in either
// orientation).
inline Matrix graph_laplacian(std::size_t n, const std::vector<std::pair<std::size_t, std::size_t>>& edges) {
  if (n == 0) throw ValidationError("graph_laplacian: n must be >= 1");
  Matrix l(n, n);
  std::set<std::pair<std::size_t, std::size_t>> seen;
  for (const auto& [i, j] : edges) {
    if (i >= n || j >= n) {
      throw ValidationError("graph_laplacian: edge (" + std::to_string(i) + "," +
                            std::to_string(j) + ") out of range for n=" + std::to_string(n));
    }
    if (i == j) {
      throw ValidationError("graph_laplacian: self-loop at node " + std::to_string(i));
    }
    const auto key = std::minmax(i, j);
    if (!seen.insert(key).second) {
      throw ValidationError("graph_laplacian: duplicate edge (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
    }
    l(i, j) -= 1.0;
    l(j, i) -= 1.0;
    l(i, i) += 1.0;
    l(j, j) += 1.0;
  }
  return l;
}

// ============================================================================
// Spectral norm — power iteration
// ============================================================================

// Largest singular value via power iteration on A^T A from a fixed
// pseudo-random start. Stops when successive estimates agree to relative
// tol; throws past max_iters with the last estimate attached.
inline double spectral_norm_estimate(const Matrix& a, std::size_t max_iters = 1000,
                                     double tol = 1e-9) {
  if (tol <= 0.0) throw ValidationError("spectral_norm_estimate: tol must be > 0");
  if (frobenius_norm(a) == 0.0) return 0.0;

  rng::Prng gen(0x535045435452414CULL);  // fixed seed: estimates are deterministic
  Vector v(a.cols());
  for (std::size_t i = 0; i < v.size(); ++i) v[i] = gen.next_normal();
  {
    const double nv = norm(v);
    for (std::size_t i = 0; i < v.size(); ++i) v[i] /= nv;
  }

  double prev = -1.0;
  for (std::size_t it = 0; it < max_iters; ++it) {
    Vector av = matvec(a, v);
    const double sigma = norm(av);
    if (sigma == 0.0) {
      // start vector landed in the null space; redraw
      for (std::size_t i = 0; i < v.size(); ++i) v[i] = gen.next_normal();
      const double nv = norm(v);
      for (std::size_t i = 0; i < v.size(); ++i) v[i] /= nv;
      prev = -1.0;
      continue;
    }
    for (std::size_t i = 0; i < av.size(); ++i) av[i] /= sigma;
    Vector atu = matvec_transposed(a, av);
    const double beta = norm(atu);
    for (std::size_t i = 0; i < atu.size(); ++i) atu[i] /= beta;
    v = atu;
    if (prev >= 0.0 && std::abs(sigma - prev) <= tol * std::max(sigma, 1e-300)) {
      return sigma;
    }
    prev = sigma;
  }
  throw NumericError("spectral_norm_estimate: no convergence after " +
                         std::to_string(max_iters) + " iterations, last estimate " +
                         std::to_string(prev),
                     prev);
}

// ============================================================================
// Linear solve — Gaussian elimination with partial pivoting
// ============================================================================

// Solve a * X = B for several right-hand sides at once. Throws when a pivot
// falls below 1e-12 in magnitude, naming its index.
inline Matrix solve_linear(const Matrix& a, const Matrix& b) {
  if (a.rows() != a.cols()) {
    throw ShapeError("solve_linear: matrix must be square, got " + a.shape());
  }
  if (a.rows() != b.rows()) {
    throw ShapeError("solve_linear: " + a.shape() + " vs rhs " + b.shape());
  }
  const std::size_t n = a.rows();
  const std::size_t k = b.cols();
  Matrix lu = a;
  Matrix x = b;
  constexpr double kPivotTol = 1e-12;

  for (std::size_t col = 0; col < n; ++col) {
    std::size_t piv = col;
    double best = std::abs(lu(col, col));
    for (std::size_t r = col + 1; r < n; ++r) {
      const double v = std::abs(lu(r, col));
      if (v > best) {
        best = v;
        piv = r;
      }
    }
    if (best <= kPivotTol) {
      throw NumericError("solve_linear: singular or near-singular matrix, pivot " +
                             std::to_string(col) + " has magnitude " + std::to_string(best),
                         best);
    }
    if (piv != col) {
      for (std::size_t j = 0; j < n; ++j) std::swap(lu(col, j), lu(piv, j));
      for (std::size_t j = 0; j < k; ++j) std::swap(x(col, j), x(piv, j));
    }
    const double d = lu(col, col);
    for (std::size_t r = col + 1; r < n; ++r) {
      const double f = lu(r, col) / d;
      if (f == 0.0) continue;
      lu(r, col) = 0.0;
      for (std::size_t j = col + 1; j < n; ++j) lu(r, j) -= f * lu(col, j);
      for (std::size_t j = 0; j < k; ++j) x(r, j) -= f * x(col, j);
    }
  }
  // back substitution
  for (std::size_t col = n; col-- > 0;) {
    const double d = lu(col, col);
    for (std::size_t j = 0; j < k; ++j) {
      double s = x(col, j);
      for (std::size_t c = col + 1; c < n; ++c) s -= lu(col, c) * x(c, j);
      x(col, j) = s / d;
    }
  }
  return x;
}

inline Vector solve_linear(const Matrix& a, const Vector& b) {
  Matrix rhs(b.size(), 1);
  for (std::size_t i = 0; i < b.size(); ++i) rhs(i, 0) = b[i];
  Matrix sol = solve_linear(a, rhs);
  Vector out(b.size());
  for (std::size_t i = 0; i < b.size(); ++i) out[i] = sol(i, 0);
  return out;
}

}  // namespace pgnn::linalg
