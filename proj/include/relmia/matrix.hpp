#pragma once

#include <cmath>
#include <cstddef>
#include <stdexcept>
#include <vector>

namespace relmia {

// Dense row-major float64 matrix. The single numeric container of the library;
// vectors are 1xN or Nx1 matrices.
struct Matrix {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<double> data;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, double fill = 0.0)
      : rows(r), cols(c), data(r * c, fill) {}

  double& operator()(std::size_t r, std::size_t c) { return data[r * cols + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data[r * cols + c]; }

  double* row(std::size_t r) { return data.data() + r * cols; }
  const double* row(std::size_t r) const { return data.data() + r * cols; }

  std::size_t size() const { return data.size(); }
  bool same_shape(const Matrix& o) const { return rows == o.rows && cols == o.cols; }

  bool all_finite() const {
    for (double v : data)
      if (!std::isfinite(v)) return false;
    return true;
  }
};

inline void check_shape(bool ok, const char* what) {
  if (!ok) throw std::invalid_argument(what);
}

// c += a * b
inline void matmul_acc(Matrix& c, const Matrix& a, const Matrix& b) {
  check_shape(a.cols == b.rows && c.rows == a.rows && c.cols == b.cols,
              "matmul_acc: shape mismatch");
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (std::size_t k = 0; k < a.cols; ++k) {
      const double aik = arow[k];
      const double* brow = b.row(k);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aik * brow[j];
    }
  }
}

inline Matrix matmul(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows, b.cols);
  matmul_acc(c, a, b);
  return c;
}

// c += a * b^T
inline void matmul_nt_acc(Matrix& c, const Matrix& a, const Matrix& b) {
  check_shape(a.cols == b.cols && c.rows == a.rows && c.cols == b.rows,
              "matmul_nt_acc: shape mismatch");
  for (std::size_t i = 0; i < a.rows; ++i) {
    const double* arow = a.row(i);
    double* crow = c.row(i);
    for (std::size_t j = 0; j < b.rows; ++j) {
      const double* brow = b.row(j);
      double s = 0.0;
      for (std::size_t k = 0; k < a.cols; ++k) s += arow[k] * brow[k];
      crow[j] += s;
    }
  }
}

// c += a^T * b
inline void matmul_tn_acc(Matrix& c, const Matrix& a, const Matrix& b) {
  check_shape(a.rows == b.rows && c.rows == a.cols && c.cols == b.cols,
              "matmul_tn_acc: shape mismatch");
  for (std::size_t k = 0; k < a.rows; ++k) {
    const double* arow = a.row(k);
    const double* brow = b.row(k);
    for (std::size_t i = 0; i < a.cols; ++i) {
      const double aki = arow[i];
      double* crow = c.row(i);
      for (std::size_t j = 0; j < b.cols; ++j) crow[j] += aki * brow[j];
    }
  }
}

inline double squared_distance(const double* a, const double* b, std::size_t n) {
  double s = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

inline double euclidean_distance(const double* a, const double* b, std::size_t n) {
  return std::sqrt(squared_distance(a, b, n));
}

}  // namespace relmia
