#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace compdiff::la {

// Dense row-major matrix, minimal on purpose; heavy numerics go through Eigen
// inside the .cpp files.
struct Matrix {
  int rows = 0;
  int cols = 0;
  std::vector<double> data;  // rows * cols, row-major

  Matrix() = default;
  Matrix(int r, int c) : rows(r), cols(c), data(static_cast<std::size_t>(r) * c, 0.0) {}

  double& at(int r, int c) { return data[static_cast<std::size_t>(r) * cols + c]; }
  double at(int r, int c) const { return data[static_cast<std::size_t>(r) * cols + c]; }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = 1.0;
    return m;
  }
  static Matrix scaled_identity(int n, double s) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m.at(i, i) = s;
    return m;
  }
};

inline double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double sqnorm(std::span<const double> a) { return dot(a, a); }

// out = M x
inline void matvec(const Matrix& m, std::span<const double> x, std::span<double> out) {
  for (int r = 0; r < m.rows; ++r) {
    double s = 0.0;
    const double* row = m.data.data() + static_cast<std::size_t>(r) * m.cols;
    for (int c = 0; c < m.cols; ++c) s += row[c] * x[c];
    out[r] = s;
  }
}

// out = M^T x
inline void matvec_t(const Matrix& m, std::span<const double> x, std::span<double> out) {
  for (int c = 0; c < m.cols; ++c) out[c] = 0.0;
  for (int r = 0; r < m.rows; ++r) {
    const double* row = m.data.data() + static_cast<std::size_t>(r) * m.cols;
    for (int c = 0; c < m.cols; ++c) out[c] += row[c] * x[r];
  }
}

}  // namespace compdiff::la
