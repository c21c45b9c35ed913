#pragma once

// Dense row-major matrices and small vector helpers. Everything in this
// library works at desk scale (n up to a few thousand), so the storage is a
// single contiguous buffer and the products are plain triple loops.

#include <algorithm>
#include <cmath>
#include <initializer_list>
#include <vector>

#include "ldrank/errors.hpp"

namespace ldrank {

using Vector = std::vector<double>;

class Matrix {
 public:
  Matrix() = default;

  Matrix(int rows, int cols)
      : rows_(rows), cols_(cols), data_(static_cast<size_t>(rows) * cols, 0.0) {
    if (rows < 0 || cols < 0) throw DimensionMismatch("negative matrix dimension");
  }

  static Matrix identity(int n) {
    Matrix m(n, n);
    for (int i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
  }

  static Matrix from_rows(std::initializer_list<std::initializer_list<double>> rows) {
    const int r = static_cast<int>(rows.size());
    const int c = r > 0 ? static_cast<int>(rows.begin()->size()) : 0;
    Matrix m(r, c);
    int i = 0;
    for (const auto& row : rows) {
      if (static_cast<int>(row.size()) != c)
        throw DimensionMismatch("ragged initializer for Matrix");
      int j = 0;
      for (double v : row) m(i, j++) = v;
      ++i;
    }
    return m;
  }

  int rows() const { return rows_; }
  int cols() const { return cols_; }

  double& operator()(int i, int j) { return data_[static_cast<size_t>(i) * cols_ + j]; }
  double operator()(int i, int j) const { return data_[static_cast<size_t>(i) * cols_ + j]; }

  double* row(int i) { return data_.data() + static_cast<size_t>(i) * cols_; }
  const double* row(int i) const { return data_.data() + static_cast<size_t>(i) * cols_; }

  const Vector& data() const { return data_; }

  Matrix transposed() const {
    Matrix t(cols_, rows_);
    for (int i = 0; i < rows_; ++i)
      for (int j = 0; j < cols_; ++j) t(j, i) = (*this)(i, j);
    return t;
  }

  double trace() const {
    double s = 0.0;
    for (int i = 0; i < std::min(rows_, cols_); ++i) s += (*this)(i, i);
    return s;
  }

  double frobenius_norm() const {
    double s = 0.0;
    for (double v : data_) s += v * v;
    return std::sqrt(s);
  }

  double max_abs() const {
    double m = 0.0;
    for (double v : data_) m = std::max(m, std::abs(v));
    return m;
  }

  Matrix& operator+=(const Matrix& o) {
    check_same_shape(o);
    for (size_t i = 0; i < data_.size(); ++i) data_[i] += o.data_[i];
    return *this;
  }

  Matrix& operator-=(const Matrix& o) {
    check_same_shape(o);
    for (size_t i = 0; i < data_.size(); ++i) data_[i] -= o.data_[i];
    return *this;
  }

  Matrix& operator*=(double s) {
    for (double& v : data_) v *= s;
    return *this;
  }

  friend Matrix operator+(Matrix a, const Matrix& b) { return a += b; }
  friend Matrix operator-(Matrix a, const Matrix& b) { return a -= b; }
  friend Matrix operator*(double s, Matrix m) { return m *= s; }
  friend Matrix operator*(Matrix m, double s) { return m *= s; }

  friend Matrix operator*(const Matrix& a, const Matrix& b) {
    if (a.cols_ != b.rows_) throw DimensionMismatch("matrix product shape mismatch");
    Matrix c(a.rows_, b.cols_);
    for (int i = 0; i < a.rows_; ++i) {
      double* ci = c.row(i);
      const double* ai = a.row(i);
      for (int k = 0; k < a.cols_; ++k) {
        const double aik = ai[k];
        if (aik == 0.0) continue;
        const double* bk = b.row(k);
        for (int j = 0; j < b.cols_; ++j) ci[j] += aik * bk[j];
      }
    }
    return c;
  }

  /// y = M x
  Vector apply(const Vector& x) const {
    if (static_cast<int>(x.size()) != cols_)
      throw DimensionMismatch("matrix-vector shape mismatch");
    Vector y(rows_, 0.0);
    for (int i = 0; i < rows_; ++i) {
      const double* ri = row(i);
      double s = 0.0;
      for (int j = 0; j < cols_; ++j) s += ri[j] * x[j];
      y[i] = s;
    }
    return y;
  }

  /// y = Mᵀ x
  Vector apply_transposed(const Vector& x) const {
    if (static_cast<int>(x.size()) != rows_)
      throw DimensionMismatch("matrix-vector shape mismatch");
    Vector y(cols_, 0.0);
    for (int i = 0; i < rows_; ++i) {
      const double* ri = row(i);
      const double xi = x[i];
      for (int j = 0; j < cols_; ++j) y[j] += ri[j] * xi;
    }
    return y;
  }

 private:
  void check_same_shape(const Matrix& o) const {
    if (rows_ != o.rows_ || cols_ != o.cols_)
      throw DimensionMismatch("matrix shape mismatch");
  }

  int rows_ = 0, cols_ = 0;
  Vector data_;
};

inline double dot(const Vector& a, const Vector& b) {
  double s = 0.0;
  for (size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

inline double norm2(const Vector& a) { return std::sqrt(dot(a, a)); }

/// y += alpha * x
inline void add_scaled(Vector& y, double alpha, const Vector& x) {
  for (size_t i = 0; i < y.size(); ++i) y[i] += alpha * x[i];
}

inline void scale(Vector& y, double alpha) {
  for (double& v : y) v *= alpha;
}

/// Tr(A B) without forming the product.
inline double product_trace(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows() || a.rows() != b.cols())
    throw DimensionMismatch("product trace shape mismatch");
  double s = 0.0;
  for (int i = 0; i < a.rows(); ++i)
    for (int j = 0; j < a.cols(); ++j) s += a(i, j) * b(j, i);
  return s;
}

inline double relative_frobenius_error(const Matrix& got, const Matrix& want) {
  const double denom = want.frobenius_norm();
  const double err = (got - want).frobenius_norm();
  return denom > 0.0 ? err / denom : err;
}

}  // namespace ldrank
