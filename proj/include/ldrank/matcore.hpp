#pragma once

// Symmetric / SPD matrix types with cached spectral decompositions, matrix
// functions, and matrix-free Kronecker-product operators. All types are
// immutable after construction and safe to share across threads.

#include <cmath>
#include <utility>

#include "ldrank/errors.hpp"
#include "ldrank/jacobi.hpp"
#include "ldrank/matrix.hpp"

namespace ldrank {

struct EigDecomp {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // orthonormal columns
};

/// Dense real symmetric matrix. Input is symmetrized on construction so the
/// stored entries satisfy m(i,j) == m(j,i) exactly.
class SymMat {
 public:
  explicit SymMat(const Matrix& a) : m_(a.rows(), a.cols()) {
    if (a.rows() != a.cols()) throw DimensionMismatch("SymMat requires a square matrix");
    if (a.rows() < 1) throw DimensionMismatch("SymMat requires dim >= 1");
    const int n = a.rows();
    for (int i = 0; i < n; ++i) {
      m_(i, i) = a(i, i);
      for (int j = i + 1; j < n; ++j) {
        const double v = 0.5 * (a(i, j) + a(j, i));
        m_(i, j) = m_(j, i) = v;
      }
    }
  }

  static SymMat zero(int n) { return SymMat(Matrix(n, n)); }

  static SymMat diagonal(const Vector& d) {
    Matrix m(static_cast<int>(d.size()), static_cast<int>(d.size()));
    for (size_t i = 0; i < d.size(); ++i) m(static_cast<int>(i), static_cast<int>(i)) = d[i];
    return SymMat(m);
  }

  int dim() const { return m_.rows(); }
  double operator()(int i, int j) const { return m_(i, j); }
  const Matrix& dense() const { return m_; }

  Vector apply(const Vector& x) const { return m_.apply(x); }
  double trace() const { return m_.trace(); }
  double frobenius_norm() const { return m_.frobenius_norm(); }

 private:
  Matrix m_;
};

/// Eigendecomposition of a symmetric matrix, eigenvalues ascending.
inline EigDecomp sym_eig(const SymMat& m) {
  JacobiResult r = jacobi_eigensym(m.dense());
  return EigDecomp{std::move(r.eigenvalues), std::move(r.eigenvectors)};
}

/// Symmetric positive-definite matrix with a cached eigendecomposition used
/// for matrix functions (sqrt, inverse, arbitrary powers).
class SpdMat {
 public:
  explicit SpdMat(SymMat base) : base_(std::move(base)), eig_(sym_eig(base_)) {
    if (eig_.eigenvalues.front() <= 0.0)
      throw NotPsd("SpdMat: matrix has a non-positive eigenvalue (min = " +
                   std::to_string(eig_.eigenvalues.front()) + ")");
  }

  static SpdMat identity(int n, double scale = 1.0) {
    return SpdMat::diagonal(Vector(n, scale));
  }

  /// Diagonal SPD matrix; the eigendecomposition is assembled directly.
  static SpdMat diagonal(const Vector& d) {
    const int n = static_cast<int>(d.size());
    for (double v : d)
      if (v <= 0.0) throw NotPsd("SpdMat::diagonal: non-positive entry");
    std::vector<int> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int i, int j) { return d[i] < d[j]; });
    EigDecomp e;
    e.eigenvalues.resize(n);
    e.eigenvectors = Matrix(n, n);
    for (int k = 0; k < n; ++k) {
      e.eigenvalues[k] = d[order[k]];
      e.eigenvectors(order[k], k) = 1.0;
    }
    return SpdMat(SymMat::diagonal(d), std::move(e));
  }

  int dim() const { return base_.dim(); }
  const SymMat& base() const { return base_; }
  const Matrix& dense() const { return base_.dense(); }
  const EigDecomp& eig() const { return eig_; }

  double operator()(int i, int j) const { return base_(i, j); }
  Vector apply(const Vector& x) const { return base_.apply(x); }
  double trace() const { return base_.trace(); }

  /// V diag(λ^p) Vᵀ. Negative powers are safe because all λ > 0.
  Matrix power(double p) const {
    const int n = dim();
    const Matrix& v = eig_.eigenvectors;
    Matrix out(n, n);
    for (int k = 0; k < n; ++k) {
      const double lp = std::pow(eig_.eigenvalues[k], p);
      for (int i = 0; i < n; ++i) {
        const double vik = v(i, k) * lp;
        if (vik == 0.0) continue;
        for (int j = 0; j < n; ++j) out(i, j) += vik * v(j, k);
      }
    }
    return out;
  }

  /// Same as power() but keeps the result as an SpdMat, reusing the cached
  /// eigenvectors instead of re-decomposing.
  SpdMat spd_power(double p) const {
    EigDecomp e;
    e.eigenvectors = eig_.eigenvectors;
    e.eigenvalues.resize(eig_.eigenvalues.size());
    for (size_t i = 0; i < e.eigenvalues.size(); ++i)
      e.eigenvalues[i] = std::pow(eig_.eigenvalues[i], p);
    // λ^p preserves the ascending order for p > 0 and reverses it for p < 0.
    Matrix m(dim(), dim());
    const Matrix& v = eig_.eigenvectors;
    for (int k = 0; k < dim(); ++k) {
      const double lp = e.eigenvalues[k];
      for (int i = 0; i < dim(); ++i) {
        const double vik = v(i, k) * lp;
        if (vik == 0.0) continue;
        for (int j = 0; j < dim(); ++j) m(i, j) += vik * v(j, k);
      }
    }
    if (p < 0.0) {
      std::reverse(e.eigenvalues.begin(), e.eigenvalues.end());
      Matrix vv(dim(), dim());
      for (int k = 0; k < dim(); ++k)
        for (int i = 0; i < dim(); ++i) vv(i, k) = v(i, dim() - 1 - k);
      e.eigenvectors = std::move(vv);
    }
    return SpdMat(SymMat(m), std::move(e));
  }

  SpdMat scaled(double s) const {
    if (s <= 0.0) throw NotPsd("SpdMat::scaled: scale must be positive");
    EigDecomp e;
    e.eigenvectors = eig_.eigenvectors;
    e.eigenvalues.resize(eig_.eigenvalues.size());
    for (size_t i = 0; i < e.eigenvalues.size(); ++i) e.eigenvalues[i] = s * eig_.eigenvalues[i];
    Matrix m = dense();
    m *= s;
    return SpdMat(SymMat(m), std::move(e));
  }

  SpdMat inverse() const { return spd_power(-1.0); }

 private:
  SpdMat(SymMat base, EigDecomp eig) : base_(std::move(base)), eig_(std::move(eig)) {}

  SymMat base_;
  EigDecomp eig_;
};

/// Principal square root: result · result == m.
inline SpdMat spd_sqrt(const SpdMat& m) { return m.spd_power(0.5); }

/// V diag(exp(scale·λ)) Vᵀ.
inline SymMat sym_expm(const SymMat& m, double scale) {
  const EigDecomp e = sym_eig(m);
  const int n = m.dim();
  Matrix out(n, n);
  for (int k = 0; k < n; ++k) {
    const double ek = std::exp(scale * e.eigenvalues[k]);
    for (int i = 0; i < n; ++i) {
      const double vik = e.eigenvectors(i, k) * ek;
      if (vik == 0.0) continue;
      for (int j = 0; j < n; ++j) out(i, j) += vik * e.eigenvectors(j, k);
    }
  }
  return SymMat(out);
}

/// Number of eigenvalues with |λ| above rel_tol · max|λ|. The zero matrix has
/// rank 0 by definition (the relative threshold would otherwise be vacuous).
inline int numeric_rank(const SymMat& m, double rel_tol = 1e-8) {
  if (!(rel_tol > 0.0 && rel_tol < 1.0))
    throw std::invalid_argument("numeric_rank: rel_tol must lie in (0, 1)");
  const EigDecomp e = sym_eig(m);
  double max_abs = 0.0;
  for (double l : e.eigenvalues) max_abs = std::max(max_abs, std::abs(l));
  if (max_abs == 0.0) return 0;
  const double threshold = rel_tol * max_abs;
  int count = 0;
  for (double l : e.eigenvalues)
    if (std::abs(l) > threshold) ++count;
  return count;
}

/// The operator A ⊗ B applied matrix-free through the identity
/// (A ⊗ B) vec(X) = vec(B X Aᵀ), with column-major vec.
class KroneckerOp {
 public:
  KroneckerOp(Matrix left, Matrix right)
      : left_(std::move(left)), right_(std::move(right)) {}

  const Matrix& left() const { return left_; }
  const Matrix& right() const { return right_; }

  int rows() const { return left_.rows() * right_.rows(); }
  int cols() const { return left_.cols() * right_.cols(); }

  Vector apply(const Vector& x) const {
    const int q = left_.cols(), s = right_.cols();
    const int p = left_.rows(), r = right_.rows();
    if (static_cast<int>(x.size()) != q * s)
      throw DimensionMismatch("KroneckerOp::apply: input length mismatch");
    Matrix xm(s, q);
    for (int j = 0; j < q; ++j)
      for (int i = 0; i < s; ++i) xm(i, j) = x[static_cast<size_t>(j) * s + i];
    const Matrix ym = (right_ * xm) * left_.transposed();
    Vector y(static_cast<size_t>(p) * r);
    for (int j = 0; j < p; ++j)
      for (int i = 0; i < r; ++i) y[static_cast<size_t>(j) * r + i] = ym(i, j);
    return y;
  }

  KroneckerOp transposed() const {
    return KroneckerOp(left_.transposed(), right_.transposed());
  }

  /// Materializes A ⊗ B. Intended for small dimensions (tests, oracles).
  Matrix dense() const {
    const int p = left_.rows(), q = left_.cols();
    const int r = right_.rows(), s = right_.cols();
    Matrix out(p * r, q * s);
    for (int ia = 0; ia < p; ++ia)
      for (int ja = 0; ja < q; ++ja) {
        const double a = left_(ia, ja);
        if (a == 0.0) continue;
        for (int ib = 0; ib < r; ++ib)
          for (int jb = 0; jb < s; ++jb)
            out(ia * r + ib, ja * s + jb) = a * right_(ib, jb);
      }
    return out;
  }

 private:
  Matrix left_, right_;
};

}  // namespace ldrank
