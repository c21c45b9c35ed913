#pragma once

// SPD linear operators for simulation configs. A preconditioner or noise
// covariance is usually a scalar multiple of the identity or a diagonal
// matrix; representing those structurally keeps the per-step cost O(n) and
// avoids materializing n×n matrices for large parameter counts. Dense SPD
// matrices remain available for the small-dimension analytic cross-checks.

#include <cmath>
#include <memory>
#include <utility>
#include <vector>

#include "ldrank/matcore.hpp"
#include "ldrank/matrix.hpp"

namespace ldrank {

class SpdOperator {
 public:
  enum class Kind { scalar, diagonal, dense };

  static SpdOperator scaled_identity(int n, double s) {
    if (s <= 0.0) throw NotPsd("SpdOperator: scale must be positive");
    SpdOperator op;
    op.kind_ = Kind::scalar;
    op.dim_ = n;
    op.scalar_ = s;
    return op;
  }

  static SpdOperator identity(int n, double scale = 1.0) {
    return scaled_identity(n, scale);
  }

  static SpdOperator diagonal(Vector d) {
    for (double v : d)
      if (v <= 0.0) throw NotPsd("SpdOperator: diagonal entries must be positive");
    SpdOperator op;
    op.kind_ = Kind::diagonal;
    op.dim_ = static_cast<int>(d.size());
    op.diag_ = std::move(d);
    return op;
  }

  static SpdOperator dense(SpdMat m) {
    SpdOperator op;
    op.kind_ = Kind::dense;
    op.dim_ = m.dim();
    op.mat_ = std::make_shared<SpdMat>(std::move(m));
    return op;
  }

  Kind kind() const { return kind_; }
  int dim() const { return dim_; }
  double scalar() const { return scalar_; }
  const Vector& diag() const { return diag_; }
  const SpdMat& dense_mat() const { return *mat_; }

  void apply(const Vector& in, Vector& out) const {
    switch (kind_) {
      case Kind::scalar:
        for (int i = 0; i < dim_; ++i) out[i] = scalar_ * in[i];
        break;
      case Kind::diagonal:
        for (int i = 0; i < dim_; ++i) out[i] = diag_[i] * in[i];
        break;
      case Kind::dense: {
        const Matrix& m = mat_->dense();
        for (int i = 0; i < dim_; ++i) {
          const double* ri = m.row(i);
          double s = 0.0;
          for (int j = 0; j < dim_; ++j) s += ri[j] * in[j];
          out[i] = s;
        }
        break;
      }
    }
  }

  SpdOperator sqrt() const { return powered(0.5); }
  SpdOperator inverse() const { return powered(-1.0); }

  SpdOperator powered(double p) const {
    SpdOperator op;
    op.kind_ = kind_;
    op.dim_ = dim_;
    switch (kind_) {
      case Kind::scalar:
        op.scalar_ = std::pow(scalar_, p);
        break;
      case Kind::diagonal:
        op.diag_.resize(diag_.size());
        for (size_t i = 0; i < diag_.size(); ++i) op.diag_[i] = std::pow(diag_[i], p);
        break;
      case Kind::dense:
        op.mat_ = std::make_shared<SpdMat>(mat_->spd_power(p));
        break;
    }
    return op;
  }

  SpdOperator scaled(double s) const {
    if (s <= 0.0) throw NotPsd("SpdOperator: scale must be positive");
    SpdOperator op;
    op.kind_ = kind_;
    op.dim_ = dim_;
    switch (kind_) {
      case Kind::scalar:
        op.scalar_ = s * scalar_;
        break;
      case Kind::diagonal:
        op.diag_.resize(diag_.size());
        for (size_t i = 0; i < diag_.size(); ++i) op.diag_[i] = s * diag_[i];
        break;
      case Kind::dense:
        op.mat_ = std::make_shared<SpdMat>(mat_->scaled(s));
        break;
    }
    return op;
  }

  double trace() const {
    switch (kind_) {
      case Kind::scalar:
        return scalar_ * dim_;
      case Kind::diagonal: {
        double s = 0.0;
        for (double v : diag_) s += v;
        return s;
      }
      case Kind::dense:
        return mat_->trace();
    }
    return 0.0;
  }

  /// Materializes the operator as an SpdMat (small dimensions).
  SpdMat to_spd_mat() const {
    switch (kind_) {
      case Kind::scalar:
        return SpdMat::identity(dim_, scalar_);
      case Kind::diagonal:
        return SpdMat::diagonal(diag_);
      case Kind::dense:
        return *mat_;
    }
    throw Error("unreachable");
  }

 private:
  SpdOperator() = default;

  Kind kind_ = Kind::scalar;
  int dim_ = 0;
  double scalar_ = 1.0;
  Vector diag_;
  std::shared_ptr<const SpdMat> mat_;
};

/// Composition of two SPD operators into a single linear map (not SPD in
/// general). Used for the loop-invariant noise transform G·Σ^{1/2}.
class LinearMap {
 public:
  static LinearMap from(const SpdOperator& op) {
    LinearMap m;
    m.dim_ = op.dim();
    switch (op.kind()) {
      case SpdOperator::Kind::scalar:
        m.kind_ = Kind::scalar;
        m.scalar_ = op.scalar();
        break;
      case SpdOperator::Kind::diagonal:
        m.kind_ = Kind::diagonal;
        m.diag_ = op.diag();
        break;
      case SpdOperator::Kind::dense:
        m.kind_ = Kind::dense;
        m.mat_ = op.dense_mat().dense();
        break;
    }
    return m;
  }

  static LinearMap product(const SpdOperator& a, const SpdOperator& b) {
    if (a.dim() != b.dim()) throw DimensionMismatch("LinearMap: operator dims differ");
    LinearMap m;
    m.dim_ = a.dim();
    const bool a_dense = a.kind() == SpdOperator::Kind::dense;
    const bool b_dense = b.kind() == SpdOperator::Kind::dense;
    if (!a_dense && !b_dense) {
      if (a.kind() == SpdOperator::Kind::scalar && b.kind() == SpdOperator::Kind::scalar) {
        m.kind_ = Kind::scalar;
        m.scalar_ = a.scalar() * b.scalar();
      } else {
        m.kind_ = Kind::diagonal;
        m.diag_.resize(m.dim_);
        for (int i = 0; i < m.dim_; ++i) {
          const double av = a.kind() == SpdOperator::Kind::scalar ? a.scalar() : a.diag()[i];
          const double bv = b.kind() == SpdOperator::Kind::scalar ? b.scalar() : b.diag()[i];
          m.diag_[i] = av * bv;
        }
      }
    } else {
      m.kind_ = Kind::dense;
      const Matrix am = a.to_spd_mat().dense();
      const Matrix bm = b.to_spd_mat().dense();
      m.mat_ = am * bm;
    }
    return m;
  }

  int dim() const { return dim_; }

  void apply(const double* in, double* out) const {
    switch (kind_) {
      case Kind::scalar:
        for (int i = 0; i < dim_; ++i) out[i] = scalar_ * in[i];
        break;
      case Kind::diagonal:
        for (int i = 0; i < dim_; ++i) out[i] = diag_[i] * in[i];
        break;
      case Kind::dense:
        for (int i = 0; i < dim_; ++i) {
          const double* ri = mat_.row(i);
          double s = 0.0;
          for (int j = 0; j < dim_; ++j) s += ri[j] * in[j];
          out[i] = s;
        }
        break;
    }
  }

 private:
  enum class Kind { scalar, diagonal, dense };

  LinearMap() = default;

  Kind kind_ = Kind::scalar;
  int dim_ = 0;
  double scalar_ = 1.0;
  Vector diag_;
  Matrix mat_;
};

}  // namespace ldrank
