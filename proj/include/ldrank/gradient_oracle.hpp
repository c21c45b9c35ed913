#pragma once

#include "ldrank/matcore.hpp"
#include "ldrank/matrix.hpp"

namespace ldrank {

/// Parameter vector → (loss, gradient). Implementations must be deterministic
/// in θ and safe for concurrent read-only use.
class GradientOracle {
 public:
  virtual ~GradientOracle() = default;

  virtual int dim() const = 0;

  /// Writes the gradient into `grad` (resized by the caller) and returns the
  /// loss value.
  virtual double loss_and_grad(const Vector& theta, Vector& grad) const = 0;

  virtual double loss(const Vector& theta) const {
    Vector scratch(dim());
    return loss_and_grad(theta, scratch);
  }
};

/// loss = ½ θᵀHθ, gradient = Hθ.
class QuadraticOracle final : public GradientOracle {
 public:
  explicit QuadraticOracle(SymMat hessian) : hessian_(std::move(hessian)) {}

  int dim() const override { return hessian_.dim(); }

  double loss_and_grad(const Vector& theta, Vector& grad) const override {
    const int n = dim();
    if (static_cast<int>(theta.size()) != n || static_cast<int>(grad.size()) != n)
      throw DimensionMismatch("QuadraticOracle: parameter length mismatch");
    const Matrix& h = hessian_.dense();
    double loss = 0.0;
    for (int i = 0; i < n; ++i) {
      const double* hi = h.row(i);
      double s = 0.0;
      for (int j = 0; j < n; ++j) s += hi[j] * theta[j];
      grad[i] = s;
      loss += theta[i] * s;
    }
    return 0.5 * loss;
  }

  const SymMat& hessian() const { return hessian_; }

 private:
  SymMat hessian_;
};

}  // namespace ldrank
