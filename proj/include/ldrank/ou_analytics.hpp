#pragma once

// Closed-form expected-loss analytics for the preconditioned
// Ornstein-Uhlenbeck process
//
//   dθ_t = −G H θ_t dt + G Σ^{1/2} dn_t,
//
// with SPD preconditioner G, symmetric Hessian H (minimum or saddle) and SPD
// noise covariance Σ. The expected loss admits the closed form
//
//   E[f(θ_t)] = ¼ Tr(Σ G (I − e^{−2GHt})).
//
// G·H is never exponentiated directly: it is similar to the symmetric matrix
// G^{1/2} H G^{1/2}, whose spectral decomposition gives a real spectrum and a
// numerically stable similarity transform.

#include <cmath>
#include <limits>
#include <utility>

#include "ldrank/errors.hpp"
#include "ldrank/matcore.hpp"
#include "ldrank/matrix.hpp"

namespace ldrank {

struct OuSystem {
  SpdMat precond;    // G
  SymMat hessian;    // H
  SpdMat noise_cov;  // Σ

  OuSystem(SpdMat g, SymMat h, SpdMat sigma)
      : precond(std::move(g)), hessian(std::move(h)), noise_cov(std::move(sigma)) {
    if (precond.dim() != hessian.dim() || precond.dim() != noise_cov.dim())
      throw DimensionMismatch("OuSystem: G, H, Σ must share one dimension");
  }

  int dim() const { return precond.dim(); }
};

/// Relative eigenvalue threshold below which a mode of G·H counts as zero.
inline constexpr double kZeroTol = 1e-10;

/// Spectral data of G·H computed through the symmetric similar form:
/// eigenvalues Λ (real), transform P with GH = P Λ P⁻¹, the 0/1 projector J
/// onto strictly positive modes, and the mixed coefficients
/// c_i = (P⁻¹ Σ G P)_ii that the trace formulas contract against.
class SpectralCache {
 public:
  explicit SpectralCache(const OuSystem& sys)
      : dim_(sys.dim()),
        g_half_(sys.precond.power(0.5)),
        g_inv_half_(sys.precond.power(-0.5)) {
    const SymMat similar(g_half_ * sys.hessian.dense() * g_half_);
    EigDecomp eig = sym_eig(similar);
    eigenvalues_ = std::move(eig.eigenvalues);
    transform_ = g_half_ * eig.eigenvectors;
    inverse_transform_ = eig.eigenvectors.transposed() * g_inv_half_;

    max_abs_eig_ = 0.0;
    for (double l : eigenvalues_) max_abs_eig_ = std::max(max_abs_eig_, std::abs(l));
    projector_.resize(dim_);
    for (int i = 0; i < dim_; ++i)
      projector_[i] = eigenvalues_[i] > kZeroTol * max_abs_eig_ ? 1 : 0;

    const Matrix sigma_g = sys.noise_cov.dense() * sys.precond.dense();
    const Matrix m = inverse_transform_ * sigma_g * transform_;
    mixed_.resize(dim_);
    for (int i = 0; i < dim_; ++i) mixed_[i] = m(i, i);
    trace_sigma_g_ = sigma_g.trace();

    const EigDecomp h_eig = sym_eig(sys.hessian);
    hessian_min_eig_ = h_eig.eigenvalues.front();
    hessian_max_abs_eig_ = std::max(std::abs(h_eig.eigenvalues.front()),
                                    std::abs(h_eig.eigenvalues.back()));
  }

  int dim() const { return dim_; }
  const Vector& gh_eigenvalues() const { return eigenvalues_; }
  const Matrix& transform() const { return transform_; }
  const Matrix& inverse_transform() const { return inverse_transform_; }
  const std::vector<int>& projector() const { return projector_; }
  const Vector& mixed_coefficients() const { return mixed_; }
  double trace_sigma_g() const { return trace_sigma_g_; }
  double max_abs_eigenvalue() const { return max_abs_eig_; }
  const Matrix& precond_half() const { return g_half_; }

  bool hessian_psd() const {
    return hessian_min_eig_ >= -kZeroTol * hessian_max_abs_eig_;
  }

  bool saddle() const { return eigenvalues_.front() < -kZeroTol * max_abs_eig_; }

  /// Smallest eigenvalue of G·H counted as strictly positive, or +inf when
  /// there is none (H = 0).
  double lambda_min_pos() const {
    for (int i = 0; i < dim_; ++i)
      if (projector_[i]) return eigenvalues_[i];
    return std::numeric_limits<double>::infinity();
  }

  /// e^{−s·GH} = P e^{−sΛ} P⁻¹.
  Matrix propagator(double s) const {
    Matrix out(dim_, dim_);
    for (int k = 0; k < dim_; ++k) {
      const double e = std::exp(-s * eigenvalues_[k]);
      for (int i = 0; i < dim_; ++i) {
        const double pik = transform_(i, k) * e;
        if (pik == 0.0) continue;
        for (int j = 0; j < dim_; ++j) out(i, j) += pik * inverse_transform_(k, j);
      }
    }
    return out;
  }

  /// ¼ Σ_i c_i (1 − e^{−2λ_i t}), with numerically-zero modes skipped (their
  /// exact contribution is zero, and evaluating exp there at huge t would
  /// inject rounding noise).
  double raw_loss(double t) const {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) {
      const double l = eigenvalues_[i];
      if (std::abs(l) <= kZeroTol * max_abs_eig_) continue;
      s += mixed_[i] * (1.0 - std::exp(-2.0 * l * t));
    }
    return 0.25 * s;
  }

  double raw_loss_derivative(double t) const {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i) {
      const double l = eigenvalues_[i];
      if (std::abs(l) <= kZeroTol * max_abs_eig_) continue;
      s += mixed_[i] * l * std::exp(-2.0 * l * t);
    }
    return 0.5 * s;
  }

  double steady_loss() const {
    double s = 0.0;
    for (int i = 0; i < dim_; ++i)
      if (projector_[i]) s += mixed_[i];
    return 0.25 * s;
  }

 private:
  int dim_;
  Matrix g_half_, g_inv_half_;
  Vector eigenvalues_;
  Matrix transform_, inverse_transform_;
  std::vector<int> projector_;
  Vector mixed_;
  double trace_sigma_g_ = 0.0;
  double max_abs_eig_ = 0.0;
  double hessian_min_eig_ = 0.0;
  double hessian_max_abs_eig_ = 0.0;
};

/// E[f(θ_t)] without sign post-processing (may be a tiny negative for PSD H
/// due to round-off; goes genuinely negative for saddles).
inline double expected_loss_at_raw(const SpectralCache& cache, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error("expected_loss_at: t must be finite and >= 0");
  return cache.raw_loss(t);
}

/// E[f(θ_t)] = ¼ Tr(Σ G (I − e^{−2GHt})). For a PSD Hessian the theorem
/// guarantees a non-negative value, so round-off negatives are clamped to 0;
/// the raw value stays available through expected_loss_at_raw.
inline double expected_loss_at(const SpectralCache& cache, double t) {
  const double raw = expected_loss_at_raw(cache, t);
  return cache.hessian_psd() ? std::max(raw, 0.0) : raw;
}

inline double expected_loss_at(const OuSystem& sys, double t) {
  return expected_loss_at(SpectralCache(sys), t);
}

inline double expected_loss_at_raw(const OuSystem& sys, double t) {
  return expected_loss_at_raw(SpectralCache(sys), t);
}

/// lim_{t→∞} E[f(θ_t)] = ¼ Tr(Σ G P J P⁻¹), valid for PSD H.
inline double steady_state_loss(const SpectralCache& cache) {
  if (!cache.hessian_psd())
    throw NotPsd("steady_state_loss: Hessian has a negative eigenvalue");
  return std::max(cache.steady_loss(), 0.0);
}

inline double steady_state_loss(const OuSystem& sys) {
  return steady_state_loss(SpectralCache(sys));
}

/// ∂/∂t E[f(θ_t)] = ½ Tr(Σ G G H e^{−2GHt}). With G = Σ^{−1/2} and t = 0
/// this reduces to ½ Tr(H).
inline double loss_time_derivative(const SpectralCache& cache, double t) {
  if (!(t >= 0.0) || !std::isfinite(t)) throw Error("loss_time_derivative: t must be finite and >= 0");
  return cache.raw_loss_derivative(t);
}

inline double loss_time_derivative(const OuSystem& sys, double t) {
  return loss_time_derivative(SpectralCache(sys), t);
}

/// The unit-Frobenius preconditioner maximizing the steady expected loss:
/// G* = Σ / ‖Σ‖_F (the trace is an inner product, so the maximizer aligns
/// with the noise covariance).
inline SpdMat max_loss_preconditioner(const SpdMat& sigma) {
  return sigma.scaled(1.0 / sigma.dense().frobenius_norm());
}

struct PrecondComparison {
  double loss_identity_like;  // G₁ = √(Tr(Σ⁻¹)/n) · I
  double loss_adam_like;      // G₂ = Σ^{−1/2}
  bool predicate_holds;       // Tr(Σ) > n
};

/// Steady losses for the Frobenius-matched identity-like and Σ^{−1/2}
/// preconditioners (both with ‖G‖_F² = Tr(Σ⁻¹)). When Tr(Σ) > n the
/// identity-like loss dominates, with equality exactly at Σ ∝ I.
inline PrecondComparison compare_preconditioners(const SpdMat& sigma) {
  const int n = sigma.dim();
  double trace = 0.0, trace_inv = 0.0, trace_sqrt = 0.0;
  for (double l : sigma.eig().eigenvalues) {
    trace += l;
    trace_inv += 1.0 / l;
    trace_sqrt += std::sqrt(l);
  }
  PrecondComparison cmp;
  cmp.loss_identity_like = 0.25 * std::sqrt(trace_inv / n) * trace;
  cmp.loss_adam_like = 0.25 * trace_sqrt;
  cmp.predicate_holds = trace > static_cast<double>(n);
  return cmp;
}

/// Upper bound on the escape time from a saddle:
///   t_esc ≤ log(Tr(ΣG) / λ_min{ΣG}) / |2 λ_min{GH}|.
/// Requires a genuine saddle (λ_min{GH} < 0); throws NotSaddle otherwise.
inline double escape_time_bound(const SpectralCache& cache, const OuSystem& sys) {
  if (!cache.saddle())
    throw NotSaddle("escape_time_bound: system has no negative mode");
  // ΣG is similar to the SPD matrix G^{1/2} Σ G^{1/2}: real positive spectrum.
  const SymMat sg_similar(cache.precond_half() * sys.noise_cov.dense() * cache.precond_half());
  const double sg_min = sym_eig(sg_similar).eigenvalues.front();
  const double lambda_min_gh = cache.gh_eigenvalues().front();
  return std::log(cache.trace_sigma_g() / sg_min) / std::abs(2.0 * lambda_min_gh);
}

inline double escape_time_bound(const OuSystem& sys) {
  return escape_time_bound(SpectralCache(sys), sys);
}

/// Escaping efficiency μ_t = E[f(θ_t) − f(θ_0)] for a process started at a
/// point with loss f0.
inline double escaping_efficiency(const SpectralCache& cache, double t, double f0) {
  return expected_loss_at_raw(cache, t) - f0;
}

inline double escaping_efficiency(const OuSystem& sys, double t, double f0) {
  return escaping_efficiency(SpectralCache(sys), t, f0);
}

/// Property-test helper: with shared (G, Σ) and PSD Hessians, a lower Hessian
/// rank must not give a higher steady loss. Returns the implication
/// (rank(H₁) ≤ rank(H₂)) ⇒ (steady₁ ≤ steady₂ + 1e-9).
inline bool rank_order_check(const OuSystem& sys1, const OuSystem& sys2) {
  if (relative_frobenius_error(sys1.precond.dense(), sys2.precond.dense()) > 1e-12 ||
      relative_frobenius_error(sys1.noise_cov.dense(), sys2.noise_cov.dense()) > 1e-12)
    throw MismatchedSystems("rank_order_check: systems must share G and Σ");
  const int r1 = numeric_rank(sys1.hessian);
  const int r2 = numeric_rank(sys2.hessian);
  const double s1 = steady_state_loss(sys1);
  const double s2 = steady_state_loss(sys2);
  return !(r1 <= r2) || (s1 <= s2 + 1e-9);
}

}  // namespace ldrank
