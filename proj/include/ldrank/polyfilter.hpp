#pragma once

// Comparison baseline: numerical rank via the trace of an approximate
// eigenprojector. A Chebyshev expansion of the step function 1{x ≥ τ}
// (Jackson-damped against Gibbs oscillation) is applied through
// matrix-vector products and its trace is estimated with Hutchinson probes.
// The same machinery evaluates the exponential filter φ(x) = 1 − e^{−xt},
// which is the spectral function the Langevin estimator realizes exactly.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

#include "ldrank/errors.hpp"
#include "ldrank/linear_net.hpp"
#include "ldrank/matcore.hpp"
#include "ldrank/matrix.hpp"
#include "ldrank/rng.hpp"

namespace ldrank {

/// Symmetric operator exposed through products v → Hv only.
class MatVecOracle {
 public:
  virtual ~MatVecOracle() = default;
  virtual int dim() const = 0;
  virtual void apply(const Vector& in, Vector& out) const = 0;
};

class DenseMatVec final : public MatVecOracle {
 public:
  explicit DenseMatVec(SymMat m) : m_(std::move(m)) {}
  int dim() const override { return m_.dim(); }
  void apply(const Vector& in, Vector& out) const override {
    const Matrix& m = m_.dense();
    for (int i = 0; i < m.rows(); ++i) {
      const double* ri = m.row(i);
      double s = 0.0;
      for (int j = 0; j < m.cols(); ++j) s += ri[j] * in[j];
      out[i] = s;
    }
  }

 private:
  SymMat m_;
};

/// Linear-net Hessian through its Kronecker block structure; never densifies.
class PhiMatVec final : public MatVecOracle {
 public:
  explicit PhiMatVec(PhiBlocks phi) : phi_(std::move(phi)) {}
  int dim() const override { return static_cast<int>(phi_.total_rows); }
  void apply(const Vector& in, Vector& out) const override { out = hvp(phi_, in); }

 private:
  PhiBlocks phi_;
};

struct SpectralBounds {
  double min_est = 0.0;
  double max_est = 0.0;

  bool zero_operator() const { return min_est == 0.0 && max_est == 0.0; }
};

/// Power-iteration estimates of the extreme eigenvalues with a safety margin.
inline SpectralBounds estimate_spectral_bounds(const MatVecOracle& oracle, uint64_t seed,
                                               int iterations = 30, double margin = 0.05) {
  const int n = oracle.dim();
  Vector v(n), w(n);
  NormalStream(seed, 0).fill(0, v.data(), n);
  scale(v, 1.0 / norm2(v));

  auto rayleigh_of_dominant = [&](auto&& apply_op) {
    double quotient = 0.0;
    for (int it = 0; it < iterations; ++it) {
      apply_op(v, w);
      const double nrm = norm2(w);
      if (nrm < 1e-300) return 0.0;
      for (int i = 0; i < n; ++i) v[i] = w[i] / nrm;
      apply_op(v, w);
      quotient = dot(v, w);
    }
    return quotient;
  };

  const double lambda_big =
      rayleigh_of_dominant([&](const Vector& in, Vector& out) { oracle.apply(in, out); });

  NormalStream(seed, 1).fill(0, v.data(), n);
  scale(v, 1.0 / norm2(v));
  const double mu = rayleigh_of_dominant([&](const Vector& in, Vector& out) {
    oracle.apply(in, out);
    for (int i = 0; i < n; ++i) out[i] = lambda_big * in[i] - out[i];
  });
  const double lambda_small = lambda_big - mu;

  SpectralBounds b;
  const double lo = std::min(lambda_small, lambda_big);
  const double hi = std::max(lambda_small, lambda_big);
  if (lo == 0.0 && hi == 0.0) return b;  // zero operator
  const double span =
      std::max(hi - lo, 1e-8 * std::max(std::abs(hi), std::abs(lo)));
  b.min_est = lo - margin * span;
  b.max_est = hi + margin * span;
  return b;
}

struct FilterConfig {
  int degree = 50;             // polynomial degree m
  int num_probe_vectors = 300; // Hutchinson probes
  double threshold_eps = 1e-3; // step located at threshold_eps · λ_max
};

struct FilterEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

namespace detail {

/// Jackson damping factors g_0..g_m for a degree-m Chebyshev expansion.
inline std::vector<double> jackson_coefficients(int degree) {
  std::vector<double> g(degree + 1);
  const double alpha = std::numbers::pi / (degree + 2);
  for (int k = 0; k <= degree; ++k)
    g[k] = ((degree - k + 2) * std::cos(k * alpha) +
            std::sin(k * alpha) / std::tan(alpha)) /
           (degree + 2);
  return g;
}

/// Hutchinson estimate of Tr(p(H)) for the Chebyshev polynomial with the
/// given coefficients on the spectrum mapped from [a, b] to [−1, 1].
inline FilterEstimate chebyshev_trace(const MatVecOracle& oracle,
                                      const std::vector<double>& coefficients, double a,
                                      double b, int num_probes, uint64_t seed) {
  const int n = oracle.dim();
  const int degree = static_cast<int>(coefficients.size()) - 1;
  const double center = 0.5 * (a + b);
  const double half = 0.5 * (b - a);

  Vector z(n), w0(n), w1(n), w2(n), hw(n);
  const auto apply_mapped = [&](const Vector& in, Vector& out) {
    oracle.apply(in, hw);
    for (int i = 0; i < n; ++i) out[i] = (hw[i] - center * in[i]) / half;
  };

  double sum = 0.0, sumsq = 0.0;
  for (int probe = 0; probe < num_probes; ++probe) {
    NormalStream(seed, static_cast<uint64_t>(probe) + 2).fill_rademacher(0, z.data(), n);
    w0 = z;
    double acc = coefficients[0] * dot(z, w0);
    if (degree >= 1) {
      apply_mapped(w0, w1);
      acc += coefficients[1] * dot(z, w1);
    }
    for (int k = 2; k <= degree; ++k) {
      apply_mapped(w1, w2);
      for (int i = 0; i < n; ++i) w2[i] = 2.0 * w2[i] - w0[i];
      acc += coefficients[k] * dot(z, w2);
      std::swap(w0, w1);
      std::swap(w1, w2);
    }
    sum += acc;
    sumsq += acc * acc;
  }

  FilterEstimate est;
  est.mean = sum / num_probes;
  const double var = std::max(
      0.0, (sumsq - sum * sum / num_probes) / std::max(num_probes - 1, 1));
  est.stderr_ = std::sqrt(var / num_probes);
  return est;
}

}  // namespace detail

/// Rank estimate Tr(φ_m(H)) where φ_m is a Jackson-damped degree-m Chebyshev
/// approximation of the step 1{x ≥ threshold_eps·λ_max}. Intended for PSD
/// operators (documented, not enforced).
inline FilterEstimate estimate_rank_polyfilter_detailed(const MatVecOracle& oracle,
                                                        const FilterConfig& cfg,
                                                        uint64_t seed) {
  if (cfg.degree < 1 || cfg.num_probe_vectors < 1)
    throw Error("FilterConfig: degree and probe count must be >= 1");
  const SpectralBounds bounds = estimate_spectral_bounds(oracle, seed);
  // Zero or non-positive spectrum: nothing can exceed a positive threshold.
  if (bounds.zero_operator() || bounds.max_est <= 0.0) return FilterEstimate{0.0, 0.0};

  const double tau = cfg.threshold_eps * bounds.max_est;
  const double center = 0.5 * (bounds.min_est + bounds.max_est);
  const double half = 0.5 * (bounds.max_est - bounds.min_est);
  double tau_mapped = (tau - center) / half;
  tau_mapped = std::min(1.0, std::max(-1.0, tau_mapped));
  const double theta = std::acos(tau_mapped);

  const std::vector<double> jackson = detail::jackson_coefficients(cfg.degree);
  std::vector<double> coef(cfg.degree + 1);
  coef[0] = jackson[0] * theta / std::numbers::pi;
  for (int k = 1; k <= cfg.degree; ++k)
    coef[k] = jackson[k] * 2.0 * std::sin(k * theta) / (k * std::numbers::pi);

  return detail::chebyshev_trace(oracle, coef, bounds.min_est, bounds.max_est,
                                 cfg.num_probe_vectors, seed);
}

inline double estimate_rank_polyfilter(const MatVecOracle& oracle, const FilterConfig& cfg,
                                       uint64_t seed) {
  return estimate_rank_polyfilter_detailed(oracle, cfg, seed).mean;
}

/// Hutchinson estimate of Tr(I − e^{−Ht}) through a Chebyshev expansion of
/// 1 − e^{−xt} on the estimated spectral interval. Coefficients come from
/// Chebyshev-Gauss quadrature, so any smooth decay rate t is handled.
inline FilterEstimate exponential_filter_trace_detailed(const MatVecOracle& oracle, double t,
                                                        int num_probes, uint64_t seed,
                                                        int degree = 300) {
  if (!(t >= 0.0)) throw Error("exponential_filter_trace: t must be >= 0");
  const SpectralBounds bounds = estimate_spectral_bounds(oracle, seed);
  if (bounds.zero_operator()) return FilterEstimate{0.0, 0.0};  // Tr(I − e⁰) = 0
  const double center = 0.5 * (bounds.min_est + bounds.max_est);
  const double half = 0.5 * (bounds.max_est - bounds.min_est);

  const int quad_nodes = std::max(512, 4 * degree);
  std::vector<double> fvals(quad_nodes);
  for (int j = 0; j < quad_nodes; ++j) {
    const double theta = std::numbers::pi * (j + 0.5) / quad_nodes;
    const double x = center + half * std::cos(theta);
    fvals[j] = 1.0 - std::exp(-t * x);
  }
  std::vector<double> coef(degree + 1, 0.0);
  for (int k = 0; k <= degree; ++k) {
    double s = 0.0;
    for (int j = 0; j < quad_nodes; ++j)
      s += fvals[j] * std::cos(k * std::numbers::pi * (j + 0.5) / quad_nodes);
    coef[k] = (k == 0 ? 1.0 : 2.0) * s / quad_nodes;
  }

  return detail::chebyshev_trace(oracle, coef, bounds.min_est, bounds.max_est, num_probes,
                                 seed);
}

inline double exponential_filter_trace(const MatVecOracle& oracle, double t, int num_probes,
                                       uint64_t seed, int degree = 300) {
  return exponential_filter_trace_detailed(oracle, t, num_probes, seed, degree).mean;
}

}  // namespace ldrank
