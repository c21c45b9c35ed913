#pragma once

// Hessian rank estimation by preconditioned Langevin dynamics. With a fixed
// SPD preconditioner G and noise covariance Σ = σ²G⁻¹, the steady expected
// loss near a minimum is σ²·rank(H)/4 independently of G, so
//
//   r̂ = (4/σ²) (⟨L(θ_t)⟩_K − L(θ₀))
//
// estimates the rank from the averaged tail of the loss series. Also houses
// the first-step stochastic trace estimator and the Adam-style diagonal
// preconditioner construction.

#include <cmath>
#include <cstdint>
#include <utility>

#include "ldrank/errors.hpp"
#include "ldrank/gradient_oracle.hpp"
#include "ldrank/langevin.hpp"
#include "ldrank/matcore.hpp"
#include "ldrank/rng.hpp"
#include "ldrank/spd_operator.hpp"

namespace ldrank {

struct RankConfig {
  double sigma2 = 1e-2;  // σ² > 0
  long k_tot = 150000;   // total iterations
  long k_avg = 100000;   // averaging window, k_avg <= k_tot
  double stepsize = 1e-3;
  uint64_t seed = 0;
  // G: identity, Adam-like diagonal, or a fixed dense SPD matrix.
  SpdOperator precond = SpdOperator::identity(1);
};

struct RankEstimate {
  double avg_loss = 0.0;       // ⟨L(θ_t)⟩ over the last k_avg iterations
  double base_loss = 0.0;      // L(θ₀), evaluated once and noiselessly
  double r_hat = 0.0;          // (4/σ²)(avg_loss − base_loss)
  long r_rounded = 0;          // round(max(r_hat, 0)), half away from zero
  Vector loss_series;          // loss at every iteration (step 0 .. k_tot)
  bool settled = true;         // halves of the window agree within 5%
  double window_stderr = 0.0;  // naive stderr of the windowed loss
};

namespace detail {

inline void validate_rank_config(const RankConfig& cfg, int oracle_dim) {
  if (!(cfg.sigma2 > 0.0)) throw Error("RankConfig: sigma2 must be positive");
  if (cfg.k_tot < 1) throw Error("RankConfig: k_tot must be >= 1");
  if (cfg.k_avg < 1 || cfg.k_avg > cfg.k_tot)
    throw Error("RankConfig: need 1 <= k_avg <= k_tot");
  if (!(cfg.stepsize > 0.0)) throw Error("RankConfig: stepsize must be positive");
  if (cfg.precond.dim() != oracle_dim)
    throw DimensionMismatch("RankConfig: preconditioner dim does not match oracle");
}

}  // namespace detail

/// Runs the estimation chain from theta0 (at or near a minimum of the
/// oracle's loss). The noise covariance is set to σ²G⁻¹ internally. Throws
/// DivergedError (carrying the partial loss series) if the loss blows up.
inline RankEstimate estimate_rank(const Vector& theta0, const GradientOracle& oracle,
                                  const RankConfig& cfg) {
  detail::validate_rank_config(cfg, oracle.dim());

  SimConfig sim(cfg.stepsize, cfg.k_tot, cfg.precond, cfg.precond.inverse().scaled(cfg.sigma2),
                cfg.seed, /*record_every=*/1);
  Trajectory traj = run(theta0, oracle, sim);
  if (traj.diverged) throw DivergedError(traj.diverged_step, traj.losses);

  RankEstimate est;
  est.base_loss = oracle.loss(theta0);
  est.loss_series = std::move(traj.losses);

  // Window = losses at iterations (k_tot − k_avg, k_tot]; the series holds
  // one entry per step index 0..k_tot.
  const long first = cfg.k_tot - cfg.k_avg + 1;
  double sum = 0.0;
  for (long k = first; k <= cfg.k_tot; ++k) sum += est.loss_series[k];
  est.avg_loss = sum / static_cast<double>(cfg.k_avg);

  const long half = cfg.k_avg / 2;
  if (half >= 1) {
    double sum1 = 0.0, sum2 = 0.0;
    for (long k = first; k < first + half; ++k) sum1 += est.loss_series[k];
    for (long k = cfg.k_tot - half + 1; k <= cfg.k_tot; ++k) sum2 += est.loss_series[k];
    const double m1 = sum1 / half, m2 = sum2 / half;
    const double denom = std::max(std::abs(m1), std::abs(m2));
    est.settled = denom == 0.0 || std::abs(m1 - m2) <= 0.05 * denom;
  }

  double sq = 0.0;
  for (long k = first; k <= cfg.k_tot; ++k) {
    const double d = est.loss_series[k] - est.avg_loss;
    sq += d * d;
  }
  est.window_stderr = std::sqrt(sq / std::max<long>(cfg.k_avg - 1, 1)) /
                      std::sqrt(static_cast<double>(cfg.k_avg));

  est.r_hat = 4.0 / cfg.sigma2 * (est.avg_loss - est.base_loss);
  est.r_rounded = std::lround(std::max(est.r_hat, 0.0));
  return est;
}

struct TraceEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
  long num_probes = 0;
};

/// Hessian-trace estimate from first-step loss increments at a minimum:
/// Tr(H) ≈ (2/η) ⟨ f(θ₀ + √η n) − f(θ₀) ⟩ over standard-normal probes n.
inline TraceEstimate estimate_trace_detailed(const Vector& theta0, const GradientOracle& oracle,
                                             double eta, long num_probes, uint64_t seed) {
  if (!(eta > 0.0)) throw Error("estimate_trace: eta must be positive");
  if (num_probes < 1) throw Error("estimate_trace: need at least one probe");
  const int n = oracle.dim();
  const double base = oracle.loss(theta0);
  const double sqrt_eta = std::sqrt(eta);

  Vector probe(n), shifted(n);
  double sum = 0.0, sumsq = 0.0;
  for (long j = 0; j < num_probes; ++j) {
    NormalStream(seed, static_cast<uint64_t>(j)).fill(0, probe.data(), n);
    for (int i = 0; i < n; ++i) shifted[i] = theta0[i] + sqrt_eta * probe[i];
    const double value = 2.0 * (oracle.loss(shifted) - base) / eta;
    sum += value;
    sumsq += value * value;
  }
  TraceEstimate est;
  est.num_probes = num_probes;
  est.mean = sum / static_cast<double>(num_probes);
  const double var =
      std::max(0.0, (sumsq - sum * sum / static_cast<double>(num_probes)) /
                        std::max<double>(static_cast<double>(num_probes) - 1.0, 1.0));
  est.stderr_ = std::sqrt(var / static_cast<double>(num_probes));
  return est;
}

inline double estimate_trace(const Vector& theta0, const GradientOracle& oracle, double eta,
                             long num_probes, uint64_t seed) {
  return estimate_trace_detailed(theta0, oracle, eta, num_probes, seed).mean;
}

/// Adam-like diagonal preconditioner G = diag(1 / (√v_i + ε)) from
/// second-moment accumulators v.
inline SpdMat make_adam_preconditioner(const Vector& second_moments, double epsilon = 1e-8) {
  if (!(epsilon > 0.0)) throw Error("make_adam_preconditioner: epsilon must be positive");
  Vector d(second_moments.size());
  for (size_t i = 0; i < second_moments.size(); ++i) {
    if (second_moments[i] < 0.0)
      throw Error("make_adam_preconditioner: second moments must be non-negative");
    d[i] = 1.0 / (std::sqrt(second_moments[i]) + epsilon);
  }
  return SpdMat::diagonal(d);
}

/// Adam pre-pass with zero momentum (β₁ = 0): runs num_steps updates from
/// theta0 and returns the bias-corrected second-moment estimate. The
/// preconditioner built from it is frozen before rank estimation starts.
inline Vector adam_second_moments(const GradientOracle& oracle, Vector theta, long num_steps,
                                  double beta2 = 0.999, double lr = 1e-3) {
  const int n = oracle.dim();
  Vector v(n, 0.0), grad(n);
  for (long k = 0; k < num_steps; ++k) {
    oracle.loss_and_grad(theta, grad);
    for (int i = 0; i < n; ++i) {
      v[i] = beta2 * v[i] + (1.0 - beta2) * grad[i] * grad[i];
      const double vhat = v[i] / (1.0 - std::pow(beta2, static_cast<double>(k + 1)));
      theta[i] -= lr * grad[i] / (std::sqrt(vhat) + 1e-8);
    }
  }
  const double correction = 1.0 - std::pow(beta2, static_cast<double>(num_steps));
  for (double& vi : v) vi /= correction;
  return v;
}

}  // namespace ldrank
