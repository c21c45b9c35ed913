#pragma once

// Seeded Euler-Maruyama integrator for preconditioned Langevin dynamics
//
//   θ_{k+1} = θ_k − η G ∇L(θ_k) + √η B n_{k+1},   B = G Σ^{1/2}
//
// over pluggable gradient oracles, plus ensemble statistics for Monte-Carlo
// verification of the closed forms. Noise is counter-based: a path's
// trajectory is a pure function of (seed, path index), so ensembles are
// reproducible for any thread count.

#include <cmath>
#include <cstdint>
#include <vector>

#include "ldrank/errors.hpp"
#include "ldrank/gradient_oracle.hpp"
#include "ldrank/matrix.hpp"
#include "ldrank/rng.hpp"
#include "ldrank/spd_operator.hpp"
#include "ldrank/threads.hpp"

namespace ldrank {

/// Losses above this are treated as divergence (blow-up is recorded, not fatal).
inline constexpr double kDivergenceThreshold = 1e12;

struct SimConfig {
  double stepsize = 1e-3;    // η > 0
  long num_steps = 1;        // K_tot >= 1
  SpdOperator precond;       // G
  SpdOperator noise_cov;     // Σ
  uint64_t seed = 0;
  long record_every = 1;
  // When false, G multiplies the gradient only and the noise enters as
  // √η Σ^{1/2} n (the variant SDE); results then match the preconditioned
  // form with Σ replaced by G⁻¹ΣG⁻¹.
  bool precondition_noise = true;

  SimConfig() : precond(SpdOperator::identity(1)), noise_cov(SpdOperator::identity(1)) {}
  SimConfig(double eta, long steps, SpdOperator g, SpdOperator sigma, uint64_t seed_ = 0,
            long record_every_ = 1)
      : stepsize(eta),
        num_steps(steps),
        precond(std::move(g)),
        noise_cov(std::move(sigma)),
        seed(seed_),
        record_every(record_every_) {}
};

struct Trajectory {
  std::vector<long> steps;
  std::vector<double> losses;  // loss at θ_k for each recorded step k
  Vector final_theta;
  bool diverged = false;
  long diverged_step = -1;
};

namespace detail {

inline void validate_sim_config(const SimConfig& cfg, int oracle_dim) {
  if (!(cfg.stepsize > 0.0)) throw Error("SimConfig: stepsize must be positive");
  if (cfg.num_steps < 1) throw Error("SimConfig: num_steps must be >= 1");
  if (cfg.record_every < 1) throw Error("SimConfig: record_every must be >= 1");
  if (cfg.precond.dim() != oracle_dim || cfg.noise_cov.dim() != oracle_dim)
    throw DimensionMismatch("SimConfig: operator dims do not match oracle dim");
}

inline LinearMap noise_transform(const SimConfig& cfg) {
  const SpdOperator sigma_sqrt = cfg.noise_cov.sqrt();
  return cfg.precondition_noise ? LinearMap::product(cfg.precond, sigma_sqrt)
                                : LinearMap::from(sigma_sqrt);
}

}  // namespace detail

/// One discrete update with externally supplied standard-normal noise.
inline Vector step(const Vector& theta, const GradientOracle& oracle, const SimConfig& cfg,
                   const Vector& noise) {
  const int n = oracle.dim();
  detail::validate_sim_config(cfg, n);
  if (static_cast<int>(theta.size()) != n || static_cast<int>(noise.size()) != n)
    throw DimensionMismatch("step: vector length mismatch");

  Vector grad(n), scratch(n);
  oracle.loss_and_grad(theta, grad);
  Vector next = theta;
  cfg.precond.apply(grad, scratch);
  add_scaled(next, -cfg.stepsize, scratch);
  const LinearMap b = detail::noise_transform(cfg);
  b.apply(noise.data(), scratch.data());
  add_scaled(next, std::sqrt(cfg.stepsize), scratch);
  return next;
}

/// Integrates num_steps updates. Deterministic given (cfg.seed, stream).
/// Losses are recorded at step indices 0, record_every, 2·record_every, ...
/// (including the final step when it falls on the grid). If the loss exceeds
/// the divergence threshold or becomes non-finite, the offending value is
/// recorded, the diverged flag is set, and integration stops.
inline Trajectory run(const Vector& theta0, const GradientOracle& oracle, const SimConfig& cfg,
                      uint64_t stream = 0) {
  const int n = oracle.dim();
  detail::validate_sim_config(cfg, n);
  if (static_cast<int>(theta0.size()) != n)
    throw DimensionMismatch("run: theta0 length mismatch");

  const LinearMap noise_map = detail::noise_transform(cfg);
  const NormalStream normals(cfg.seed, stream);
  const double sqrt_eta = std::sqrt(cfg.stepsize);

  Trajectory traj;
  Vector theta = theta0;
  Vector grad(n), noise(n), scratch(n);

  for (long k = 0; k < cfg.num_steps; ++k) {
    const double loss = oracle.loss_and_grad(theta, grad);
    const bool bad = !std::isfinite(loss) || loss > kDivergenceThreshold;
    if (k % cfg.record_every == 0 || bad) {
      traj.steps.push_back(k);
      traj.losses.push_back(loss);
    }
    if (bad) {
      traj.diverged = true;
      traj.diverged_step = k;
      traj.final_theta = std::move(theta);
      return traj;
    }
    normals.fill(static_cast<uint64_t>(k), noise.data(), n);
    cfg.precond.apply(grad, scratch);
    add_scaled(theta, -cfg.stepsize, scratch);
    noise_map.apply(noise.data(), scratch.data());
    add_scaled(theta, sqrt_eta, scratch);
  }

  const double final_loss = oracle.loss(theta);
  if (cfg.num_steps % cfg.record_every == 0) {
    traj.steps.push_back(cfg.num_steps);
    traj.losses.push_back(final_loss);
  }
  if (!std::isfinite(final_loss) || final_loss > kDivergenceThreshold) {
    traj.diverged = true;
    traj.diverged_step = cfg.num_steps;
  }
  traj.final_theta = std::move(theta);
  return traj;
}

struct EnsembleStats {
  std::vector<long> steps;
  Vector mean_losses;
  Vector stderrs;
  long num_paths = 0;
};

/// Mean and standard error of the recorded loss over num_paths independent
/// paths. Path p uses noise stream p of cfg.seed, and the reduction runs in
/// path order after all paths finish, so the result is independent of the
/// evaluation order and of the degree of parallelism.
inline EnsembleStats ensemble_mean_loss(const Vector& theta0, const GradientOracle& oracle,
                                        const SimConfig& cfg, long num_paths,
                                        int num_threads = 0) {
  if (num_paths < 2) throw Error("ensemble_mean_loss: num_paths must be >= 2");
  detail::validate_sim_config(cfg, oracle.dim());

  const long records = cfg.num_steps / cfg.record_every + 1;
  std::vector<double> table(static_cast<size_t>(num_paths) * records);
  std::vector<long> steps;

  {
    // Record grid probed once; all non-diverging paths share it.
    Trajectory probe = run(theta0, oracle, cfg, 0);
    if (probe.diverged) throw DivergedError(probe.diverged_step, probe.losses);
    steps = probe.steps;
    for (long r = 0; r < records; ++r) table[r] = probe.losses[r];
  }

  parallel_for(1, num_paths, num_threads, [&](long p) {
    Trajectory traj = run(theta0, oracle, cfg, static_cast<uint64_t>(p));
    if (traj.diverged) throw DivergedError(traj.diverged_step, traj.losses);
    double* row = table.data() + static_cast<size_t>(p) * records;
    for (long r = 0; r < records; ++r) row[r] = traj.losses[r];
  });

  EnsembleStats stats;
  stats.steps = std::move(steps);
  stats.num_paths = num_paths;
  stats.mean_losses.resize(records);
  stats.stderrs.resize(records);
  for (long r = 0; r < records; ++r) {
    double sum = 0.0;
    for (long p = 0; p < num_paths; ++p) sum += table[static_cast<size_t>(p) * records + r];
    const double mean = sum / static_cast<double>(num_paths);
    double sq = 0.0;
    for (long p = 0; p < num_paths; ++p) {
      const double d = table[static_cast<size_t>(p) * records + r] - mean;
      sq += d * d;
    }
    stats.mean_losses[r] = mean;
    stats.stderrs[r] =
        std::sqrt(sq / (static_cast<double>(num_paths) - 1.0) / static_cast<double>(num_paths));
  }
  return stats;
}

}  // namespace ldrank
