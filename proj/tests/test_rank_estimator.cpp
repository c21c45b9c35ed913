#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ldrank/linear_net.hpp"
#include "ldrank/ou_analytics.hpp"
#include "ldrank/random_matrices.hpp"
#include "ldrank/rank_estimator.hpp"
#include "ldrank/threads.hpp"

using namespace ldrank;

namespace {

/// Rotated PSD Hessian with the given rank and nonzero eigenvalues in
/// [5, 10]; that spectrum keeps the window fluctuation of r̂ well inside
/// rounding distance at the stepsizes used here.
SymMat test_hessian(int n, int rank, uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_psd_with_rank(n, rank, rng, 5.0, 10.0);
}

}  // namespace

TEST_CASE("estimate_rank: flat loss gives rank zero", "[rank]") {
  const QuadraticOracle oracle(SymMat::zero(6));
  RankConfig cfg;
  cfg.sigma2 = 1e-2;
  cfg.k_tot = 2000;
  cfg.k_avg = 1000;
  cfg.stepsize = 1e-3;
  cfg.precond = SpdOperator::identity(6);
  const RankEstimate est = estimate_rank(Vector(6, 0.0), oracle, cfg);
  CHECK(est.r_hat == Catch::Approx(0.0).margin(1e-9));
  CHECK(est.r_rounded == 0);
  CHECK(est.settled);
  CHECK(est.base_loss == 0.0);
  CHECK(est.loss_series.size() == static_cast<size_t>(cfg.k_tot) + 1);
}

TEST_CASE("estimate_rank: config validation", "[rank]") {
  const QuadraticOracle oracle(SymMat::zero(3));
  RankConfig cfg;
  cfg.precond = SpdOperator::identity(3);
  cfg.k_avg = cfg.k_tot + 1;
  CHECK_THROWS_AS(estimate_rank(Vector(3, 0.0), oracle, cfg), Error);
  cfg.k_avg = cfg.k_tot;
  cfg.sigma2 = 0.0;
  CHECK_THROWS_AS(estimate_rank(Vector(3, 0.0), oracle, cfg), Error);
  cfg.sigma2 = 1e-2;
  cfg.precond = SpdOperator::identity(4);
  CHECK_THROWS_AS(estimate_rank(Vector(3, 0.0), oracle, cfg), DimensionMismatch);
}

TEST_CASE("estimate_rank: r_hat and rounding honor their defining identities", "[rank]") {
  const QuadraticOracle oracle(test_hessian(8, 3, 1));
  RankConfig cfg;
  cfg.sigma2 = 1e-2;
  cfg.k_tot = 20000;
  cfg.k_avg = 10000;
  cfg.stepsize = 1e-3;
  cfg.precond = SpdOperator::identity(8);
  const RankEstimate est = estimate_rank(Vector(8, 0.0), oracle, cfg);
  CHECK(est.r_hat == 4.0 / cfg.sigma2 * (est.avg_loss - est.base_loss));
  CHECK(est.r_rounded == std::lround(std::max(est.r_hat, 0.0)));
}

TEST_CASE("estimate_rank: diagonal rank-7 Hessian recovered exactly over 10 seeds",
          "[rank][heavy]") {
  const int n = 20;
  Vector diag_entries(n, 0.0);
  std::mt19937_64 rng(401);
  for (int i = 0; i < 7; ++i) diag_entries[i] = 5.0 + 5.0 * uniform01(rng);
  const QuadraticOracle oracle(SymMat::diagonal(diag_entries));

  std::vector<long> results(10);
  parallel_for(0, 10, 0, [&](long seed) {
    RankConfig cfg;
    cfg.sigma2 = 1e-2;
    cfg.k_tot = 150000;
    cfg.k_avg = 100000;
    cfg.stepsize = 1e-3;
    cfg.seed = static_cast<uint64_t>(seed);
    cfg.precond = SpdOperator::identity(n);
    results[seed] = estimate_rank(Vector(n, 0.0), oracle, cfg).r_rounded;
  });
  for (long r : results) CHECK(r == 7);
}

TEST_CASE("estimate_rank: deep linear net at paper hyperparameters", "[rank][heavy]") {
  const int d = 8, depth = 5;
  std::vector<double> r_hats(20);
  parallel_for(0, 20, 0, [&](long trial) {
    const Matrix target = random_target(d, d, 9000 + trial);
    const LinearNet net = init_at_global_minimum(depth, d, d, target, 500 + trial);
    const LinearNetOracle oracle = population_oracle(net);
    RankConfig cfg;
    cfg.sigma2 = 2e-5;
    cfg.stepsize = 1e-4;
    cfg.k_tot = 15000;
    cfg.k_avg = 10000;
    cfg.seed = static_cast<uint64_t>(trial);
    cfg.precond = SpdOperator::identity(oracle.dim());
    r_hats[trial] = estimate_rank(net.pack(), oracle, cfg).r_hat;
  });
  double mean = 0.0;
  for (double r : r_hats) mean += r;
  mean /= r_hats.size();
  CHECK(std::abs(mean - 64.0) / 64.0 < 0.07);
}

TEST_CASE("estimate_rank: unsettled window is reported", "[rank]") {
  // A slow mode still rising through the whole window.
  const QuadraticOracle oracle(SymMat::diagonal({0.05, 0.05, 0.05}));
  RankConfig cfg;
  cfg.sigma2 = 1e-2;
  cfg.k_tot = 2000;
  cfg.k_avg = 2000;
  cfg.stepsize = 1e-3;
  cfg.precond = SpdOperator::identity(3);
  const RankEstimate est = estimate_rank(Vector(3, 0.0), oracle, cfg);
  CHECK_FALSE(est.settled);
}

TEST_CASE("estimate_rank: divergence carries the partial series", "[rank]") {
  const QuadraticOracle oracle(SymMat::diagonal({400.0, 1.0}));
  RankConfig cfg;
  cfg.sigma2 = 1e-2;
  cfg.k_tot = 10000;
  cfg.k_avg = 5000;
  cfg.stepsize = 0.1;  // η λ_max = 40 ≫ 2
  cfg.precond = SpdOperator::identity(2);
  try {
    estimate_rank(Vector(2, 0.0), oracle, cfg);
    FAIL("expected DivergedError");
  } catch (const DivergedError& e) {
    CHECK(e.step() > 0);
    CHECK(e.step() < 100);
    CHECK_FALSE(e.partial_losses().empty());
  }
}

TEST_CASE("estimate_rank: closed-form steady state cross-check", "[rank][heavy]") {
  const int n = 12;
  const SymMat h = test_hessian(n, 5, 2);
  const QuadraticOracle oracle(h);
  RankConfig cfg;
  cfg.sigma2 = 1e-2;
  cfg.k_tot = 150000;
  cfg.k_avg = 100000;
  cfg.stepsize = 1e-3;
  cfg.precond = SpdOperator::identity(n);
  const RankEstimate est = estimate_rank(Vector(n, 0.0), oracle, cfg);

  const OuSystem sys(SpdMat::identity(n), h, SpdMat::identity(n, cfg.sigma2));
  const double steady = steady_state_loss(sys);
  CHECK(est.avg_loss == Catch::Approx(steady).epsilon(0.05));
}

TEST_CASE("estimate_rank: σ² linearity and preconditioner invariance", "[rank][heavy]") {
  const int n = 24;
  const SymMat h = test_hessian(n, 9, 3);
  const QuadraticOracle oracle(h);
  REQUIRE(numeric_rank(h) == 9);

  RankConfig cfg;
  cfg.sigma2 = 1e-2;
  cfg.k_tot = 200000;
  cfg.k_avg = 150000;
  cfg.stepsize = 1e-3;
  cfg.precond = SpdOperator::identity(n);
  const RankEstimate base = estimate_rank(Vector(n, 0.0), oracle, cfg);
  CHECK(base.r_rounded == 9);

  RankConfig doubled = cfg;
  doubled.sigma2 = 2e-2;
  const RankEstimate twice = estimate_rank(Vector(n, 0.0), oracle, doubled);
  CHECK(twice.r_rounded == 9);
  CHECK((twice.avg_loss - twice.base_loss) / (base.avg_loss - base.base_loss) ==
        Catch::Approx(2.0).epsilon(0.05));

  std::mt19937_64 rng(402);
  Vector d(n);
  for (double& v : d) v = 0.5 + 1.5 * uniform01(rng);
  RankConfig diag_cfg = cfg;
  diag_cfg.precond = SpdOperator::diagonal(d);
  const RankEstimate preconditioned = estimate_rank(Vector(n, 0.0), oracle, diag_cfg);
  CHECK(preconditioned.r_rounded == 9);
}

TEST_CASE("estimate_rank: σ² ~ c/dim guidance keeps the estimate stable", "[rank][heavy]") {
  const int n = 20;
  const SymMat h = test_hessian(n, 7, 4);
  const QuadraticOracle oracle(h);
  for (double c : {0.01, 0.1, 1.0}) {
    RankConfig cfg;
    cfg.sigma2 = c / n;
    cfg.k_tot = 150000;
    cfg.k_avg = 100000;
    cfg.stepsize = 1e-3;
    cfg.precond = SpdOperator::identity(n);
    CHECK(estimate_rank(Vector(n, 0.0), oracle, cfg).r_rounded == 7);
  }
}

TEST_CASE("estimate_trace: trivial and exact-trace cases", "[rank]") {
  {
    const QuadraticOracle oracle(SymMat(Matrix::identity(10)));
    const TraceEstimate est = estimate_trace_detailed(Vector(10, 0.0), oracle, 1e-4, 10000, 7);
    CHECK(std::abs(est.mean - 10.0) <= 3.0 * est.stderr_);
  }
  {
    const QuadraticOracle oracle(SymMat::zero(5));
    CHECK(estimate_trace(Vector(5, 0.0), oracle, 1e-4, 1000, 7) == 0.0);
  }
  {
    std::mt19937_64 rng(403);
    const SymMat h = random_psd_with_rank(16, 10, rng, 0.2, 3.0);
    const QuadraticOracle oracle(h);
    const TraceEstimate est = estimate_trace_detailed(Vector(16, 0.0), oracle, 1e-4, 10000, 8);
    CHECK(std::abs(est.mean - h.trace()) <= 3.0 * est.stderr_);
  }
}

TEST_CASE("make_adam_preconditioner: hand cases", "[rank]") {
  {
    const SpdMat g = make_adam_preconditioner({0.0, 0.0}, 1.0);
    CHECK(g(0, 0) == Catch::Approx(1.0));
    CHECK(g(1, 1) == Catch::Approx(1.0));
  }
  {
    const SpdMat g = make_adam_preconditioner({4.0, 0.0}, 1.0);
    CHECK(g(0, 0) == Catch::Approx(1.0 / 3.0));
    CHECK(g(1, 1) == Catch::Approx(1.0));
    CHECK(g(0, 1) == 0.0);
  }
  CHECK_THROWS_AS(make_adam_preconditioner({-1.0}, 1.0), Error);
}

TEST_CASE("adam preconditioner from a second-moment pre-pass matches the identity estimate",
          "[rank][heavy]") {
  const int n = 20;
  const SymMat h = test_hessian(n, 7, 5);
  const QuadraticOracle oracle(h);

  // Accumulate second moments along an Adam descent started off the minimum,
  // then freeze the preconditioner.
  std::mt19937_64 rng(404);
  Vector start(n);
  for (double& v : start) v = 0.3 * gaussian(rng);
  const Vector v = adam_second_moments(oracle, start, 1000, 0.999, 1e-3);
  const SpdMat adam_g = make_adam_preconditioner(v);
  Vector adam_diag(n);
  for (int i = 0; i < n; ++i) adam_diag[i] = adam_g(i, i);

  RankConfig cfg;
  cfg.sigma2 = 1e-2;
  cfg.k_tot = 150000;
  cfg.k_avg = 100000;
  cfg.stepsize = 1e-3;
  cfg.precond = SpdOperator::identity(n);
  const RankEstimate with_identity = estimate_rank(Vector(n, 0.0), oracle, cfg);

  // The Adam diagonal rescales the G·H spectrum, so pick the stepsize from
  // it: η · Tr⁺(GH) ≈ 0.25 keeps the discretization bias of r̂ near 0.1
  // while staying far inside the stability region.
  Matrix ghg(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j)
      ghg(i, j) = std::sqrt(adam_diag[i]) * h(i, j) * std::sqrt(adam_diag[j]);
  const EigDecomp gh_eig = sym_eig(SymMat(ghg));
  double trace_pos = 0.0;
  for (double l : gh_eig.eigenvalues)
    if (l > 1e-10 * std::abs(gh_eig.eigenvalues.back())) trace_pos += l;

  cfg.precond = SpdOperator::diagonal(adam_diag);
  cfg.stepsize = 0.25 / trace_pos;
  const RankEstimate with_adam = estimate_rank(Vector(n, 0.0), oracle, cfg);

  CHECK(with_identity.r_rounded == 7);
  CHECK(with_adam.r_rounded == with_identity.r_rounded);
}
