#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "ldrank/linear_net.hpp"
#include "ldrank/matcore.hpp"
#include "ldrank/random_matrices.hpp"
#include "support/test_oracles.hpp"

using namespace ldrank;

TEST_CASE("init_at_global_minimum: depth 1 stores the target verbatim", "[linear_net]") {
  const Matrix a = random_target(3, 3, 1);
  const LinearNet net = init_at_global_minimum(1, 3, 3, a, 17);
  REQUIRE(net.weights.size() == 1);
  CHECK((net.weights[0] - a).max_abs() == 0.0);
}

TEST_CASE("init_at_global_minimum: depth 2 identity target", "[linear_net]") {
  const LinearNet net = init_at_global_minimum(2, 3, 3, Matrix::identity(3), 23);
  CHECK(relative_frobenius_error(net.product(), Matrix::identity(3)) < 1e-10);
}

TEST_CASE("init_at_global_minimum: product reproduces the target across seeds",
          "[linear_net]") {
  const Matrix a = random_target(8, 8, 2);
  for (uint64_t seed = 0; seed < 100; ++seed) {
    const LinearNet net = init_at_global_minimum(5, 8, 8, a, seed);
    CHECK(relative_frobenius_error(net.product(), a) <= 1e-8);
    // Nonzero spectra of 2ΦΦᵀ and 2ΦᵀΦ coincide; the Gram route stays cheap
    // at every seed, the densified Hessian is cross-checked on a subset below.
    CHECK(numeric_rank(gram_hessian(build_phi(net))) == 64);
  }
}

TEST_CASE("dense and Gram Hessians share their nonzero spectrum and rank",
          "[linear_net][heavy]") {
  const Matrix a = random_target(8, 8, 2);
  for (uint64_t seed = 0; seed < 8; ++seed) {
    const LinearNet net = init_at_global_minimum(5, 8, 8, a, seed);
    const PhiBlocks phi = build_phi(net);
    const SymMat dense = dense_hessian(phi);
    CHECK(numeric_rank(dense) == 64);

    const EigDecomp dense_eig = sym_eig(dense);
    const EigDecomp gram_eig = sym_eig(gram_hessian(phi));
    const int n = dense.dim();
    for (int i = 0; i < 64; ++i) {
      const double from_dense = dense_eig.eigenvalues[n - 1 - i];
      const double from_gram = gram_eig.eigenvalues[64 - 1 - i];
      CHECK(from_dense == Catch::Approx(from_gram).epsilon(1e-8).margin(1e-10));
    }
  }
}

TEST_CASE("init_at_global_minimum: rectangular dimensions", "[linear_net]") {
  const Matrix a = random_target(2, 3, 3);
  const LinearNet net = init_at_global_minimum(3, 3, 2, a, 5);
  CHECK(net.hidden == 3);
  CHECK(net.product().rows() == 2);
  CHECK(net.product().cols() == 3);
  CHECK(relative_frobenius_error(net.product(), a) <= 1e-8);
  CHECK(numeric_rank(dense_hessian(build_phi(net))) == 6);  // d_x·d_y
}

TEST_CASE("build_phi: single layer with Σ_x = I gives Φ = I ⊗ I and H = 2I",
          "[linear_net]") {
  const LinearNet net = init_at_global_minimum(1, 2, 2, random_target(2, 2, 4), 3);
  const PhiBlocks phi = build_phi(net);
  REQUIRE(phi.blocks.size() == 1);
  CHECK(relative_frobenius_error(phi.blocks[0].left(), Matrix::identity(2)) < 1e-12);
  CHECK(relative_frobenius_error(phi.blocks[0].right(), Matrix::identity(2)) < 1e-12);
  const SymMat h = dense_hessian(phi);
  CHECK(relative_frobenius_error(h.dense(), 2.0 * Matrix::identity(4)) < 1e-12);
}

TEST_CASE("build_phi: single-layer Hessian equals the analytic 2(Σ_x ⊗ I)", "[linear_net]") {
  const SpdMat sigma_x(SymMat(Matrix::from_rows({{2.0, 0.3}, {0.3, 1.0}})));
  const LinearNet net = init_at_global_minimum(1, 2, 2, random_target(2, 2, 6), 9, &sigma_x);
  const SymMat h = dense_hessian(build_phi(net));
  const Matrix want = 2.0 * KroneckerOp(sigma_x.dense(), Matrix::identity(2)).dense();
  CHECK(relative_frobenius_error(h.dense(), want) < 1e-12);
}

TEST_CASE("build_phi: densified Hessian matches finite differences of the loss",
          "[linear_net]") {
  {
    // Depth 2, all weights at the identity minimum (target = I, gauge off).
    LinearNet net = init_at_global_minimum(2, 2, 2, Matrix::identity(2), 0);
    net.weights[0] = Matrix::identity(2);
    net.weights[1] = Matrix::identity(2);
    const LinearNetOracle oracle = population_oracle(net);
    const SymMat h = dense_hessian(build_phi(net));
    const auto loss_fn = [&](const Vector& theta) { return oracle.loss(theta); };
    const Matrix fd = oracle::central_difference_hessian(loss_fn, net.pack(), 1e-4);
    CHECK(relative_frobenius_error(h.dense(), fd) < 1e-5);
  }
  {
    // Depth 3 at a random gauge-rotated minimum.
    const Matrix a = random_target(2, 2, 11);
    const LinearNet net = init_at_global_minimum(3, 2, 2, a, 13);
    const LinearNetOracle oracle = population_oracle(net);
    const SymMat h = dense_hessian(build_phi(net));
    const auto loss_fn = [&](const Vector& theta) { return oracle.loss(theta); };
    const Matrix fd = oracle::central_difference_hessian(loss_fn, net.pack(), 1e-4);
    CHECK(relative_frobenius_error(h.dense(), fd) < 1e-4);
  }
}

TEST_CASE("build_phi: depth invariance of the Hessian rank", "[linear_net]") {
  for (int depth : {1, 2, 3, 5}) {
    for (uint64_t seed = 0; seed < 3; ++seed) {
      const Matrix a = random_target(4, 4, 40 + seed);
      const LinearNet net = init_at_global_minimum(depth, 4, 4, a, seed);
      CHECK(numeric_rank(dense_hessian(build_phi(net))) == 16);
    }
  }
}

TEST_CASE("build_phi: densified Hessian is PSD", "[linear_net]") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix a = random_target(4, 4, 50 + seed);
    const LinearNet net = init_at_global_minimum(3, 4, 4, a, seed);
    const SymMat h = dense_hessian(build_phi(net));
    const EigDecomp e = sym_eig(h);
    CHECK(e.eigenvalues.front() >= -1e-9 * e.eigenvalues.back());
  }
}

TEST_CASE("hvp: zero vector, dense agreement, large-dimension structure", "[linear_net]") {
  {
    const LinearNet net = init_at_global_minimum(2, 3, 3, random_target(3, 3, 7), 21);
    const PhiBlocks phi = build_phi(net);
    const Vector zero(phi.total_rows, 0.0);
    for (double v : hvp(phi, zero)) CHECK(v == 0.0);

    std::mt19937_64 rng(501);
    const SymMat dense = dense_hessian(phi);
    for (int trial = 0; trial < 10; ++trial) {
      Vector v(phi.total_rows);
      for (double& x : v) x = gaussian(rng);
      const Vector got = hvp(phi, v);
      const Vector want = dense.apply(v);
      for (size_t i = 0; i < got.size(); ++i)
        CHECK(got[i] == Catch::Approx(want[i]).margin(1e-10));
    }
    CHECK_THROWS_AS(hvp(phi, Vector(3, 0.0)), DimensionMismatch);
  }
  {
    // d = 8, depth 5 (320 parameters): dense cross-check at the largest size
    // where densifying stays cheap.
    const LinearNet net = init_at_global_minimum(5, 8, 8, random_target(8, 8, 8), 77);
    const PhiBlocks phi = build_phi(net);
    const SymMat dense = dense_hessian(phi);
    std::mt19937_64 rng(502);
    Vector v(phi.total_rows);
    for (double& x : v) x = gaussian(rng);
    const Vector got = hvp(phi, v);
    const Vector want = dense.apply(v);
    for (size_t i = 0; i < got.size(); ++i)
      CHECK(got[i] == Catch::Approx(want[i]).margin(1e-9));
  }
  {
    // d = 32, depth 5 (5120 parameters): matrix-free products only.
    const LinearNet net = init_at_global_minimum(5, 32, 32, random_target(32, 32, 9), 88);
    const PhiBlocks phi = build_phi(net);
    REQUIRE(phi.total_rows == 5120);
    std::mt19937_64 rng(503);
    Vector v(phi.total_rows), w(phi.total_rows);
    for (double& x : v) x = gaussian(rng);
    for (double& x : w) x = gaussian(rng);
    const Vector hv = hvp(phi, v);
    const Vector hw = hvp(phi, w);
    // Symmetry of the implicit operator: ⟨w, Hv⟩ = ⟨v, Hw⟩.
    CHECK(dot(w, hv) == Catch::Approx(dot(v, hw)).epsilon(1e-10));
  }
}

TEST_CASE("loss_and_grad: stationary at global minima", "[linear_net]") {
  for (uint64_t seed = 0; seed < 5; ++seed) {
    const Matrix a = random_target(4, 4, 60 + seed);
    const LinearNet net = init_at_global_minimum(4, 4, 4, a, seed);
    const LinearNetOracle oracle = population_oracle(net);
    Vector grad(oracle.dim());
    const double loss = oracle.loss_and_grad(net.pack(), grad);
    CHECK(std::abs(loss) <= 1e-12);
    CHECK(norm2(grad) <= 1e-10);
  }
}

TEST_CASE("loss_and_grad: single-layer gradient equals 2(WΣ_x − Σ_xy)", "[linear_net]") {
  const SpdMat sigma_x(SymMat(Matrix::from_rows({{1.5, 0.2}, {0.2, 0.8}})));
  const LinearNet net = init_at_global_minimum(1, 2, 2, random_target(2, 2, 70), 1, &sigma_x);
  const LinearNetOracle oracle = population_oracle(net);

  std::mt19937_64 rng(504);
  const Matrix w = random_gaussian_matrix(2, 2, rng);
  Vector theta;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) theta.push_back(w(i, j));

  Vector grad(oracle.dim());
  oracle.loss_and_grad(theta, grad);

  const Matrix sigma_xy = net.target * sigma_x.dense();
  const Matrix want = 2.0 * (w * sigma_x.dense() - sigma_xy);
  int idx = 0;
  for (int j = 0; j < 2; ++j)
    for (int i = 0; i < 2; ++i) CHECK(grad[idx++] == Catch::Approx(want(i, j)).margin(1e-12));
}

TEST_CASE("loss_and_grad: finite-difference agreement at random parameters", "[linear_net]") {
  const Matrix a = random_target(3, 3, 80);
  const LinearNet net = init_at_global_minimum(3, 3, 3, a, 2);
  const LinearNetOracle oracle = population_oracle(net);

  std::mt19937_64 rng(505);
  Vector theta(oracle.dim());
  for (double& v : theta) v = gaussian(rng);

  Vector grad(oracle.dim());
  oracle.loss_and_grad(theta, grad);
  const auto loss_fn = [&](const Vector& t) { return oracle.loss(t); };
  const Vector fd = oracle::central_difference_gradient(loss_fn, theta, 1e-6);
  for (size_t i = 0; i < grad.size(); ++i)
    CHECK(grad[i] == Catch::Approx(fd[i]).epsilon(1e-5).margin(1e-7));
}

TEST_CASE("dataset_oracle: empirical moments drive the same formulas", "[linear_net]") {
  std::mt19937_64 rng(506);
  const int samples = 40;
  const Matrix x = random_gaussian_matrix(3, samples, rng);
  const Matrix y = random_gaussian_matrix(2, samples, rng);
  const LinearNetOracle oracle = dataset_oracle(2, x, y);

  Vector theta(oracle.dim());
  for (double& v : theta) v = gaussian(rng);
  Vector grad(oracle.dim());
  const double loss = oracle.loss_and_grad(theta, grad);

  // Direct evaluation of (1/N) Σ ‖y_j − W₂W₁x_j‖².
  Matrix w1(3, 3), w2(2, 3);
  int idx = 0;
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 3; ++i) w1(i, j) = theta[idx++];
  for (int j = 0; j < 3; ++j)
    for (int i = 0; i < 2; ++i) w2(i, j) = theta[idx++];
  const Matrix pred = (w2 * w1) * x;
  double direct = 0.0;
  for (int i = 0; i < 2; ++i)
    for (int j = 0; j < samples; ++j) {
      const double r = y(i, j) - pred(i, j);
      direct += r * r;
    }
  direct /= samples;
  CHECK(loss == Catch::Approx(direct).epsilon(1e-12));

  const auto loss_fn = [&](const Vector& t) { return oracle.loss(t); };
  const Vector fd = oracle::central_difference_gradient(loss_fn, theta, 1e-6);
  for (size_t i = 0; i < grad.size(); ++i)
    CHECK(grad[i] == Catch::Approx(fd[i]).epsilon(1e-5).margin(1e-7));
}
