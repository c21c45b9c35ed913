#pragma once

// Seeded generators for the random test matrices used throughout: orthogonal
// gauges, SPD/PSD matrices with prescribed spectra, Gaussian targets. All
// randomness flows through explicit URBG state, never global.

#include <cstdint>
#include <random>

#include "ldrank/matcore.hpp"
#include "ldrank/matrix.hpp"
#include "ldrank/rng.hpp"

namespace ldrank {

template <typename Urbg>
double uniform01(Urbg& rng) {
  return u64_to_unit(static_cast<uint64_t>(rng()));
}

template <typename Urbg>
double gaussian(Urbg& rng) {
  return standard_normal_icdf(uniform01(rng));
}

template <typename Urbg>
Matrix random_gaussian_matrix(int rows, int cols, Urbg& rng) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = gaussian(rng);
  return m;
}

/// Haar-ish random orthogonal matrix via modified Gram-Schmidt on a Gaussian
/// matrix. Degenerate draws are retried column by column.
template <typename Urbg>
Matrix random_orthogonal(int n, Urbg& rng) {
  Matrix q(n, n);
  for (int k = 0; k < n; ++k) {
    Vector col(n);
    double nrm = 0.0;
    do {
      for (int i = 0; i < n; ++i) col[i] = gaussian(rng);
      for (int j = 0; j < k; ++j) {
        double proj = 0.0;
        for (int i = 0; i < n; ++i) proj += q(i, j) * col[i];
        for (int i = 0; i < n; ++i) col[i] -= proj * q(i, j);
      }
      // One re-orthogonalization pass keeps the columns orthonormal to
      // machine precision even for unlucky draws.
      for (int j = 0; j < k; ++j) {
        double proj = 0.0;
        for (int i = 0; i < n; ++i) proj += q(i, j) * col[i];
        for (int i = 0; i < n; ++i) col[i] -= proj * q(i, j);
      }
      nrm = norm2(col);
    } while (nrm < 1e-8);
    for (int i = 0; i < n; ++i) q(i, k) = col[i] / nrm;
  }
  return q;
}

/// Q diag(λ) Qᵀ with the given eigenvalues and a random orthogonal Q.
template <typename Urbg>
Matrix random_rotated_diagonal(const Vector& eigenvalues, Urbg& rng) {
  const int n = static_cast<int>(eigenvalues.size());
  const Matrix q = random_orthogonal(n, rng);
  Matrix m(n, n);
  for (int k = 0; k < n; ++k) {
    const double l = eigenvalues[k];
    if (l == 0.0) continue;
    for (int i = 0; i < n; ++i) {
      const double qik = q(i, k) * l;
      for (int j = 0; j < n; ++j) m(i, j) += qik * q(j, k);
    }
  }
  return m;
}

template <typename Urbg>
SpdMat random_spd(int n, Urbg& rng, double eig_min, double eig_max) {
  Vector eigs(n);
  for (int i = 0; i < n; ++i) eigs[i] = eig_min + (eig_max - eig_min) * uniform01(rng);
  return SpdMat(SymMat(random_rotated_diagonal(eigs, rng)));
}

/// Random PSD matrix with exactly `rank` nonzero eigenvalues drawn from
/// [eig_min, eig_max].
template <typename Urbg>
SymMat random_psd_with_rank(int n, int rank, Urbg& rng, double eig_min, double eig_max) {
  Vector eigs(n, 0.0);
  for (int i = 0; i < rank; ++i) eigs[i] = eig_min + (eig_max - eig_min) * uniform01(rng);
  return SymMat(random_rotated_diagonal(eigs, rng));
}

template <typename Urbg>
SymMat random_symmetric(int n, Urbg& rng, double scale = 1.0) {
  Matrix m(n, n);
  for (int i = 0; i < n; ++i)
    for (int j = i; j < n; ++j) m(i, j) = m(j, i) = scale * gaussian(rng);
  return SymMat(m);
}

/// Symmetric matrix with prescribed eigenvalues, at least one negative
/// (a saddle Hessian when used as H).
template <typename Urbg>
SymMat random_saddle_hessian(int n, int num_negative, Urbg& rng, double eig_min,
                             double eig_max) {
  Vector eigs(n);
  for (int i = 0; i < n; ++i) {
    const double mag = eig_min + (eig_max - eig_min) * uniform01(rng);
    eigs[i] = i < num_negative ? -mag : mag;
  }
  return SymMat(random_rotated_diagonal(eigs, rng));
}

}  // namespace ldrank
