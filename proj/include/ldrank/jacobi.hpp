#pragma once

// Cyclic Jacobi eigensolver for dense real symmetric matrices.
//
// Simple, accurate, and bit-reproducible (fixed rotation order, no pivoting
// heuristics that depend on floating-point ties). Adequate for the dense
// desk-scale matrices this library works with.

#include <cmath>
#include <numeric>
#include <vector>

#include "ldrank/errors.hpp"
#include "ldrank/matrix.hpp"

namespace ldrank {

struct JacobiResult {
  Vector eigenvalues;   // ascending
  Matrix eigenvectors;  // orthonormal columns, aligned with eigenvalues
  int sweeps = 0;
};

namespace detail {

inline double off_diagonal_norm(const Matrix& a) {
  const int n = a.rows();
  double s = 0.0;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j) s += a(i, j) * a(i, j);
  return std::sqrt(2.0 * s);
}

}  // namespace detail

/// Diagonalizes a symmetric matrix by cyclic Jacobi rotations.
/// Throws NumericalFailure if the off-diagonal mass has not vanished after
/// `max_sweeps` full sweeps.
inline JacobiResult jacobi_eigensym(Matrix a, int max_sweeps = 100) {
  const int n = a.rows();
  if (n != a.cols()) throw DimensionMismatch("jacobi_eigensym requires a square matrix");

  Matrix v = Matrix::identity(n);
  const double total = a.frobenius_norm();
  const double stop = std::max(1e-14 * total, 1e-300);

  int sweep = 0;
  bool converged = n <= 1 || detail::off_diagonal_norm(a) <= stop;
  for (; sweep < max_sweeps && !converged; ++sweep) {
    for (int p = 0; p < n - 1; ++p) {
      for (int q = p + 1; q < n; ++q) {
        const double apq = a(p, q);
        if (apq == 0.0) continue;
        const double app = a(p, p);
        const double aqq = a(q, q);
        // Rotation is numerically a no-op once apq is far below the diagonal.
        if (std::abs(apq) <= 1e-18 * (std::abs(app) + std::abs(aqq))) {
          a(p, q) = a(q, p) = 0.0;
          continue;
        }
        const double theta = (aqq - app) / (2.0 * apq);
        const double t = (theta >= 0.0 ? 1.0 : -1.0) /
                         (std::abs(theta) + std::hypot(theta, 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0);
        const double s = t * c;
        const double tau = s / (1.0 + c);

        a(p, p) = app - t * apq;
        a(q, q) = aqq + t * apq;
        a(p, q) = a(q, p) = 0.0;
        for (int r = 0; r < n; ++r) {
          if (r == p || r == q) continue;
          const double arp = a(r, p);
          const double arq = a(r, q);
          a(r, p) = a(p, r) = arp - s * (arq + tau * arp);
          a(r, q) = a(q, r) = arq + s * (arp - tau * arq);
        }
        for (int r = 0; r < n; ++r) {
          const double vrp = v(r, p);
          const double vrq = v(r, q);
          v(r, p) = vrp - s * (vrq + tau * vrp);
          v(r, q) = vrq + s * (vrp - tau * vrq);
        }
      }
    }
    converged = detail::off_diagonal_norm(a) <= stop;
  }
  if (!converged)
    throw NumericalFailure("jacobi_eigensym: no convergence after " +
                           std::to_string(max_sweeps) + " sweeps");

  std::vector<int> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](int i, int j) { return a(i, i) < a(j, j); });

  JacobiResult result;
  result.eigenvalues.resize(n);
  result.eigenvectors = Matrix(n, n);
  for (int k = 0; k < n; ++k) {
    result.eigenvalues[k] = a(order[k], order[k]);
    for (int r = 0; r < n; ++r) result.eigenvectors(r, k) = v(r, order[k]);
  }
  result.sweeps = sweep;
  return result;
}

}  // namespace ldrank
