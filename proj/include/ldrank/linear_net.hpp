#pragma once

// Deep linear networks g(x) = W_M ··· W_1 x under the population quadratic
// loss L = E‖y − g(x)‖². The set of global minima is
// { θ : W_M···W_1 = Σ_xy Σ_x⁻¹ }, and the Hessian there is H = 2ΦΦᵀ with
// Kronecker-structured blocks
//
//   Φ_k = (W_{k−1}···W_1 Σ_x^{1/2}) ⊗ (W_M···W_{k+1})ᵀ,
//
// empty products taken as identity. The known rank d_x·d_y of this Hessian
// (independent of depth) makes these nets the ground-truth testbed for the
// rank estimator. Parameter vectors are the column-major vectorizations of
// W_1..W_M, concatenated in layer order.

#include <cstdint>
#include <random>
#include <utility>
#include <vector>

#include "ldrank/errors.hpp"
#include "ldrank/gradient_oracle.hpp"
#include "ldrank/matcore.hpp"
#include "ldrank/matrix.hpp"
#include "ldrank/random_matrices.hpp"

namespace ldrank {

namespace detail {

struct Svd {
  Matrix u;                // d_y×d_y orthogonal
  Vector singular_values;  // descending, length min(d_y, d_x)
  Matrix v;                // d_x×d_x orthogonal
};

/// Full SVD via the eigendecomposition of AᵀA; adequate at the small
/// dimensions used here. Columns of U beyond the numerical rank are completed
/// from the standard basis.
inline Svd full_svd(const Matrix& a) {
  const int dy = a.rows(), dx = a.cols();
  const int r = std::min(dy, dx);
  const EigDecomp eig = sym_eig(SymMat(a.transposed() * a));

  Svd out;
  out.v = Matrix(dx, dx);
  out.singular_values.assign(r, 0.0);
  for (int k = 0; k < dx; ++k) {
    const int src = dx - 1 - k;  // descending order
    if (k < r) out.singular_values[k] = std::sqrt(std::max(eig.eigenvalues[src], 0.0));
    for (int i = 0; i < dx; ++i) out.v(i, k) = eig.eigenvectors(i, src);
  }

  const double s_max = r > 0 ? out.singular_values[0] : 0.0;
  out.u = Matrix(dy, dy);
  int filled = 0;
  for (int k = 0; k < r && out.singular_values[k] > 1e-12 * s_max && s_max > 0.0; ++k) {
    for (int i = 0; i < dy; ++i) {
      double s = 0.0;
      for (int j = 0; j < dx; ++j) s += a(i, j) * out.v(j, k);
      out.u(i, k) = s / out.singular_values[k];
    }
    ++filled;
  }
  // Orthonormal completion of U from standard basis vectors.
  for (int cand = 0; cand < dy && filled < dy; ++cand) {
    Vector col(dy, 0.0);
    col[cand] = 1.0;
    for (int pass = 0; pass < 2; ++pass)
      for (int k = 0; k < filled; ++k) {
        double proj = 0.0;
        for (int i = 0; i < dy; ++i) proj += out.u(i, k) * col[i];
        for (int i = 0; i < dy; ++i) col[i] -= proj * out.u(i, k);
      }
    const double nrm = norm2(col);
    if (nrm < 1e-8) continue;
    for (int i = 0; i < dy; ++i) out.u(i, filled) = col[i] / nrm;
    ++filled;
  }
  if (filled < dy) throw NumericalFailure("full_svd: could not complete U basis");
  return out;
}

}  // namespace detail

struct LinearNet {
  int depth;                    // M
  int d_x, d_y;
  int hidden;                   // max(d_x, d_y); all hidden layers square
  std::vector<Matrix> weights;  // W_1..W_M
  SpdMat data_cov;              // Σ_x
  Matrix target;                // A = Σ_xy Σ_x⁻¹ (d_y×d_x)

  int layer_rows(int k) const { return k == depth - 1 ? d_y : hidden; }
  int layer_cols(int k) const { return k == 0 ? d_x : hidden; }

  long param_count() const {
    long n = 0;
    for (int k = 0; k < depth; ++k) n += static_cast<long>(layer_rows(k)) * layer_cols(k);
    return n;
  }

  /// W_M ··· W_1
  Matrix product() const {
    Matrix p = weights[0];
    for (int k = 1; k < depth; ++k) p = weights[k] * p;
    return p;
  }

  /// Column-major vectorizations of W_1..W_M, concatenated.
  Vector pack() const {
    Vector theta;
    theta.reserve(param_count());
    for (const Matrix& w : weights)
      for (int j = 0; j < w.cols(); ++j)
        for (int i = 0; i < w.rows(); ++i) theta.push_back(w(i, j));
    return theta;
  }
};

/// Constructs a network at a randomly chosen global minimum: the target is
/// factored through a balanced SVD split (each factor carries Λ^{1/M}), then
/// the factors are gauge-rotated by random orthogonal matrices, which moves
/// the point around the minimum manifold without changing the product.
inline LinearNet init_at_global_minimum(int depth, int d_x, int d_y, const Matrix& target,
                                        uint64_t seed, const SpdMat* sigma_x = nullptr) {
  if (depth < 1) throw DimensionMismatch("init_at_global_minimum: depth must be >= 1");
  if (target.rows() != d_y || target.cols() != d_x)
    throw DimensionMismatch("init_at_global_minimum: target must be d_y×d_x");

  LinearNet net{depth,
                d_x,
                d_y,
                std::max(d_x, d_y),
                {},
                sigma_x ? *sigma_x : SpdMat::identity(d_x),
                target};
  if (net.data_cov.dim() != d_x)
    throw DimensionMismatch("init_at_global_minimum: Σ_x must be d_x×d_x");

  const int w = net.hidden;
  if (depth == 1) {
    net.weights.push_back(target);
    return net;
  }

  const detail::Svd svd = detail::full_svd(target);
  const int r = std::min(d_x, d_y);
  Vector root(w, 0.0);
  for (int i = 0; i < r; ++i)
    root[i] = std::pow(svd.singular_values[i], 1.0 / static_cast<double>(depth));

  net.weights.reserve(depth);
  {
    Matrix w1(w, d_x);  // D · [Vᵀ; 0]
    for (int i = 0; i < std::min(w, d_x); ++i)
      for (int j = 0; j < d_x; ++j) w1(i, j) = root[i] * svd.v(j, i);
    net.weights.push_back(std::move(w1));
  }
  for (int k = 1; k < depth - 1; ++k) {
    Matrix wk(w, w);
    for (int i = 0; i < w; ++i) wk(i, i) = root[i];
    net.weights.push_back(std::move(wk));
  }
  {
    Matrix wm(d_y, w);  // [U | 0] · D
    for (int i = 0; i < d_y; ++i)
      for (int j = 0; j < std::min(w, d_y); ++j) wm(i, j) = svd.u(i, j) * root[j];
    net.weights.push_back(std::move(wm));
  }

  std::mt19937_64 rng(seed);
  Matrix prev_rotation;  // R_{k−1}; empty means identity (R_0 = R_M = I)
  for (int k = 0; k < depth; ++k) {
    Matrix rotated = prev_rotation.rows() > 0
                         ? net.weights[k] * prev_rotation.transposed()
                         : net.weights[k];
    if (k < depth - 1) {
      Matrix rot = random_orthogonal(w, rng);
      rotated = rot * rotated;
      prev_rotation = std::move(rot);
    }
    net.weights[k] = std::move(rotated);
  }

  if (relative_frobenius_error(net.product(), target) > 1e-8)
    throw NumericalFailure("init_at_global_minimum: factorization failed to reproduce target");
  return net;
}

/// Randomly chosen regression target with i.i.d. standard-normal entries
/// (equals Σ_xy when Σ_x = I). Left unnormalized: rescaling the target
/// rescales every Hessian eigenvalue by the same power of the scale, and
/// shrinking them stretches the thermalization times past the iteration
/// budgets the rank experiments run with.
inline Matrix random_target(int d_y, int d_x, uint64_t seed) {
  std::mt19937_64 rng(seed);
  return random_gaussian_matrix(d_y, d_x, rng);
}

/// The Kronecker blocks of Φ, one per layer, plus the transposed operators
/// cached for Hessian-vector products.
struct PhiBlocks {
  std::vector<KroneckerOp> blocks;
  std::vector<KroneckerOp> transposed_blocks;
  std::vector<long> offsets;  // row offset of each block in Φ
  long total_rows = 0;        // parameter count
  int out_cols = 0;           // d_x·d_y
};

inline PhiBlocks build_phi(const LinearNet& net) {
  const int depth = net.depth;
  const Matrix sx_half = net.data_cov.power(0.5);

  std::vector<Matrix> prefix(depth);  // L_k = W_{k−1}···W_1 (identity for k = 1)
  prefix[0] = Matrix::identity(net.d_x);
  for (int k = 1; k < depth; ++k) prefix[k] = net.weights[k - 1] * prefix[k - 1];
  std::vector<Matrix> suffix(depth);  // R_k = W_M···W_{k+1} (identity for k = M)
  suffix[depth - 1] = Matrix::identity(net.d_y);
  for (int k = depth - 2; k >= 0; --k) suffix[k] = suffix[k + 1] * net.weights[k + 1];

  PhiBlocks phi;
  phi.out_cols = net.d_x * net.d_y;
  for (int k = 0; k < depth; ++k) {
    KroneckerOp op(prefix[k] * sx_half, suffix[k].transposed());
    phi.offsets.push_back(phi.total_rows);
    phi.total_rows += op.rows();
    phi.transposed_blocks.push_back(op.transposed());
    phi.blocks.push_back(std::move(op));
  }
  return phi;
}

/// Hessian-vector product 2Φ(Φᵀv) using only layer-sized matrix products;
/// H itself is never materialized.
inline Vector hvp(const PhiBlocks& phi, const Vector& v) {
  if (static_cast<long>(v.size()) != phi.total_rows)
    throw DimensionMismatch("hvp: vector length does not match parameter count");
  Vector mixed(phi.out_cols, 0.0);
  for (size_t k = 0; k < phi.blocks.size(); ++k) {
    const long off = phi.offsets[k];
    const int rows = phi.blocks[k].rows();
    Vector vk(v.begin() + off, v.begin() + off + rows);
    const Vector contribution = phi.transposed_blocks[k].apply(vk);
    add_scaled(mixed, 1.0, contribution);
  }
  Vector out(phi.total_rows);
  for (size_t k = 0; k < phi.blocks.size(); ++k) {
    const Vector yk = phi.blocks[k].apply(mixed);
    const long off = phi.offsets[k];
    for (size_t i = 0; i < yk.size(); ++i) out[off + i] = 2.0 * yk[i];
  }
  return out;
}

/// Densified H = 2ΦΦᵀ (small parameter counts only).
inline SymMat dense_hessian(const PhiBlocks& phi) {
  Matrix full(static_cast<int>(phi.total_rows), phi.out_cols);
  for (size_t k = 0; k < phi.blocks.size(); ++k) {
    const Matrix block = phi.blocks[k].dense();
    const long off = phi.offsets[k];
    for (int i = 0; i < block.rows(); ++i)
      for (int j = 0; j < block.cols(); ++j) full(static_cast<int>(off) + i, j) = block(i, j);
  }
  Matrix h = full * full.transposed();
  h *= 2.0;
  return SymMat(h);
}

/// 2ΦᵀΦ, a d_xd_y × d_xd_y matrix sharing the nonzero spectrum of H.
/// Assembled from layer-sized Gram factors, so it stays cheap even when the
/// parameter count is far too large to densify H.
inline SymMat gram_hessian(const PhiBlocks& phi) {
  Matrix gram(phi.out_cols, phi.out_cols);
  for (size_t k = 0; k < phi.blocks.size(); ++k) {
    const Matrix& a = phi.blocks[k].left();
    const Matrix& b = phi.blocks[k].right();
    const Matrix ata = a.transposed() * a;
    const Matrix btb = b.transposed() * b;
    const Matrix kron = KroneckerOp(ata, btb).dense();
    gram += kron;
  }
  gram *= 2.0;
  return SymMat(gram);
}

/// Population-form quadratic loss over the layer weights:
///   L(θ) = Tr(Σ_y) − 2 Tr(W_tot Σ_xyᵀ) + Tr(W_tot Σ_x W_totᵀ),
/// with layer gradients ∇_{W_k} = 2 R_kᵀ (W_tot Σ_x − Σ_xy) L_kᵀ via the
/// chain rule. Finite datasets reduce to the same form through their
/// empirical second moments.
class LinearNetOracle final : public GradientOracle {
 public:
  LinearNetOracle(int depth, int d_x, int d_y, Matrix sigma_x, Matrix sigma_xy,
                  double trace_sigma_y)
      : depth_(depth),
        d_x_(d_x),
        d_y_(d_y),
        hidden_(std::max(d_x, d_y)),
        sigma_x_(std::move(sigma_x)),
        sigma_xy_(std::move(sigma_xy)),
        trace_sigma_y_(trace_sigma_y) {
    long n = 0;
    for (int k = 0; k < depth_; ++k) {
      offsets_.push_back(n);
      n += static_cast<long>(rows_of(k)) * cols_of(k);
    }
    dim_ = n;
  }

  int dim() const override { return static_cast<int>(dim_); }

  double loss_and_grad(const Vector& theta, Vector& grad) const override {
    if (static_cast<long>(theta.size()) != dim_ || static_cast<long>(grad.size()) != dim_)
      throw DimensionMismatch("LinearNetOracle: parameter length mismatch");

    std::vector<Matrix> weights(depth_);
    for (int k = 0; k < depth_; ++k) {
      Matrix w(rows_of(k), cols_of(k));
      const double* src = theta.data() + offsets_[k];
      for (int j = 0; j < w.cols(); ++j)
        for (int i = 0; i < w.rows(); ++i) w(i, j) = src[static_cast<long>(j) * w.rows() + i];
      weights[k] = std::move(w);
    }

    std::vector<Matrix> prefix(depth_ + 1);
    prefix[0] = Matrix::identity(d_x_);
    for (int k = 0; k < depth_; ++k) prefix[k + 1] = weights[k] * prefix[k];
    std::vector<Matrix> suffix(depth_ + 1);
    suffix[depth_] = Matrix::identity(d_y_);
    for (int k = depth_ - 1; k >= 0; --k) suffix[k] = suffix[k + 1] * weights[k];

    const Matrix& w_tot = prefix[depth_];
    const Matrix wsx = w_tot * sigma_x_;

    double loss = trace_sigma_y_;
    for (int i = 0; i < d_y_; ++i)
      for (int j = 0; j < d_x_; ++j)
        loss += w_tot(i, j) * (wsx(i, j) - 2.0 * sigma_xy_(i, j));

    Matrix residual = wsx;
    residual -= sigma_xy_;
    residual *= 2.0;  // ∇_{W_tot} L
    for (int k = 0; k < depth_; ++k) {
      const Matrix gk = suffix[k + 1].transposed() * residual * prefix[k].transposed();
      double* dst = grad.data() + offsets_[k];
      for (int j = 0; j < gk.cols(); ++j)
        for (int i = 0; i < gk.rows(); ++i) dst[static_cast<long>(j) * gk.rows() + i] = gk(i, j);
    }
    return loss;
  }

 private:
  int rows_of(int k) const { return k == depth_ - 1 ? d_y_ : hidden_; }
  int cols_of(int k) const { return k == 0 ? d_x_ : hidden_; }

  int depth_, d_x_, d_y_, hidden_;
  Matrix sigma_x_, sigma_xy_;
  double trace_sigma_y_;
  std::vector<long> offsets_;
  long dim_ = 0;
};

/// Oracle for the population loss of `net`. By default Σ_y = AΣ_xAᵀ (the
/// realizable case), which makes the loss exactly zero on the minimum
/// manifold.
inline LinearNetOracle population_oracle(const LinearNet& net) {
  const Matrix sigma_xy = net.target * net.data_cov.dense();
  const Matrix sy = net.target * net.data_cov.dense() * net.target.transposed();
  return LinearNetOracle(net.depth, net.d_x, net.d_y, net.data_cov.dense(), sigma_xy,
                         sy.trace());
}

/// Oracle for the empirical loss (1/N) Σ_j ‖y_j − g(x_j)‖² of a finite
/// dataset with samples as columns of X (d_x×N) and Y (d_y×N).
inline LinearNetOracle dataset_oracle(int depth, const Matrix& x, const Matrix& y) {
  if (x.cols() != y.cols()) throw DimensionMismatch("dataset_oracle: sample counts differ");
  const double inv_n = 1.0 / static_cast<double>(x.cols());
  Matrix sx = x * x.transposed();
  sx *= inv_n;
  Matrix sxy = y * x.transposed();
  sxy *= inv_n;
  double trace_sy = 0.0;
  for (int i = 0; i < y.rows(); ++i)
    for (int j = 0; j < y.cols(); ++j) trace_sy += y(i, j) * y(i, j);
  trace_sy *= inv_n;
  return LinearNetOracle(depth, x.rows(), y.rows(), std::move(sx), std::move(sxy), trace_sy);
}

}  // namespace ldrank
