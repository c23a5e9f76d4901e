#pragma once

#include <cstdint>
#include <limits>
#include <numeric>
#include <random>
#include <string>
#include <vector>

#include "gcr/linalg.hpp"

namespace gcr {

enum class Retraction { Geodesic, Qr };

// A point on G(k, n): an n x k matrix with orthonormal columns. The matrix is
// one instantiation of the subspace; right-multiplying by an orthogonal k x k
// matrix yields another instantiation of the same point.
template <typename Scalar>
struct SubspaceBasisT {
  MatrixX<Scalar> basis;

  Eigen::Index n() const { return basis.rows(); }
  Eigen::Index k() const { return basis.cols(); }

  static SubspaceBasisT from_matrix(MatrixX<Scalar> b,
                                    Scalar tol = Scalar(1e-8)) {
    if (b.cols() < 1 || b.cols() > b.rows())
      throw DimensionError("SubspaceBasis: need 1 <= k <= n");
    const Scalar err = orthonormality_defect(b);
    if (!(err <= tol))
      throw Error("SubspaceBasis: columns not orthonormal, defect " +
                  std::to_string(double(err)));
    return SubspaceBasisT{std::move(b)};
  }
};

using SubspaceBasis = SubspaceBasisT<double>;

// Fills row-major from the seeded generator, then orthonormalizes with qf.
template <typename Scalar = double>
SubspaceBasisT<Scalar> random_subspace(Eigen::Index n, Eigen::Index k,
                                       std::uint64_t seed) {
  if (k < 1 || k > n) throw DimensionError("random_subspace: need 1 <= k <= n");
  std::mt19937_64 gen(seed);
  std::normal_distribution<double> gauss(0.0, 1.0);
  MatrixX<Scalar> g(n, k);
  for (Eigen::Index i = 0; i < n; ++i)
    for (Eigen::Index j = 0; j < k; ++j) g(i, j) = Scalar(gauss(gen));
  return SubspaceBasisT<Scalar>{qf(g)};
}

// Projection of the Euclidean gradient onto the tangent space at s:
// G = D - S (S^T D).
template <typename Scalar>
MatrixX<Scalar> riemannian_grad(const SubspaceBasisT<Scalar>& s,
                                const MatrixX<Scalar>& d) {
  if (d.rows() != s.n() || d.cols() != s.k())
    throw DimensionError("riemannian_grad: shape mismatch");
  return d - s.basis * (s.basis.transpose() * d);
}

// Transport of a momentum buffer to the tangent space at s by projection.
template <typename Scalar>
MatrixX<Scalar> transport_momentum(const SubspaceBasisT<Scalar>& s,
                                   const MatrixX<Scalar>& m_prev) {
  if (m_prev.rows() != s.n() || m_prev.cols() != s.k())
    throw DimensionError("transport_momentum: shape mismatch");
  return m_prev - s.basis * (s.basis.transpose() * m_prev);
}

// Endpoint of the geodesic from s with initial velocity g after time t:
//   S(t) = (S V cos(t Sigma) + U sin(t Sigma)) V^T,  U Sigma V^T = thin_svd(g).
// g must be tangent at s. The returned matrix is the SVD-gauge instantiation;
// it is not re-canonicalized.
template <typename Scalar>
SubspaceBasisT<Scalar> geodesic_retract(const SubspaceBasisT<Scalar>& s,
                                        const MatrixX<Scalar>& g, Scalar t) {
  if (g.rows() != s.n() || g.cols() != s.k())
    throw DimensionError("geodesic_retract: shape mismatch");
  if (!std::isfinite(double(t)))
    throw Error("geodesic_retract: non-finite step");
  const Scalar gmax = max_abs(g);
  if (gmax < Scalar(1e-15)) return s;  // skip SVD of (near-)zero tangent
  const Scalar tang = max_abs(MatrixX<Scalar>(s.basis.transpose() * g));
  // An imperfect basis leaves a projection residual of order defect * |g|,
  // so the admissible tangency error scales with both.
  const Scalar slack = std::max(
      Scalar(100) * std::numeric_limits<Scalar>::epsilon(),
      Scalar(10) * orthonormality_defect(s.basis));
  const Scalar tol = std::max(Scalar(1e-8), slack * std::max(Scalar(1), gmax));
  if (tang > tol)
    throw TangencyError("geodesic_retract: tangent defect " +
                        std::to_string(double(tang)));
  ThinSvd<Scalar> f = thin_svd(g);
  VectorX<Scalar> c = (t * f.sigma.array()).cos();
  VectorX<Scalar> si = (t * f.sigma.array()).sin();
  MatrixX<Scalar> next = (s.basis * f.v * c.asDiagonal() +
                          f.u * si.asDiagonal()) *
                         f.v.transpose();
  return SubspaceBasisT<Scalar>{std::move(next)};
}

// Euclidean step followed by orthogonalization: qf(s + t g).
template <typename Scalar>
SubspaceBasisT<Scalar> qr_retract(const SubspaceBasisT<Scalar>& s,
                                  const MatrixX<Scalar>& g, Scalar t) {
  if (g.rows() != s.n() || g.cols() != s.k())
    throw DimensionError("qr_retract: shape mismatch");
  return SubspaceBasisT<Scalar>{qf(MatrixX<Scalar>(s.basis + t * g))};
}

// Block-concatenated weight of a product of Grassmannians. Each n x k_i block
// is orthonormal on its own; the concatenated matrix as a whole is not.
template <typename Scalar>
struct ProductGrassmannParamT {
  Eigen::Index n = 0;
  std::vector<Eigen::Index> dims;  // k_i per class
  MatrixX<Scalar> blocks;          // n x sum(dims)

  Eigen::Index num_classes() const {
    return static_cast<Eigen::Index>(dims.size());
  }
  Eigen::Index total_cols() const { return blocks.cols(); }

  Eigen::Index block_offset(Eigen::Index i) const {
    return std::accumulate(dims.begin(), dims.begin() + i, Eigen::Index(0));
  }
  auto block(Eigen::Index i) { return blocks.middleCols(block_offset(i), dims[i]); }
  auto block(Eigen::Index i) const {
    return blocks.middleCols(block_offset(i), dims[i]);
  }
  SubspaceBasisT<Scalar> subspace(Eigen::Index i) const {
    return SubspaceBasisT<Scalar>{block(i)};
  }

  // Gaussian + qf initialization, one contiguous seeded stream over blocks.
  static ProductGrassmannParamT random(Eigen::Index n,
                                       std::vector<Eigen::Index> dims,
                                       std::uint64_t seed) {
    ProductGrassmannParamT p;
    p.n = n;
    p.dims = std::move(dims);
    Eigen::Index total = 0;
    for (Eigen::Index k : p.dims) {
      if (k < 1 || k > n)
        throw DimensionError("ProductGrassmannParam: need 1 <= k_i <= n");
      total += k;
    }
    p.blocks.resize(n, total);
    std::mt19937_64 gen(seed);
    std::normal_distribution<double> gauss(0.0, 1.0);
    Eigen::Index off = 0;
    for (Eigen::Index k : p.dims) {
      MatrixX<Scalar> g(n, k);
      for (Eigen::Index i = 0; i < n; ++i)
        for (Eigen::Index j = 0; j < k; ++j) g(i, j) = Scalar(gauss(gen));
      p.blocks.middleCols(off, k) = qf(g);
      off += k;
    }
    return p;
  }

  static ProductGrassmannParamT random_uniform_k(Eigen::Index n,
                                                 Eigen::Index num_classes,
                                                 Eigen::Index k,
                                                 std::uint64_t seed) {
    return random(n, std::vector<Eigen::Index>(num_classes, k), seed);
  }
};

using ProductGrassmannParam = ProductGrassmannParamT<double>;

// max_i || S_i^T S_i - I ||_inf over class blocks (max-abs entry).
template <typename Scalar>
Scalar orthonormality_error(const ProductGrassmannParamT<Scalar>& p) {
  Scalar worst = 0;
  for (Eigen::Index i = 0; i < p.num_classes(); ++i)
    worst = std::max(worst, orthonormality_defect(MatrixX<Scalar>(p.block(i))));
  return worst;
}

// Riemannian SGD with momentum over a product of Grassmannians. One step:
//   G <- (I - S S^T) D           per block
//   M <- (I - S S^T) M           transport
//   M <- mu M + G
//   S <- retract(S, M, tau)      geodesic or qf
//   every reorth_period steps, S <- qf(S)
// The step moves along +M; for descent pass the negative loss gradient.
// Weight decay never applies to these parameters.
template <typename Scalar>
struct RsgdStateT {
  ProductGrassmannParamT<Scalar> param;
  MatrixX<Scalar> momentum;  // same shape as param.blocks
  Scalar tau = Scalar(0.1);
  Scalar mu = Scalar(0.9);
  Eigen::Index reorth_period = 5;  // 0 disables re-orthogonalization
  std::int64_t iter = 0;
  Retraction retraction = Retraction::Geodesic;

  static RsgdStateT make(ProductGrassmannParamT<Scalar> p, Scalar tau,
                         Scalar mu, Eigen::Index reorth_period = 5,
                         Retraction r = Retraction::Geodesic) {
    if (!(tau > Scalar(0))) throw Error("rsgd: need tau > 0");
    if (!(mu >= Scalar(0) && mu < Scalar(1)))
      throw Error("rsgd: need 0 <= mu < 1");
    RsgdStateT s;
    s.momentum = MatrixX<Scalar>::Zero(p.n, p.total_cols());
    s.param = std::move(p);
    s.tau = tau;
    s.mu = mu;
    s.reorth_period = reorth_period;
    s.retraction = r;
    return s;
  }

  void step(const MatrixX<Scalar>& euclid_grad) {
    if (euclid_grad.rows() != param.n ||
        euclid_grad.cols() != param.total_cols())
      throw DimensionError("rsgd_step: gradient shape mismatch");
    ++iter;
    const bool reorth = reorth_period > 0 && iter % reorth_period == 0;
    for (Eigen::Index i = 0; i < param.num_classes(); ++i) {
      try {
        const Eigen::Index off = param.block_offset(i);
        const Eigen::Index k = param.dims[i];
        SubspaceBasisT<Scalar> s{param.blocks.middleCols(off, k)};
        MatrixX<Scalar> d = euclid_grad.middleCols(off, k);
        MatrixX<Scalar> g = riemannian_grad(s, d);
        MatrixX<Scalar> m = transport_momentum(
            s, MatrixX<Scalar>(momentum.middleCols(off, k)));
        m = mu * m + g;
        SubspaceBasisT<Scalar> next =
            retraction == Retraction::Geodesic ? geodesic_retract(s, m, tau)
                                               : qr_retract(s, m, tau);
        if (reorth) next.basis = qf(next.basis);
        param.blocks.middleCols(off, k) = next.basis;
        momentum.middleCols(off, k) = m;
      } catch (const Error& e) {
        throw Error("rsgd_step: class " + std::to_string(i) + ": " + e.what());
      }
    }
  }
};

using RsgdState = RsgdStateT<double>;

}  // namespace gcr
