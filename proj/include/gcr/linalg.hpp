#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <string>

#include "gcr/errors.hpp"

namespace gcr {

template <typename Scalar>
using MatrixX = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using VectorX = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

using Matrix = MatrixX<double>;
using Vector = VectorX<double>;

template <typename Derived>
bool all_finite(const Eigen::MatrixBase<Derived>& a) {
  return a.allFinite();
}

// max_ij |A_ij|, zero-sized matrices count as 0.
template <typename Derived>
typename Derived::Scalar max_abs(const Eigen::MatrixBase<Derived>& a) {
  if (a.size() == 0) return typename Derived::Scalar(0);
  return a.cwiseAbs().maxCoeff();
}

// max-abs deviation of B^T B from the identity.
template <typename Scalar>
Scalar orthonormality_defect(const MatrixX<Scalar>& b) {
  MatrixX<Scalar> g = b.transpose() * b;
  g.diagonal().array() -= Scalar(1);
  return max_abs(g);
}

// Q factor of the thin QR decomposition, with the sign of each column fixed
// so that the corresponding diagonal entry of R is nonnegative. This makes
// qf a deterministic function of its input.
template <typename Scalar>
MatrixX<Scalar> qf(const MatrixX<Scalar>& a) {
  const Eigen::Index n = a.rows();
  const Eigen::Index k = a.cols();
  if (n < k || k < 1)
    throw DimensionError("qf: need n >= k >= 1, got " + std::to_string(n) +
                         "x" + std::to_string(k));
  Eigen::HouseholderQR<MatrixX<Scalar>> qr(a);
  MatrixX<Scalar> q = qr.householderQ() * MatrixX<Scalar>::Identity(n, k);
  MatrixX<Scalar> r = qr.matrixQR()
                          .topRows(k)
                          .template triangularView<Eigen::Upper>();
  // Singular values of R equal those of a; cheap k x k rank check.
  Eigen::JacobiSVD<MatrixX<Scalar>> sv(r);
  const Scalar smax = sv.singularValues()(0);
  const Scalar smin = sv.singularValues()(k - 1);
  if (!(smin > Scalar(1e-12) * smax))
    throw RankDeficient("qf: input is numerically rank deficient (smin=" +
                        std::to_string(double(smin)) + ")");
  for (Eigen::Index j = 0; j < k; ++j)
    if (r(j, j) < Scalar(0)) q.col(j) = -q.col(j);
  return q;
}

template <typename Scalar>
struct ThinSvd {
  MatrixX<Scalar> u;      // n x k
  VectorX<Scalar> sigma;  // k, nonnegative, descending
  MatrixX<Scalar> v;      // k x k
};

// Thin SVD a = U diag(sigma) V^T with a deterministic gauge: the first
// nonzero entry of each column of U is made positive, V adjusted to match.
template <typename Scalar>
ThinSvd<Scalar> thin_svd(const MatrixX<Scalar>& a) {
  const Eigen::Index n = a.rows();
  const Eigen::Index k = a.cols();
  if (n < k || k < 1)
    throw DimensionError("thin_svd: need n >= k >= 1, got " +
                         std::to_string(n) + "x" + std::to_string(k));
  if (!all_finite(a)) throw Error("thin_svd: non-finite entries");
  Eigen::JacobiSVD<MatrixX<Scalar>> svd(
      a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  ThinSvd<Scalar> out{svd.matrixU(), svd.singularValues(), svd.matrixV()};
  if (!all_finite(out.u) || !all_finite(out.sigma) || !all_finite(out.v))
    throw ConvergenceError("thin_svd: factorization did not converge");
  for (Eigen::Index j = 0; j < k; ++j) {
    const Scalar colmax = max_abs(out.u.col(j));
    if (colmax == Scalar(0)) continue;
    for (Eigen::Index i = 0; i < n; ++i) {
      const Scalar uij = out.u(i, j);
      if (std::abs(uij) > Scalar(1e-12) * colmax) {
        if (uij < Scalar(0)) {
          out.u.col(j) = -out.u.col(j);
          out.v.col(j) = -out.v.col(j);
        }
        break;
      }
    }
  }
  return out;
}

// Numerical rank with singular values below 1e-14 * sigma_max clamped to 0.
template <typename Scalar>
Eigen::Index numerical_rank(const VectorX<Scalar>& sigma) {
  if (sigma.size() == 0) return 0;
  const Scalar cut = Scalar(1e-14) * sigma(0);
  Eigen::Index r = 0;
  for (Eigen::Index i = 0; i < sigma.size(); ++i)
    if (sigma(i) > cut) ++r;
  return r;
}

}  // namespace gcr
