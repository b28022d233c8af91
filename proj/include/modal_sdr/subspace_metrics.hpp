#pragma once

#include <Eigen/Dense>

#include <algorithm>

#include "modal_sdr/error.hpp"
#include "modal_sdr/numerics.hpp"

namespace modal_sdr {

/// Returns `b` if its columns are orthonormal to `tolerance`, otherwise its
/// Gram-Schmidt orthonormalization (same span).
template <typename Derived>
Matrix<typename Derived::Scalar> orthonormal_basis(const Eigen::MatrixBase<Derived>& b,
                                                   typename Derived::Scalar tolerance = 1e-8) {
  using Scalar = typename Derived::Scalar;
  const Matrix<Scalar> gram = b.transpose() * b;
  const Matrix<Scalar> eye = Matrix<Scalar>::Identity(b.cols(), b.cols());
  if ((gram - eye).cwiseAbs().maxCoeff() <= tolerance) return b;
  return gram_schmidt(b);
}

/// B B^T for an orthonormal basis B.
template <typename Derived>
Matrix<typename Derived::Scalar> projection_matrix(const Eigen::MatrixBase<Derived>& b) {
  const auto q = orthonormal_basis(b);
  return q * q.transpose();
}

/// trace(B^T B0 B0^T B) / d, clamped to [0, 1]. Both bases must share p and d.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar trace_correlation(const Eigen::MatrixBase<DerivedA>& estimated,
                                            const Eigen::MatrixBase<DerivedB>& truth) {
  using Scalar = typename DerivedA::Scalar;
  if (estimated.rows() != truth.rows() || estimated.cols() != truth.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "trace_correlation: bases differ in shape");
  }
  if (estimated.cols() == 0) {
    throw Error(ErrorKind::InvalidInput, "trace_correlation: empty basis");
  }
  const auto b = orthonormal_basis(estimated);
  const auto b0 = orthonormal_basis(truth);
  const Scalar r = (b0.transpose() * b).squaredNorm() / static_cast<Scalar>(b.cols());
  return std::clamp(r, Scalar(0), Scalar(1));
}

}  // namespace modal_sdr
