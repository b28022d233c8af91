#pragma once

// Small dense primitives shared by every estimator: symmetric spectral
// decomposition, inverse square roots, weighted least squares and
// Gram-Schmidt. Sizes here are p (tens) by n (thousands).

#include <Eigen/Dense>

#include <cmath>
#include <sstream>

#include "modal_sdr/error.hpp"

namespace modal_sdr {

template <typename Scalar>
using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
template <typename Scalar>
using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

/// Eigenpairs of a symmetric matrix, eigenvalues in non-increasing order.
/// Column i of `eigenvectors` pairs with `eigenvalues(i)`; each column has its
/// largest-magnitude entry non-negative.
template <typename Scalar>
struct SymEigen {
  Vector<Scalar> eigenvalues;
  Matrix<Scalar> eigenvectors;
};

template <typename Derived>
bool all_finite(const Eigen::DenseBase<Derived>& m) {
  return m.derived().array().isFinite().all();
}

/// Flips `v` so that its first largest-magnitude entry is non-negative.
template <typename Derived>
void canonicalize_sign(Eigen::MatrixBase<Derived>& v) {
  Eigen::Index arg = 0;
  typename Derived::RealScalar best = -1;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    const auto a = std::abs(v(i));
    if (a > best) {
      best = a;
      arg = i;
    }
  }
  if (v(arg) < 0) v = -v;
}

template <typename Derived>
SymEigen<typename Derived::Scalar> sym_eigen(const Eigen::MatrixBase<Derived>& m) {
  using Scalar = typename Derived::Scalar;
  if (m.rows() != m.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "sym_eigen: matrix is not square");
  }
  if (!all_finite(m)) {
    throw Error(ErrorKind::InvalidInput, "sym_eigen: non-finite entry");
  }
  const Matrix<Scalar> sym = (m + m.transpose()) / Scalar(2);
  Eigen::SelfAdjointEigenSolver<Matrix<Scalar>> solver(sym);
  if (solver.info() != Eigen::Success) {
    throw Error(ErrorKind::InvalidInput, "sym_eigen: eigensolver did not converge");
  }
  const Eigen::Index p = sym.rows();
  SymEigen<Scalar> out{Vector<Scalar>(p), Matrix<Scalar>(p, p)};
  // Eigen returns ascending order.
  for (Eigen::Index i = 0; i < p; ++i) {
    out.eigenvalues(i) = solver.eigenvalues()(p - 1 - i);
    out.eigenvectors.col(i) = solver.eigenvectors().col(p - 1 - i);
    auto col = out.eigenvectors.col(i);
    canonicalize_sign(col);
  }
  return out;
}

/// V diag(lambda^{-1/2}) V^T for a symmetric positive-definite matrix.
template <typename Derived>
Matrix<typename Derived::Scalar> inv_sqrt_sym(const Eigen::MatrixBase<Derived>& m,
                                              typename Derived::Scalar min_eigenvalue = 1e-10) {
  using Scalar = typename Derived::Scalar;
  const auto eig = sym_eigen(m);
  const Scalar smallest = eig.eigenvalues(eig.eigenvalues.size() - 1);
  if (!(smallest > min_eigenvalue)) {
    std::ostringstream msg;
    msg << "smallest eigenvalue " << smallest << " is not above " << min_eigenvalue;
    throw Error(ErrorKind::NearSingularCovariance, msg.str());
  }
  const Vector<Scalar> scale = eig.eigenvalues.array().rsqrt();
  Matrix<Scalar> out = eig.eigenvectors * scale.asDiagonal() * eig.eigenvectors.transpose();
  return (out + out.transpose()) / Scalar(2);
}

template <typename Scalar>
struct WlsSolution {
  Vector<Scalar> theta;
  bool regularized = false;
};

struct WlsOptions {
  double max_condition = 1e12;
  double ridge = 1e-8;
};

/// argmin sum_i w_i (y_i - x_i^T theta)^2 by QR on the row-scaled design.
/// Falls back to a ridge-stabilized solve when the normal matrix is
/// ill-conditioned (reciprocal condition below 1 / max_condition).
template <typename DesignDerived, typename ResponseDerived, typename WeightDerived>
WlsSolution<typename DesignDerived::Scalar> weighted_least_squares(
    const Eigen::MatrixBase<DesignDerived>& design, const Eigen::MatrixBase<ResponseDerived>& response,
    const Eigen::MatrixBase<WeightDerived>& weights, const WlsOptions& options = {}) {
  using Scalar = typename DesignDerived::Scalar;
  const Eigen::Index n = design.rows();
  const Eigen::Index q = design.cols();
  if (response.size() != n || weights.size() != n) {
    throw Error(ErrorKind::DimensionMismatch, "weighted_least_squares: row counts differ");
  }
  if (q > n) {
    throw Error(ErrorKind::InvalidInput, "weighted_least_squares: more parameters than rows");
  }
  if ((weights.array() < Scalar(0)).any() || !all_finite(weights)) {
    throw Error(ErrorKind::InvalidInput, "weighted_least_squares: weights must be finite and non-negative");
  }
  if (!(weights.sum() > Scalar(0))) {
    throw Error(ErrorKind::DegenerateWeights, "weighted_least_squares: all weights are zero");
  }

  Matrix<Scalar> normal = Matrix<Scalar>::Zero(q, q);
  normal.template selfadjointView<Eigen::Lower>().rankUpdate(
      design.transpose() * weights.cwiseSqrt().asDiagonal());
  normal.template triangularView<Eigen::StrictlyUpper>() = normal.transpose();
  const Vector<Scalar> rhs = design.transpose() * weights.cwiseProduct(response);

  WlsSolution<Scalar> out;
  Eigen::LLT<Matrix<Scalar>> llt(normal);
  if (llt.info() == Eigen::Success && llt.rcond() * Scalar(options.max_condition) >= Scalar(1)) {
    // QR on the scaled design keeps the conditioning of X rather than X^T W X.
    const Vector<Scalar> root = weights.cwiseSqrt();
    const Matrix<Scalar> scaled = root.asDiagonal() * design;
    out.theta = Eigen::HouseholderQR<Matrix<Scalar>>(scaled).solve(root.cwiseProduct(response));
    return out;
  }
  out.regularized = true;
  normal.diagonal().array() += Scalar(options.ridge);
  Eigen::LDLT<Matrix<Scalar>> ldlt(normal);
  out.theta = ldlt.solve(rhs);
  if (ldlt.info() != Eigen::Success || !all_finite(out.theta)) {
    throw Error(ErrorKind::DegenerateWeights, "weighted_least_squares: ridge solve failed");
  }
  return out;
}

/// Orthonormalizes columns (modified Gram-Schmidt with one re-orthogonalization
/// pass). Column order and orientation are preserved, so orthonormal input
/// comes back unchanged.
template <typename Derived>
Matrix<typename Derived::Scalar> gram_schmidt(const Eigen::MatrixBase<Derived>& b,
                                              typename Derived::Scalar tolerance = 1e-10) {
  using Scalar = typename Derived::Scalar;
  if (!all_finite(b)) {
    throw Error(ErrorKind::InvalidInput, "gram_schmidt: non-finite entry");
  }
  Matrix<Scalar> q = b;
  for (Eigen::Index k = 0; k < q.cols(); ++k) {
    const Scalar original = q.col(k).norm();
    for (int pass = 0; pass < 2; ++pass) {
      for (Eigen::Index i = 0; i < k; ++i) {
        q.col(k) -= q.col(i).dot(q.col(k)) * q.col(i);
      }
    }
    const Scalar norm = q.col(k).norm();
    if (!(norm > tolerance * std::max(Scalar(1), original))) {
      Eigen::ColPivHouseholderQR<Matrix<Scalar>> qr(b);
      qr.setThreshold(tolerance);
      std::ostringstream msg;
      msg << "columns are linearly dependent; effective rank " << qr.rank() << " of " << b.cols();
      throw Error(ErrorKind::RankDeficient, msg.str());
    }
    q.col(k) /= norm;
  }
  return q;
}

}  // namespace modal_sdr
