#include "doctest.h"

#include <random>

#include "modal_sdr/error.hpp"
#include "modal_sdr/standardize.hpp"
#include "modal_sdr/subspace_metrics.hpp"
#include "test_util.hpp"

using namespace modal_sdr;

namespace {

Dataset random_dataset(std::mt19937_64& rng, Index n, Index p) {
  Dataset d;
  // Correlated, shifted predictors.
  d.x = testing::random_matrix(rng, n, p) * testing::random_spd(rng, p, 50.0);
  d.x.rowwise() += Eigen::RowVectorXd::LinSpaced(p, -3.0, 4.0);
  d.y = d.x.col(0) + testing::random_matrix(rng, n, 1);
  return d;
}

struct Moments {
  VectorXd mean;
  MatrixXd cov;
};

// Direct recomputation, independent of fit_standardizer.
Moments moments(const MatrixXd& x) {
  Moments m;
  m.mean = VectorXd::Zero(x.cols());
  for (Index i = 0; i < x.rows(); ++i) m.mean += x.row(i).transpose();
  m.mean /= static_cast<double>(x.rows());
  m.cov = MatrixXd::Zero(x.cols(), x.cols());
  for (Index i = 0; i < x.rows(); ++i) {
    const VectorXd c = x.row(i).transpose() - m.mean;
    m.cov += c * c.transpose();
  }
  m.cov /= static_cast<double>(x.rows() - 1);
  return m;
}

}  // namespace

TEST_CASE("whitened data has zero mean and identity covariance") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 20; ++trial) {
    const Dataset d = random_dataset(rng, 200, 5);
    const Standardizer s = fit_standardizer(d);
    CHECK((s.cov_x_inv_sqrt * s.cov_x * s.cov_x_inv_sqrt - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
    const Whitened w = whiten(d, s);
    const Moments m = moments(w.z);
    CHECK(m.mean.cwiseAbs().maxCoeff() < 1e-10);
    CHECK((m.cov - MatrixXd::Identity(5, 5)).cwiseAbs().maxCoeff() < 1e-8);
    const double var_y = (w.y.array() - w.y.mean()).square().sum() / 199.0;
    CHECK(var_y == doctest::Approx(1.0).epsilon(1e-8));
  }
}

TEST_CASE("refitting on whitened data yields the identity standardizer") {
  std::mt19937_64 rng(4);
  const Dataset d = random_dataset(rng, 150, 4);
  const Whitened w = whiten(d, fit_standardizer(d));
  const Standardizer again = fit_standardizer(Dataset{w.z, w.y, {}});
  CHECK(again.mean_x.cwiseAbs().maxCoeff() < 1e-10);
  CHECK((again.cov_x_inv_sqrt - MatrixXd::Identity(4, 4)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(again.sd_y == doctest::Approx(1.0).epsilon(1e-10));
  CHECK(std::abs(again.mean_y) < 1e-12);
}

TEST_CASE("already standard data") {
  // Rows of +-sqrt(n-1)/sqrt(n)-style design: two points per axis give exact moments.
  const Index p = 3;
  MatrixXd x(2 * p, p);
  x.setZero();
  const double a = std::sqrt((2.0 * p - 1.0) / 2.0);
  for (Index k = 0; k < p; ++k) {
    x(2 * k, k) = a;
    x(2 * k + 1, k) = -a;
  }
  Dataset d{x, VectorXd::LinSpaced(2 * p, 0.0, 1.0), {}};
  const Standardizer s = fit_standardizer(d);
  CHECK(s.mean_x.norm() < 1e-15);
  CHECK((s.cov_x_inv_sqrt - MatrixXd::Identity(p, p)).norm() < 1e-12);

  Dataset single{s.mean_x.transpose(), VectorXd::Constant(1, s.mean_y), {}};
  const Whitened w = whiten(single, s);
  CHECK(w.z.norm() < 1e-15);
  CHECK(std::abs(w.y(0)) < 1e-15);
}

TEST_CASE("fit_standardizer error paths") {
  std::mt19937_64 rng(8);
  Dataset d = random_dataset(rng, 40, 3);
  d.y.setConstant(2.5);
  try {
    fit_standardizer(d);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateResponse);
  }

  Dataset collinear = random_dataset(rng, 40, 3);
  collinear.x.col(2) = collinear.x.col(0) - collinear.x.col(1);
  try {
    fit_standardizer(collinear);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::NearSingularCovariance);
  }

  Dataset small = random_dataset(rng, 4, 3);
  CHECK_THROWS_AS(fit_standardizer(small), Error);

  const Standardizer s = fit_standardizer(random_dataset(rng, 40, 3));
  Dataset wrong = random_dataset(rng, 40, 4);
  try {
    whiten(wrong, s);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DimensionMismatch);
  }
}

TEST_CASE("unwhiten_basis") {
  Standardizer identity;
  identity.mean_x = VectorXd::Zero(4);
  identity.cov_x = MatrixXd::Identity(4, 4);
  identity.cov_x_inv_sqrt = MatrixXd::Identity(4, 4);
  const MatrixXd nu = MatrixXd::Identity(4, 4).leftCols(2);
  CHECK((unwhiten_basis(nu, identity) - nu).norm() < 1e-15);

  Standardizer scaled = identity;
  scaled.cov_x.diagonal() << 4, 1, 1, 1;
  scaled.cov_x_inv_sqrt.diagonal() << 0.5, 1, 1, 1;
  const MatrixXd e1 = MatrixXd::Identity(4, 1);
  CHECK((unwhiten_basis(e1, scaled) - e1).norm() < 1e-15);

  std::mt19937_64 rng(30);
  for (int trial = 0; trial < 20; ++trial) {
    Standardizer s = identity;
    s.cov_x = testing::random_spd(rng, 4, 100.0);
    s.cov_x_inv_sqrt = inv_sqrt_sym(s.cov_x);
    const MatrixXd q = gram_schmidt(testing::random_matrix(rng, 4, 2));
    const MatrixXd mapped = s.cov_x_inv_sqrt * q;
    const MatrixXd expected = mapped * (mapped.transpose() * mapped).inverse() * mapped.transpose();
    const MatrixXd out = unwhiten_basis(q, s);
    CHECK((out * out.transpose() - expected).cwiseAbs().maxCoeff() < 1e-8);
  }
}
