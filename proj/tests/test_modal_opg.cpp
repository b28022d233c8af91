#include "doctest.h"

#include <random>

#include "modal_sdr/error.hpp"
#include "modal_sdr/modal_opg.hpp"
#include "modal_sdr/subspace_metrics.hpp"
#include "test_util.hpp"

using namespace modal_sdr;

namespace {

// Direct (non-log-space) evaluation of the E-step ratio.
VectorXd direct_weights(const MatrixXd& z, const VectorXd& y, Index j, const VectorXd& theta, double h1, double h2) {
  const Index n = z.rows();
  VectorXd w(n);
  for (Index l = 0; l < n; ++l) {
    double k = 1.0;
    double fitted = theta(0);
    for (Index c = 0; c < z.cols(); ++c) {
      k *= gauss1d(z(l, c) - z(j, c), h1);
      fitted += theta(c + 1) * (z(l, c) - z(j, c));
    }
    w(l) = k * gauss1d(y(l) - fitted, h2);
  }
  return w / w.sum();
}

// Weighted score sum_l W(l | theta) (y_l - theta^T z*_l) z*_l at theta.
VectorXd modal_score(const MatrixXd& z, const VectorXd& y, Index j, const VectorXd& theta, double h1, double h2) {
  const VectorXd w = direct_weights(z, y, j, theta, h1, h2);
  VectorXd score = VectorXd::Zero(theta.size());
  for (Index l = 0; l < z.rows(); ++l) {
    VectorXd zs(theta.size());
    zs(0) = 1.0;
    zs.tail(z.cols()) = (z.row(l) - z.row(j)).transpose();
    score += w(l) * (y(l) - theta.dot(zs)) * zs;
  }
  return score;
}

VectorXd skewed_noise(std::mt19937_64& rng, Index n) {
  std::exponential_distribution<double> expo(1.0);
  VectorXd e(n);
  for (auto& v : e) v = expo(rng) - 1.0;
  return e;
}

}  // namespace

TEST_CASE("modal weights with identical points are uniform") {
  const MatrixXd z = MatrixXd::Constant(7, 3, 0.25);
  const VectorXd y = VectorXd::Constant(7, -1.0);
  const VectorXd w = modal_weights(z, y, 2, VectorXd::Zero(4), {1.0, 1.0});
  CHECK((w.array() - 1.0 / 7.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("modal weights favour the near point") {
  MatrixXd z(2, 1);
  z << 0.0, 5.0;
  const VectorXd y = VectorXd::Zero(2);
  const VectorXd w = modal_weights(z, y, 0, VectorXd::Zero(2), {1.0, 1.0});
  CHECK(w(0) > w(1));
  CHECK(w.sum() == doctest::Approx(1.0));
}

TEST_CASE("modal weights match the direct formula") {
  std::mt19937_64 rng(50);
  for (int trial = 0; trial < 20; ++trial) {
    const MatrixXd z = testing::random_matrix(rng, 50, 3);
    const VectorXd y = testing::random_matrix(rng, 50, 1);
    const VectorXd theta = 0.5 * testing::random_matrix(rng, 4, 1);
    const Index j = trial % 50;
    const VectorXd w = modal_weights(z, y, j, theta, {0.8, 0.6});
    const VectorXd expected = direct_weights(z, y, j, theta, 0.8, 0.6);
    CHECK((w - expected).cwiseAbs().maxCoeff() < 1e-10);
  }
}

TEST_CASE("modal weights survive far-away points in log space") {
  MatrixXd z(3, 2);
  z << 0, 0, 40, 40, 0.5, 0;
  const VectorXd y(VectorXd::Zero(3));
  const VectorXd w = modal_weights(z, y, 0, VectorXd::Zero(3), {0.1, 0.1});
  CHECK(w.allFinite());
  CHECK(w(1) < 1e-300);
  CHECK(w(0) == doctest::Approx(1.0));
}

TEST_CASE("noiseless linear data converges in at most two iterations") {
  std::mt19937_64 rng(60);
  const MatrixXd z = testing::random_matrix(rng, 60, 3);
  const Index j = 7;
  const Eigen::Vector4d truth(0.3, 1.5, -2.0, 0.5);
  VectorXd y(60);
  for (Index l = 0; l < 60; ++l) y(l) = truth(0) + truth.tail(3).dot((z.row(l) - z.row(j)).transpose());

  LmopgConfig cfg;
  for (int trial = 0; trial < 5; ++trial) {
    const VectorXd init = truth + 0.2 * testing::random_matrix(rng, 4, 1);
    const LocalFit fit = modal_local_fit(z, y, j, cfg, init);
    CHECK_FALSE(fit.regularized);
    CHECK(fit.converged);
    CHECK(fit.iterations <= 2);
    CHECK((fit.theta - truth).norm() < 1e-8);
  }
}

TEST_CASE("converged fit is a stationary point of the modal objective") {
  std::mt19937_64 rng(40);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd z = testing::random_matrix(rng, 40, 1);
    const VectorXd y = (2.0 * z.col(0).array().sin()).matrix() + 0.5 * skewed_noise(rng, 40);
    const Index j = trial;
    LmopgConfig cfg;
    cfg.d = 1;
    cfg.max_iter = 1000;
    const LocalModalProblem problem(z, y, j, cfg.bandwidths);
    const LocalFit fit = problem.fit(problem.kernel_fit(), cfg);
    REQUIRE(fit.converged);
    CHECK(modal_score(z, y, j, fit.theta, 1.0, 1.0).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("objective never decreases across EM iterations") {
  std::mt19937_64 rng(41);
  std::uniform_real_distribution<double> bw(0.3, 3.0);
  for (int trial = 0; trial < 200; ++trial) {
    const Index p = 1 + trial % 4;
    const Index n = 20 + trial % 30;
    const MatrixXd z = testing::random_matrix(rng, n, p);
    const VectorXd y = z.col(0) + z.col(p - 1).cwiseProduct(skewed_noise(rng, n));
    LmopgConfig cfg;
    cfg.d = 1;
    cfg.bandwidths = {bw(rng), bw(rng)};
    const VectorXd init = testing::random_matrix(rng, p + 1, 1);
    const LocalFit fit = modal_local_fit(z, y, trial % n, cfg, init);
    REQUIRE(fit.log_objective_trace.size() == static_cast<std::size_t>(fit.iterations + 1));
    for (std::size_t t = 1; t < fit.log_objective_trace.size(); ++t) {
      CHECK(fit.log_objective_trace[t] >= fit.log_objective_trace[t - 1] - 1e-10);
    }
    CHECK(std::log(fit.final_objective) == doctest::Approx(fit.log_objective_trace.back()));
  }
}

TEST_CASE("objective value matches the kernel-smoothed definition") {
  std::mt19937_64 rng(43);
  const MatrixXd z = testing::random_matrix(rng, 30, 2);
  const VectorXd y = testing::random_matrix(rng, 30, 1);
  const VectorXd theta = testing::random_matrix(rng, 3, 1);
  const LocalModalProblem problem(z, y, 4, {1.2, 0.7});
  double l = 0.0;
  for (Index i = 0; i < 30; ++i) {
    const Eigen::RowVector2d u = z.row(i) - z.row(4);
    l += gauss1d(u(0), 1.2) * gauss1d(u(1), 1.2) * gauss1d(y(i) - theta(0) - u.dot(theta.tail(2).transpose()), 0.7);
  }
  l /= 30.0;
  CHECK(std::exp(problem.log_objective(theta)) == doctest::Approx(l).epsilon(1e-12));
}

TEST_CASE("linear truth gives constant gradients") {
  std::mt19937_64 rng(44);
  const MatrixXd z = testing::random_matrix(rng, 80, 4);
  const VectorXd y = z.col(0);
  LmopgConfig cfg;
  cfg.d = 1;
  const GradientField field = estimate_gradient_field(z, y, cfg);
  CHECK(field.grads.rows() == 80);
  for (Index k = 0; k < field.grads.rows(); ++k) {
    CHECK((field.grads.row(k) - Eigen::RowVector4d(1, 0, 0, 0)).cwiseAbs().maxCoeff() < 1e-6);
  }
}

TEST_CASE("extract_basis trivial fields") {
  MatrixXd rows = MatrixXd::Zero(6, 4);
  rows.col(0).setOnes();
  Basis b = extract_basis(rows, 1);
  CHECK((b.columns - MatrixXd::Identity(4, 1)).norm() < 1e-14);
  CHECK((b.eigenvalues - Eigen::Vector4d(1, 0, 0, 0)).norm() < 1e-14);

  rows.setZero();
  for (Index k = 0; k < 6; ++k) rows(k, 1) = k % 2 ? -1.0 : 1.0;
  b = extract_basis(rows, 1);
  CHECK((b.columns.col(0) - Eigen::Vector4d(0, 1, 0, 0)).norm() < 1e-14);
  CHECK(b.eigenvalues(0) == doctest::Approx(1.0));
  CHECK(b.warning == std::nullopt);

  b = extract_basis(rows, 2);
  REQUIRE(b.warning.has_value());
  CHECK(b.warning->find("effective rank 1") != std::string::npos);
}

TEST_CASE("extract_basis matches brute-force averaging") {
  std::mt19937_64 rng(45);
  for (int trial = 0; trial < 10; ++trial) {
    const MatrixXd g = testing::random_matrix(rng, 37, 5) * testing::random_spd(rng, 5, 30.0);
    MatrixXd avg = MatrixXd::Zero(5, 5);
    for (Index i = 0; i < 5; ++i)
      for (Index k = 0; k < 5; ++k) {
        for (Index r = 0; r < 37; ++r) avg(i, k) += g(r, i) * g(r, k);
        avg(i, k) /= 37.0;
      }
    Eigen::SelfAdjointEigenSolver<MatrixXd> solver(avg);
    const MatrixXd top = solver.eigenvectors().rightCols(2);
    const Basis b = extract_basis(g, 2);
    CHECK((b.columns * b.columns.transpose() - top * top.transpose()).cwiseAbs().maxCoeff() < 1e-8);
    CHECK(b.eigenvalues(0) == doctest::Approx(solver.eigenvalues()(4)).epsilon(1e-10));
  }
}

TEST_CASE("analytic gradients of a two-index model recover the span exactly") {
  std::mt19937_64 rng(46);
  const Index p = 8;
  const MatrixXd z = testing::random_matrix(rng, 300, p);
  MatrixXd b0(p, 2);
  b0.col(0) = testing::random_matrix(rng, p, 1);
  b0.col(1) = testing::random_matrix(rng, p, 1);
  // f(z) = sin(u1) + u1 * u2^2 with u = B0^T z; grad f = B0 (cos u1 + u2^2, 2 u1 u2)^T.
  MatrixXd grads(300, p);
  for (Index i = 0; i < 300; ++i) {
    const Eigen::Vector2d u = b0.transpose() * z.row(i).transpose();
    grads.row(i) = (b0 * Eigen::Vector2d(std::cos(u(0)) + u(1) * u(1), 2.0 * u(0) * u(1))).transpose();
  }
  const Basis basis = extract_basis(grads, 2);
  CHECK(trace_correlation(basis.columns, b0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(basis.eigenvalues.tail(p - 2).cwiseAbs().maxCoeff() <= 1e-10);
}

TEST_CASE("rotation equivariance on noiseless linear data") {
  std::mt19937_64 rng(47);
  const Index p = 5;
  const MatrixXd z = testing::random_matrix(rng, 120, p);
  const VectorXd beta = testing::random_matrix(rng, p, 1);
  const MatrixXd q = testing::random_orthogonal(rng, p);
  LmopgConfig cfg;
  cfg.d = 1;
  const VectorXd y = z * beta;
  const MatrixXd z_rot = z * q.transpose();
  const Basis orig = extract_basis(estimate_gradient_field(z, y, cfg), 1);
  const Basis rot = extract_basis(estimate_gradient_field(z_rot, y, cfg), 1);
  CHECK(trace_correlation(MatrixXd(q * orig.columns), rot.columns) >= 0.999);
}

TEST_CASE("estimation is deterministic and independent of worker count") {
  std::mt19937_64 rng(48);
  Dataset data;
  data.x = testing::random_matrix(rng, 120, 4);
  data.y = data.x.col(0) + data.x.col(1).cwiseProduct(skewed_noise(rng, 120));
  LmopgConfig cfg;
  cfg.threads = 1;
  const LmopgResult a = lmopg(data, cfg);
  const LmopgResult b = lmopg(data, cfg);
  cfg.threads = 3;
  const LmopgResult c = lmopg(data, cfg);
  CHECK(a.basis.columns == b.basis.columns);
  CHECK(a.basis.columns == c.basis.columns);
  CHECK(a.basis.eigenvalues == c.basis.eigenvalues);
  CHECK((a.basis.columns.transpose() * a.basis.columns - MatrixXd::Identity(2, 2)).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(a.basis.eigenvalues.minCoeff() >= -1e-10);
}

TEST_CASE("anchor subsample is spread evenly") {
  CHECK(anchor_indices(5, std::nullopt) == std::vector<Index>{0, 1, 2, 3, 4});
  CHECK(anchor_indices(10, 4) == std::vector<Index>{0, 2, 5, 7});
  CHECK(anchor_indices(3, 10).size() == 3);

  std::mt19937_64 rng(49);
  const MatrixXd z = testing::random_matrix(rng, 90, 3);
  LmopgConfig cfg;
  cfg.anchor_subsample = 30;
  const GradientField field = estimate_gradient_field(z, z.col(1), cfg);
  CHECK(field.grads.rows() == 30);
  CHECK(field.fits[1].anchor == 3);
}

TEST_CASE("failing anchors abort estimation past the failure limit") {
  MatrixXd z = MatrixXd::Zero(20, 2);
  z.col(0) = VectorXd::LinSpaced(20, -1.0, 1.0);
  z.col(1).setConstant(std::numeric_limits<double>::quiet_NaN());
  LmopgConfig cfg;
  try {
    estimate_gradient_field(z, z.col(0), cfg);
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::EstimationFailed);
  }
}

TEST_CASE("configuration validation") {
  LmopgConfig cfg;
  cfg.d = 5;
  CHECK_THROWS_AS(cfg.validate(4), Error);
  cfg.d = 1;
  cfg.tol = 0.0;
  CHECK_THROWS_AS(cfg.validate(4), Error);
  cfg.tol = 1e-6;
  cfg.bandwidths.h2 = -1.0;
  CHECK_THROWS_AS(cfg.validate(4), Error);
}

TEST_CASE("eigenvalue proportions") {
  CHECK((eigenvalue_proportions(Eigen::Vector3d(1, 0, 0)) - Eigen::Vector3d(1, 0, 0)).norm() == 0.0);
  CHECK((eigenvalue_proportions(Eigen::Vector2d(3, 1)) - Eigen::Vector2d(0.75, 0.25)).norm() < 1e-15);
  try {
    eigenvalue_proportions(Eigen::Vector3d::Zero());
    FAIL("expected an error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::DegenerateSpectrum);
  }
}
