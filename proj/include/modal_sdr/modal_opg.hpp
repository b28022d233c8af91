#pragma once

// Local modal outer-product-of-gradients estimation.
//
// At every anchor Z_j a local-linear model y~ ~ b0 + b^T (Z - Z_j) is fitted by
// maximizing the kernel-smoothed modal objective
//
//   L(theta) = 1/n sum_l K_h1(Z_l - Z_j) phi_h2(y~_l - b0 - b^T (Z_l - Z_j))
//
// with an EM-style loop: the E-step forms normalized weights proportional to
// the summands, the M-step is a weighted least-squares solve. The gradient
// estimates b_(j) are aggregated into 1/n sum_j b_(j) b_(j)^T whose leading
// eigenvectors span the estimated central subspace.

#include <Eigen/Dense>

#include <optional>
#include <string>
#include <vector>

#include "modal_sdr/dataset.hpp"
#include "modal_sdr/kernels.hpp"
#include "modal_sdr/standardize.hpp"

namespace modal_sdr {

struct LmopgConfig {
  Bandwidths bandwidths;
  /// Zero skips the modal iterations entirely and yields the mean-OPG fit.
  int max_iter = 100;
  /// Stop once ||theta_new - theta_old|| / (1 + ||theta_old||) < tol.
  double tol = 1e-6;
  Index d = 2;
  /// Fit only this many anchors, spread evenly over the sample.
  std::optional<Index> anchor_subsample;
  /// Worker count for per-anchor fits; 0 picks the process default.
  int threads = 0;
  /// Allowed decrease of log L between consecutive iterations.
  double monotonicity_slack = 1e-10;

  void validate(Index p) const;
};

struct LocalFit {
  Index anchor = 0;
  VectorXd theta;
  int iterations = 0;
  bool converged = false;
  bool regularized = false;
  /// L(theta) at the returned theta.
  double final_objective = 0.0;
  /// log L(theta^(t)) for t = 0 .. iterations.
  std::vector<double> log_objective_trace;
  bool failed = false;
  std::string failure;
};

/// Row k of `grads` holds the gradient estimate at anchor `fits[k].anchor`.
/// Rows of failed fits are NaN and skipped by aggregation.
struct GradientField {
  MatrixXd grads;
  std::vector<LocalFit> fits;

  Index usable_rows() const;
};

struct Basis {
  /// p x d, orthonormal columns.
  MatrixXd columns;
  /// Full spectrum of the averaged gradient outer product, descending.
  VectorXd eigenvalues;
  std::optional<std::string> warning;
};

/// Per-anchor data shared by every EM iteration: the centered local-linear
/// design (1, (Z_l - Z_j)^T) and the predictor-kernel log weights.
class LocalModalProblem {
 public:
  LocalModalProblem(const MatrixXd& z, const VectorXd& y, Index anchor, const Bandwidths& bw);

  Index anchor() const { return anchor_; }
  const MatrixXd& design() const { return design_; }
  const VectorXd& log_kernel() const { return log_kernel_; }

  /// Normalized E-step weights at theta; returns log L(theta).
  double weights(const VectorXd& theta, VectorXd& out) const;
  double log_objective(const VectorXd& theta) const;

  /// Kernel-only weighted least-squares fit (the mean-OPG local estimate).
  VectorXd kernel_fit(bool* regularized = nullptr) const;

  LocalFit fit(const VectorXd& init, const LmopgConfig& cfg) const;

 private:
  double log_terms(const VectorXd& theta, VectorXd& terms) const;

  VectorXd y_;
  Index anchor_;
  Bandwidths bw_;
  MatrixXd design_;
  VectorXd log_kernel_;
};

/// W(l | theta) for anchor j, normalized to sum to one.
VectorXd modal_weights(const MatrixXd& z, const VectorXd& y, Index anchor, const VectorXd& theta,
                       const Bandwidths& bw);

/// EM iterations from `init` at anchor j.
LocalFit modal_local_fit(const MatrixXd& z, const VectorXd& y, Index anchor, const LmopgConfig& cfg,
                         const VectorXd& init);

/// Anchor indices used for a sample of size n under the configured subsample.
std::vector<Index> anchor_indices(Index n, const std::optional<Index>& subsample);

/// Runs a local modal fit at every anchor, each initialized from its kernel
/// least-squares fit. Expects whitened inputs.
GradientField estimate_gradient_field(const MatrixXd& z, const VectorXd& y, const LmopgConfig& cfg);

/// Leading d eigenvectors of the averaged outer product of usable rows.
Basis extract_basis(const GradientField& field, Index d);
Basis extract_basis(const MatrixXd& grads, Index d);

struct LmopgResult {
  Basis basis;
  Standardizer standardizer;
  GradientField field;
};

/// Whiten, estimate gradients, extract the basis and map it back to the
/// original predictor coordinates.
LmopgResult lmopg(const Dataset& data, const LmopgConfig& cfg);

/// lambda_i / sum(lambda).
VectorXd eigenvalue_proportions(const VectorXd& spectrum);

}  // namespace modal_sdr
