#include "modal_sdr/modal_opg.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "modal_sdr/error.hpp"
#include "modal_sdr/numerics.hpp"
#include "modal_sdr/parallel.hpp"

namespace modal_sdr {

namespace {

constexpr double kFailureFractionLimit = 0.2;
constexpr double kPositiveEigenvalue = 1e-12;

std::string anchor_label(Index anchor) {
  return "anchor " + std::to_string(anchor);
}

}  // namespace

void LmopgConfig::validate(Index p) const {
  bandwidths.validate();
  if (max_iter < 0) throw Error(ErrorKind::InvalidInput, "max_iter must be non-negative");
  if (!(tol > 0.0)) throw Error(ErrorKind::InvalidInput, "tol must be positive");
  if (d < 1 || d > p) {
    std::ostringstream msg;
    msg << "target dimension d=" << d << " must lie in [1, " << p << "]";
    throw Error(ErrorKind::InvalidInput, msg.str());
  }
  if (anchor_subsample && *anchor_subsample < 1) {
    throw Error(ErrorKind::InvalidInput, "anchor subsample must be positive");
  }
}

Index GradientField::usable_rows() const {
  Index count = 0;
  for (const auto& fit : fits) count += fit.failed ? 0 : 1;
  return count;
}

LocalModalProblem::LocalModalProblem(const MatrixXd& z, const VectorXd& y, Index anchor, const Bandwidths& bw)
    : y_(y), anchor_(anchor), bw_(bw) {
  const Index n = z.rows();
  const Index p = z.cols();
  if (y.size() != n) throw Error(ErrorKind::DimensionMismatch, "predictor and response lengths differ");
  if (anchor < 0 || anchor >= n) throw Error(ErrorKind::InvalidInput, anchor_label(anchor) + " out of range");
  bw.validate();

  design_.resize(n, p + 1);
  design_.col(0).setOnes();
  design_.rightCols(p) = z.rowwise() - z.row(anchor);
  log_kernel_.resize(n);
  for (Index l = 0; l < n; ++l) {
    log_kernel_(l) = log_product_kernel(design_.row(l).tail(p), bw.h1);
  }
}

double LocalModalProblem::log_terms(const VectorXd& theta, VectorXd& terms) const {
  terms.noalias() = y_ - design_ * theta;
  const double h2 = bw_.h2;
  double max_term = -std::numeric_limits<double>::infinity();
  for (Index l = 0; l < terms.size(); ++l) {
    terms(l) = log_kernel_(l) + log_gauss1d(terms(l), h2);
    if (terms(l) > max_term) max_term = terms(l);
  }
  if (!std::isfinite(max_term)) {
    throw Error(ErrorKind::DegenerateNeighborhood, anchor_label(anchor_) + ": kernel mass underflows");
  }
  return max_term;
}

double LocalModalProblem::weights(const VectorXd& theta, VectorXd& out) const {
  const double max_term = log_terms(theta, out);
  out = (out.array() - max_term).exp();
  const double total = out.sum();
  out /= total;
  return max_term + std::log(total) - std::log(static_cast<double>(out.size()));
}

double LocalModalProblem::log_objective(const VectorXd& theta) const {
  VectorXd scratch;
  return weights(theta, scratch);
}

VectorXd LocalModalProblem::kernel_fit(bool* regularized) const {
  const VectorXd w = (log_kernel_.array() - log_kernel_.maxCoeff()).exp();
  auto sol = weighted_least_squares(design_, y_, w);
  if (regularized) *regularized = sol.regularized;
  return sol.theta;
}

LocalFit LocalModalProblem::fit(const VectorXd& init, const LmopgConfig& cfg) const {
  if (init.size() != design_.cols()) {
    throw Error(ErrorKind::DimensionMismatch, "initial theta must have p + 1 entries");
  }
  if (!all_finite(init)) throw Error(ErrorKind::InvalidInput, "initial theta is not finite");

  LocalFit fit;
  fit.anchor = anchor_;
  fit.theta = init;
  VectorXd w(design_.rows());
  double log_l = weights(fit.theta, w);
  fit.log_objective_trace.push_back(log_l);

  for (int t = 0; t < cfg.max_iter; ++t) {
    const auto step = weighted_least_squares(design_, y_, w);
    if (!all_finite(step.theta)) {
      throw Error(ErrorKind::Divergence, anchor_label(anchor_) + ": non-finite update");
    }
    fit.regularized = fit.regularized || step.regularized;
    // A ridge step need not maximise the surrogate; keep theta when it would
    // raise the weighted residual sum of squares (generalized EM).
    const double sse_old = w.dot((y_ - design_ * fit.theta).cwiseAbs2());
    const double sse_new = w.dot((y_ - design_ * step.theta).cwiseAbs2());
    const VectorXd next = sse_new <= sse_old ? step.theta : fit.theta;
    const double change = (next - fit.theta).norm() / (1.0 + fit.theta.norm());
    fit.theta = next;
    fit.iterations = t + 1;

    const double next_log_l = weights(fit.theta, w);
    if (next_log_l < log_l - cfg.monotonicity_slack) {
      std::ostringstream msg;
      msg << anchor_label(anchor_) << ": objective decreased at iteration " << fit.iterations << " (log L "
          << log_l << " -> " << next_log_l << ")";
      throw Error(ErrorKind::InternalInvariant, msg.str());
    }
    log_l = next_log_l;
    fit.log_objective_trace.push_back(log_l);
    if (change < cfg.tol) {
      fit.converged = true;
      break;
    }
  }
  fit.final_objective = std::exp(log_l);
  return fit;
}

VectorXd modal_weights(const MatrixXd& z, const VectorXd& y, Index anchor, const VectorXd& theta,
                       const Bandwidths& bw) {
  if (theta.size() != z.cols() + 1) throw Error(ErrorKind::DimensionMismatch, "theta must have p + 1 entries");
  if (!all_finite(theta)) throw Error(ErrorKind::InvalidInput, "theta is not finite");
  const LocalModalProblem problem(z, y, anchor, bw);
  VectorXd w;
  problem.weights(theta, w);
  return w;
}

LocalFit modal_local_fit(const MatrixXd& z, const VectorXd& y, Index anchor, const LmopgConfig& cfg,
                         const VectorXd& init) {
  cfg.validate(z.cols());
  if (z.rows() < z.cols() + 2) throw Error(ErrorKind::InvalidInput, "need at least p + 2 observations");
  return LocalModalProblem(z, y, anchor, cfg.bandwidths).fit(init, cfg);
}

std::vector<Index> anchor_indices(Index n, const std::optional<Index>& subsample) {
  const Index m = subsample ? std::min(*subsample, n) : n;
  std::vector<Index> out(static_cast<std::size_t>(m));
  for (Index k = 0; k < m; ++k) out[static_cast<std::size_t>(k)] = (k * n) / m;
  return out;
}

GradientField estimate_gradient_field(const MatrixXd& z, const VectorXd& y, const LmopgConfig& cfg) {
  const Index n = z.rows();
  const Index p = z.cols();
  cfg.validate(p);
  if (y.size() != n) throw Error(ErrorKind::DimensionMismatch, "predictor and response lengths differ");
  if (n < p + 2) throw Error(ErrorKind::InvalidInput, "need at least p + 2 observations");

  const auto anchors = anchor_indices(n, cfg.anchor_subsample);
  GradientField field;
  field.grads.resize(static_cast<Index>(anchors.size()), p);
  field.fits.resize(anchors.size());

  parallel_for(anchors.size(), cfg.threads, [&](std::size_t k) {
    const Index j = anchors[k];
    LocalFit& fit = field.fits[k];
    try {
      const LocalModalProblem problem(z, y, j, cfg.bandwidths);
      bool init_regularized = false;
      const VectorXd init = problem.kernel_fit(&init_regularized);
      fit = problem.fit(init, cfg);
      fit.regularized = fit.regularized || init_regularized;
    } catch (const Error& e) {
      if (e.kind() == ErrorKind::InternalInvariant) throw;
      fit = LocalFit{};
      fit.anchor = j;
      fit.failed = true;
      fit.failure = e.what();
    }
    if (fit.failed) {
      field.grads.row(static_cast<Index>(k)).setConstant(std::numeric_limits<double>::quiet_NaN());
    } else {
      field.grads.row(static_cast<Index>(k)) = fit.theta.tail(p).transpose();
    }
  });

  const Index failures = static_cast<Index>(anchors.size()) - field.usable_rows();
  if (static_cast<double>(failures) > kFailureFractionLimit * static_cast<double>(anchors.size())) {
    std::ostringstream msg;
    msg << failures << " of " << anchors.size() << " anchor fits failed";
    for (const auto& fit : field.fits) {
      if (fit.failed) {
        msg << "; first: " << fit.failure;
        break;
      }
    }
    throw Error(ErrorKind::EstimationFailed, msg.str());
  }
  return field;
}

Basis extract_basis(const MatrixXd& grads, Index d) {
  const Index p = grads.cols();
  if (d < 1 || d > p) throw Error(ErrorKind::InvalidInput, "target dimension out of range");
  MatrixXd outer = MatrixXd::Zero(p, p);
  Index used = 0;
  // Fixed row order keeps the sum bit-reproducible.
  for (Index k = 0; k < grads.rows(); ++k) {
    if (!grads.row(k).allFinite()) continue;
    outer.noalias() += grads.row(k).transpose() * grads.row(k);
    ++used;
  }
  if (used < d) {
    std::ostringstream msg;
    msg << "only " << used << " usable gradient rows for d=" << d;
    throw Error(ErrorKind::EstimationFailed, msg.str());
  }
  outer /= static_cast<double>(used);

  const auto eig = sym_eigen(outer);
  Basis basis;
  basis.columns = eig.eigenvectors.leftCols(d);
  basis.eigenvalues = eig.eigenvalues;
  const Index positive = (eig.eigenvalues.array() > kPositiveEigenvalue).count();
  if (positive < d) {
    std::ostringstream msg;
    msg << "effective rank " << positive << " is below target dimension " << d;
    basis.warning = msg.str();
  }
  return basis;
}

Basis extract_basis(const GradientField& field, Index d) {
  return extract_basis(field.grads, d);
}

LmopgResult lmopg(const Dataset& data, const LmopgConfig& cfg) {
  cfg.validate(data.p());
  LmopgResult result;
  result.standardizer = fit_standardizer(data);
  const Whitened w = whiten(data, result.standardizer);
  result.field = estimate_gradient_field(w.z, w.y, cfg);
  result.basis = extract_basis(result.field, cfg.d);
  result.basis.columns = unwhiten_basis(result.basis.columns, result.standardizer);
  return result;
}

VectorXd eigenvalue_proportions(const VectorXd& spectrum) {
  if (spectrum.size() == 0) throw Error(ErrorKind::DegenerateSpectrum, "empty spectrum");
  // Round-off can leave tiny negative eigenvalues on a PSD matrix.
  const VectorXd clipped = spectrum.cwiseMax(0.0);
  if ((spectrum.array() < -1e-10 * std::max(1.0, spectrum.cwiseAbs().maxCoeff())).any()) {
    throw Error(ErrorKind::InvalidInput, "spectrum has negative entries");
  }
  const double total = clipped.sum();
  if (!(total > 0.0)) throw Error(ErrorKind::DegenerateSpectrum, "all eigenvalues are zero");
  return clipped / total;
}

}  // namespace modal_sdr
