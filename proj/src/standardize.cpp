#include "modal_sdr/standardize.hpp"

#include <cmath>
#include <sstream>

#include "modal_sdr/error.hpp"
#include "modal_sdr/numerics.hpp"

namespace modal_sdr {

void Dataset::validate() const {
  if (x.rows() != y.size()) {
    std::ostringstream msg;
    msg << "predictor rows (" << x.rows() << ") differ from response length (" << y.size() << ")";
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
  if (!all_finite(x) || !all_finite(y)) {
    throw Error(ErrorKind::InvalidInput, "dataset contains non-finite values");
  }
}

Standardizer fit_standardizer(const Dataset& data) {
  data.validate();
  const Index n = data.n();
  const Index p = data.p();
  if (n < p + 2) {
    std::ostringstream msg;
    msg << "need at least p + 2 = " << p + 2 << " observations, got " << n;
    throw Error(ErrorKind::InvalidInput, msg.str());
  }
  Standardizer s;
  s.mean_x = data.x.colwise().mean().transpose();
  const MatrixXd centered = data.x.rowwise() - s.mean_x.transpose();
  s.cov_x = centered.transpose() * centered / static_cast<double>(n - 1);
  s.cov_x_inv_sqrt = inv_sqrt_sym(s.cov_x);

  s.mean_y = data.y.mean();
  const double var_y = (data.y.array() - s.mean_y).square().sum() / static_cast<double>(n - 1);
  s.sd_y = std::sqrt(var_y);
  if (!(s.sd_y > 0.0)) {
    throw Error(ErrorKind::DegenerateResponse, "response is constant");
  }
  return s;
}

MatrixXd whiten_predictors(const MatrixXd& x, const Standardizer& s) {
  if (x.cols() != s.p()) {
    std::ostringstream msg;
    msg << "standardizer fitted on p=" << s.p() << ", data has p=" << x.cols();
    throw Error(ErrorKind::DimensionMismatch, msg.str());
  }
  // cov_x_inv_sqrt is symmetric, so right-multiplying rows applies it to each X_i.
  return (x.rowwise() - s.mean_x.transpose()) * s.cov_x_inv_sqrt;
}

Whitened whiten(const Dataset& data, const Standardizer& s) {
  data.validate();
  Whitened w;
  w.z = whiten_predictors(data.x, s);
  w.y = (data.y.array() - s.mean_y) / s.sd_y;
  return w;
}

MatrixXd unwhiten_basis(const MatrixXd& nu, const Standardizer& s) {
  if (nu.rows() != s.p()) {
    throw Error(ErrorKind::DimensionMismatch, "basis row count differs from standardizer dimension");
  }
  return gram_schmidt(MatrixXd(s.cov_x_inv_sqrt * nu));
}

}  // namespace modal_sdr
