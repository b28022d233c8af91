#pragma once

#include <Eigen/Dense>

#include "modal_sdr/dataset.hpp"

namespace modal_sdr {

/// Sample moments of a dataset and the whitening map built from them.
/// Immutable once fitted.
struct Standardizer {
  VectorXd mean_x;
  MatrixXd cov_x;
  MatrixXd cov_x_inv_sqrt;
  double mean_y = 0.0;
  double sd_y = 1.0;

  Index p() const { return mean_x.size(); }
};

struct Whitened {
  MatrixXd z;
  VectorXd y;
};

/// Unbiased (n - 1) sample moments. Requires n >= p + 2, a full-rank sample
/// covariance and a non-constant response.
Standardizer fit_standardizer(const Dataset& data);

/// Z_i = cov^{-1/2} (X_i - mean), y~_i = (y_i - mean_y) / sd_y.
Whitened whiten(const Dataset& data, const Standardizer& s);

/// Whitens predictors only (response untouched).
MatrixXd whiten_predictors(const MatrixXd& x, const Standardizer& s);

/// Maps an orthonormal basis of the whitened space back to original
/// predictor coordinates and re-orthonormalizes it.
MatrixXd unwhiten_basis(const MatrixXd& nu, const Standardizer& s);

}  // namespace modal_sdr
