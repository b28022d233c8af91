#pragma once

#include <Eigen/Dense>

#include <string>
#include <vector>

namespace modal_sdr {

using Eigen::Index;
using Eigen::MatrixXd;
using Eigen::VectorXd;

/// n x p predictors with an n-vector response.
struct Dataset {
  MatrixXd x;
  VectorXd y;
  std::vector<std::string> predictor_names;

  Index n() const { return x.rows(); }
  Index p() const { return x.cols(); }

  /// Throws unless x and y agree in row count and every entry is finite.
  void validate() const;
};

}  // namespace modal_sdr
