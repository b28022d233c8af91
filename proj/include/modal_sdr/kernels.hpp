#pragma once

// Gaussian kernels with bandwidth, in density and log-density form. Products
// of kernels are combined in log space by callers.

#include <Eigen/Core>

#include <cmath>
#include <sstream>

#include "modal_sdr/error.hpp"

namespace modal_sdr {

/// h1 is the shared per-coordinate predictor bandwidth, h2 the bandwidth of
/// the residual (modal) kernel.
struct Bandwidths {
  double h1 = 1.0;
  double h2 = 1.0;

  void validate() const {
    if (!(h1 > 0.0) || !(h2 > 0.0) || !std::isfinite(h1) || !std::isfinite(h2)) {
      std::ostringstream msg;
      msg << "bandwidths must be positive and finite (h1=" << h1 << ", h2=" << h2 << ")";
      throw Error(ErrorKind::InvalidInput, msg.str());
    }
  }
};

template <typename Scalar>
inline Scalar log_gauss1d(Scalar t, Scalar h) {
  constexpr Scalar half_log_two_pi = Scalar(0.918938533204672741780329736406L);
  const Scalar u = t / h;
  return -Scalar(0.5) * u * u - std::log(h) - half_log_two_pi;
}

/// h^{-1} (2 pi)^{-1/2} exp(-t^2 / (2 h^2)).
template <typename Scalar>
inline Scalar gauss1d(Scalar t, Scalar h) {
  return std::exp(log_gauss1d(t, h));
}

/// log of h^{-p} K(u / h) for the standard p-variate Gaussian product kernel.
template <typename Derived>
typename Derived::Scalar log_product_kernel(const Eigen::MatrixBase<Derived>& u,
                                            typename Derived::Scalar h) {
  using Scalar = typename Derived::Scalar;
  constexpr Scalar half_log_two_pi = Scalar(0.918938533204672741780329736406L);
  const auto p = static_cast<Scalar>(u.size());
  return -Scalar(0.5) * u.squaredNorm() / (h * h) - p * (std::log(h) + half_log_two_pi);
}

}  // namespace modal_sdr
