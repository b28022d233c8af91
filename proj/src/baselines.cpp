#include "modal_sdr/baselines.hpp"

#include <algorithm>
#include <numeric>
#include <sstream>

#include "modal_sdr/error.hpp"
#include "modal_sdr/numerics.hpp"
#include "modal_sdr/standardize.hpp"

namespace modal_sdr {

Basis mean_opg(const Dataset& data, const LmopgConfig& cfg) {
  LmopgConfig mean_cfg = cfg;
  mean_cfg.max_iter = 0;
  return lmopg(data, mean_cfg).basis;
}

std::vector<int> sir_slice_labels(const VectorXd& y, int num_slices) {
  const auto n = static_cast<std::size_t>(y.size());
  if (num_slices < 2) throw Error(ErrorKind::InvalidInput, "SIR needs at least two slices");
  if (n < 2 * static_cast<std::size_t>(num_slices)) {
    std::ostringstream msg;
    msg << "SIR with " << num_slices << " slices needs at least " << 2 * num_slices << " observations, got " << n;
    throw Error(ErrorKind::InvalidInput, msg.str());
  }
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return y(static_cast<Index>(a)) < y(static_cast<Index>(b));
  });

  const std::size_t h = static_cast<std::size_t>(num_slices);
  const std::size_t base = n / h;
  const std::size_t extra = n % h;
  std::vector<int> labels(n);
  std::size_t pos = 0;
  for (std::size_t s = 0; s < h; ++s) {
    const std::size_t size = base + (s < extra ? 1 : 0);
    for (std::size_t k = 0; k < size; ++k) labels[order[pos++]] = static_cast<int>(s);
  }
  return labels;
}

Basis sir(const Dataset& data, const SirConfig& cfg) {
  const Index p = data.p();
  if (cfg.d < 1 || cfg.d > p) throw Error(ErrorKind::InvalidInput, "target dimension out of range");
  const Standardizer s = fit_standardizer(data);
  const MatrixXd z = whiten_predictors(data.x, s);
  const auto labels = sir_slice_labels(data.y, cfg.num_slices);

  MatrixXd sums = MatrixXd::Zero(cfg.num_slices, p);
  VectorXd counts = VectorXd::Zero(cfg.num_slices);
  for (Index i = 0; i < data.n(); ++i) {
    const int h = labels[static_cast<std::size_t>(i)];
    sums.row(h) += z.row(i);
    counts(h) += 1.0;
  }
  const double n = static_cast<double>(data.n());
  MatrixXd kernel = MatrixXd::Zero(p, p);
  for (int h = 0; h < cfg.num_slices; ++h) {
    const VectorXd mean = sums.row(h).transpose() / counts(h);
    kernel.noalias() += (counts(h) / n) * mean * mean.transpose();
  }

  const auto eig = sym_eigen(kernel);
  Basis basis;
  basis.eigenvalues = eig.eigenvalues;
  basis.columns = unwhiten_basis(eig.eigenvectors.leftCols(cfg.d), s);
  return basis;
}

}  // namespace modal_sdr
