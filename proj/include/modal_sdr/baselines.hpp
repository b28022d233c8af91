#pragma once

#include <vector>

#include "modal_sdr/dataset.hpp"
#include "modal_sdr/modal_opg.hpp"

namespace modal_sdr {

/// Least-squares outer product of gradients: one kernel-weighted local-linear
/// fit per anchor and no modal reweighting. Identical to lmopg with
/// max_iter = 0.
Basis mean_opg(const Dataset& data, const LmopgConfig& cfg);

struct SirConfig {
  int num_slices = 10;
  Index d = 2;
};

/// Slice label per observation after a stable sort on y. Slices are
/// contiguous in sorted order and their sizes differ by at most one.
std::vector<int> sir_slice_labels(const VectorXd& y, int num_slices);

/// Sliced inverse regression on whitened predictors, mapped back to the
/// original coordinates.
Basis sir(const Dataset& data, const SirConfig& cfg);

}  // namespace modal_sdr
