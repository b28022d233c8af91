#pragma once

#include <stdexcept>
#include <string>

namespace modal_sdr {

enum class ErrorKind {
  InvalidInput,
  NearSingularCovariance,
  DegenerateWeights,
  RankDeficient,
  DegenerateResponse,
  DimensionMismatch,
  DegenerateNeighborhood,
  Divergence,
  InternalInvariant,
  EstimationFailed,
  DegenerateSpectrum,
  DegenerateRegressor,
  Parse,
  MissingColumn,
  Io,
};

inline const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::InvalidInput: return "invalid-input";
    case ErrorKind::NearSingularCovariance: return "near-singular-covariance";
    case ErrorKind::DegenerateWeights: return "degenerate-weights";
    case ErrorKind::RankDeficient: return "rank-deficient";
    case ErrorKind::DegenerateResponse: return "degenerate-response";
    case ErrorKind::DimensionMismatch: return "dimension-mismatch";
    case ErrorKind::DegenerateNeighborhood: return "degenerate-neighborhood";
    case ErrorKind::Divergence: return "divergence";
    case ErrorKind::InternalInvariant: return "internal-invariant";
    case ErrorKind::EstimationFailed: return "estimation-failed";
    case ErrorKind::DegenerateSpectrum: return "degenerate-spectrum";
    case ErrorKind::DegenerateRegressor: return "degenerate-regressor";
    case ErrorKind::Parse: return "parse";
    case ErrorKind::MissingColumn: return "missing-column";
    case ErrorKind::Io: return "io";
  }
  return "unknown";
}

// Every failure raised by the library carries a machine-checkable kind.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(std::string(to_string(kind)) + ": " + what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

}  // namespace modal_sdr
