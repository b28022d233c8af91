#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "modal_sdr/dataset.hpp"
#include "modal_sdr/modal_opg.hpp"

namespace modal_sdr {

struct TabularFile {
  std::vector<std::string> header;
  MatrixXd rows;
};

/// Comma-separated, header row first, every body cell a finite number.
TabularFile read_csv(const std::filesystem::path& path);
TabularFile parse_csv(const std::string& text);

/// Inclusive 1-based range over body rows, e.g. "1-1000".
struct RowRange {
  Index first = 1;
  Index last = 1;

  static RowRange parse(const std::string& text);
};

/// Column selector: a header name, or failing that a zero-based index.
Index resolve_column(const TabularFile& table, const std::string& column);

/// Response from `response_column`; predictors are every other column in file
/// order except those listed in `exclude`.
Dataset to_dataset(const TabularFile& table, const std::string& response_column,
                   const std::optional<RowRange>& rows = std::nullopt, const std::vector<std::string>& exclude = {});
Dataset ingest_csv(const std::filesystem::path& path, const std::string& response_column,
                   const std::optional<RowRange>& rows = std::nullopt, const std::vector<std::string>& exclude = {});

/// Writes predictors (named from the dataset, or x1..xp) followed by the response.
std::string to_csv(const Dataset& data, const std::string& response_name = "y");
void write_csv(const Dataset& data, const std::filesystem::path& path, const std::string& response_name = "y");

struct OlsFit {
  double intercept = 0.0;
  double slope = 0.0;
  double r2 = 0.0;
  double adj_r2 = 0.0;
};

/// Simple least squares y ~ a + b x. A constant response has R^2 = 0.
OlsFit ols_fit(const VectorXd& x, const VectorXd& y);

/// 1 - (1 - r2)(n - 1)/(n - 2).
double adjusted_r2(double r2, Index n);

struct RegressionReport {
  double coefficient = 0.0;
  double intercept = 0.0;
  double train_adj_r2 = 0.0;
  double test_adj_r2 = 0.0;
  double test_mse = 0.0;
  double test_rmse = 0.0;
  VectorXd basis;
  VectorXd eigen_proportions;
  Index chosen_d = 1;
  std::vector<std::string> predictor_names;

  std::string to_json() const;
};

struct PipelineOptions {
  double cum_prop = 0.95;
  /// Overrides the eigenvalue-proportion rule.
  std::optional<Index> d;
};

/// Smallest d whose leading eigenvalue proportions sum to at least `cum_prop`.
Index choose_dimension(const VectorXd& proportions, double cum_prop);

/// Estimate the reduction on `train`, pick d, regress the response on the
/// leading direction and score the fit on `test`.
RegressionReport real_data_pipeline(const Dataset& train, const Dataset& test, const LmopgConfig& cfg,
                                    const PipelineOptions& options = {});

}  // namespace modal_sdr
