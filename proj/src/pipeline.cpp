#include "modal_sdr/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "json.hpp"
#include "modal_sdr/error.hpp"
#include "modal_sdr/standardize.hpp"

namespace modal_sdr {

namespace {

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  return s;
}

std::vector<std::string_view> split_fields(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string location(std::size_t line, std::size_t column) {
  return "line " + std::to_string(line) + ", column " + std::to_string(column);
}

std::optional<Index> parse_index(const std::string& text) {
  if (text.empty() || !std::all_of(text.begin(), text.end(), [](char c) { return c >= '0' && c <= '9'; })) {
    return std::nullopt;
  }
  return static_cast<Index>(std::stoll(text));
}

nlohmann::ordered_json to_json_array(const VectorXd& v) {
  auto out = nlohmann::ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

}  // namespace

TabularFile parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t line_no = 0;
  TabularFile table;
  std::vector<std::vector<double>> body;

  while (std::getline(in, line)) {
    ++line_no;
    std::string_view view(line);
    if (line_no == 1 && view.starts_with("\xEF\xBB\xBF")) view.remove_prefix(3);
    if (trim(view).empty()) continue;
    const auto fields = split_fields(view);
    if (table.header.empty()) {
      for (const auto f : fields) table.header.emplace_back(f);
      continue;
    }
    if (fields.size() != table.header.size()) {
      std::ostringstream msg;
      msg << "line " << line_no << ": expected " << table.header.size() << " fields, found " << fields.size();
      throw Error(ErrorKind::Parse, msg.str());
    }
    std::vector<double> row(fields.size());
    for (std::size_t c = 0; c < fields.size(); ++c) {
      const auto f = fields[c];
      const char* first = f.data();
      const char* last = f.data() + f.size();
      if (!f.empty() && *first == '+') ++first;
      const auto [ptr, ec] = std::from_chars(first, last, row[c]);
      if (f.empty() || ec != std::errc() || ptr != last || !std::isfinite(row[c])) {
        throw Error(ErrorKind::Parse,
                    location(line_no, c + 1) + ": non-numeric cell '" + std::string(f) + "'");
      }
    }
    body.push_back(std::move(row));
  }
  if (table.header.empty()) throw Error(ErrorKind::Parse, "file has no header row");

  table.rows.resize(static_cast<Index>(body.size()), static_cast<Index>(table.header.size()));
  for (std::size_t r = 0; r < body.size(); ++r) {
    for (std::size_t c = 0; c < body[r].size(); ++c) {
      table.rows(static_cast<Index>(r), static_cast<Index>(c)) = body[r][c];
    }
  }
  return table;
}

TabularFile read_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorKind::Io, "cannot read '" + path.string() + "'");
  std::ostringstream buffer;
  buffer << in.rdbuf();
  return parse_csv(buffer.str());
}

RowRange RowRange::parse(const std::string& text) {
  const auto sep = text.find_first_of("-:");
  const auto first = parse_index(sep == std::string::npos ? text : text.substr(0, sep));
  const auto last = sep == std::string::npos ? first : parse_index(text.substr(sep + 1));
  if (!first || !last || *first < 1 || *last < *first) {
    throw Error(ErrorKind::InvalidInput, "row range '" + text + "' must look like FIRST-LAST with 1 <= FIRST <= LAST");
  }
  return RowRange{*first, *last};
}

Index resolve_column(const TabularFile& table, const std::string& column) {
  const auto it = std::find(table.header.begin(), table.header.end(), column);
  if (it != table.header.end()) return static_cast<Index>(it - table.header.begin());
  if (const auto idx = parse_index(column); idx && *idx < static_cast<Index>(table.header.size())) return *idx;
  throw Error(ErrorKind::MissingColumn, "column '" + column + "' not found");
}

Dataset to_dataset(const TabularFile& table, const std::string& response_column, const std::optional<RowRange>& rows,
                   const std::vector<std::string>& exclude) {
  const Index response = resolve_column(table, response_column);
  std::vector<bool> keep(table.header.size(), true);
  keep[static_cast<std::size_t>(response)] = false;
  for (const auto& name : exclude) keep[static_cast<std::size_t>(resolve_column(table, name))] = false;
  Index first = 0;
  Index count = table.rows.rows();
  if (rows) {
    if (rows->last > table.rows.rows()) {
      std::ostringstream msg;
      msg << "row range " << rows->first << "-" << rows->last << " exceeds the " << table.rows.rows() << " data rows";
      throw Error(ErrorKind::InvalidInput, msg.str());
    }
    first = rows->first - 1;
    count = rows->last - rows->first + 1;
  }

  const Index cols = table.rows.cols();
  Dataset data;
  data.x.resize(count, static_cast<Index>(std::count(keep.begin(), keep.end(), true)));
  data.y = table.rows.block(first, response, count, 1);
  Index out = 0;
  for (Index c = 0; c < cols; ++c) {
    if (!keep[static_cast<std::size_t>(c)]) continue;
    data.x.col(out++) = table.rows.block(first, c, count, 1);
    data.predictor_names.push_back(table.header[static_cast<std::size_t>(c)]);
  }
  return data;
}

Dataset ingest_csv(const std::filesystem::path& path, const std::string& response_column,
                   const std::optional<RowRange>& rows, const std::vector<std::string>& exclude) {
  return to_dataset(read_csv(path), response_column, rows, exclude);
}

std::string to_csv(const Dataset& data, const std::string& response_name) {
  std::ostringstream out;
  out.precision(17);
  for (Index c = 0; c < data.p(); ++c) {
    if (static_cast<std::size_t>(c) < data.predictor_names.size()) {
      out << data.predictor_names[static_cast<std::size_t>(c)];
    } else {
      out << 'x' << c + 1;
    }
    out << ',';
  }
  out << response_name << '\n';
  for (Index i = 0; i < data.n(); ++i) {
    for (Index c = 0; c < data.p(); ++c) out << data.x(i, c) << ',';
    out << data.y(i) << '\n';
  }
  return out.str();
}

void write_csv(const Dataset& data, const std::filesystem::path& path, const std::string& response_name) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + path.string() + "'");
  out << to_csv(data, response_name);
}

double adjusted_r2(double r2, Index n) {
  return 1.0 - (1.0 - r2) * static_cast<double>(n - 1) / static_cast<double>(n - 2);
}

OlsFit ols_fit(const VectorXd& x, const VectorXd& y) {
  const Index n = x.size();
  if (y.size() != n) throw Error(ErrorKind::DimensionMismatch, "ols_fit: x and y lengths differ");
  if (n < 3) throw Error(ErrorKind::InvalidInput, "ols_fit needs at least 3 observations");
  const double mx = x.mean();
  const double my = y.mean();
  const VectorXd dx = x.array() - mx;
  const VectorXd dy = y.array() - my;
  const double sxx = dx.squaredNorm();
  if (!(sxx > 0.0)) throw Error(ErrorKind::DegenerateRegressor, "regressor is constant");

  OlsFit fit;
  fit.slope = dx.dot(dy) / sxx;
  fit.intercept = my - fit.slope * mx;
  const double sst = dy.squaredNorm();
  const double sse = (dy - fit.slope * dx).squaredNorm();
  fit.r2 = sst > 0.0 ? 1.0 - sse / sst : 0.0;
  fit.adj_r2 = sst > 0.0 ? adjusted_r2(fit.r2, n) : 0.0;
  return fit;
}

Index choose_dimension(const VectorXd& proportions, double cum_prop) {
  if (!(cum_prop > 0.0 && cum_prop <= 1.0)) throw Error(ErrorKind::InvalidInput, "cumulative proportion must lie in (0, 1]");
  double total = 0.0;
  for (Index k = 0; k < proportions.size(); ++k) {
    total += proportions(k);
    // Tolerance absorbs round-off in the proportions summing to one.
    if (total >= cum_prop - 1e-12) return k + 1;
  }
  return proportions.size();
}

std::string RegressionReport::to_json() const {
  nlohmann::ordered_json j;
  j["coefficient"] = coefficient;
  j["intercept"] = intercept;
  j["trainAdjR2"] = train_adj_r2;
  j["testAdjR2"] = test_adj_r2;
  j["testMSE"] = test_mse;
  j["testRMSE"] = test_rmse;
  j["chosenD"] = chosen_d;
  j["basis"] = to_json_array(basis);
  j["eigenProportions"] = to_json_array(eigen_proportions);
  if (!predictor_names.empty()) j["predictors"] = predictor_names;
  return j.dump(2);
}

RegressionReport real_data_pipeline(const Dataset& train, const Dataset& test, const LmopgConfig& cfg,
                                    const PipelineOptions& options) {
  train.validate();
  test.validate();
  if (train.p() != test.p()) throw Error(ErrorKind::DimensionMismatch, "train and test predictor counts differ");

  LmopgConfig reduce_cfg = cfg;
  reduce_cfg.d = 1;
  const LmopgResult fit = lmopg(train, reduce_cfg);

  RegressionReport report;
  report.predictor_names = train.predictor_names;
  report.eigen_proportions = eigenvalue_proportions(fit.basis.eigenvalues);
  report.chosen_d = options.d ? *options.d : choose_dimension(report.eigen_proportions, options.cum_prop);
  if (report.chosen_d < 1 || report.chosen_d > train.p()) {
    throw Error(ErrorKind::InvalidInput, "chosen dimension out of range");
  }
  // The leading direction does not depend on how many columns are kept.
  report.basis = fit.basis.columns.col(0);

  const VectorXd train_index = train.x * report.basis;
  const OlsFit ols = ols_fit(train_index, train.y);
  report.coefficient = ols.slope;
  report.intercept = ols.intercept;
  report.train_adj_r2 = ols.adj_r2;

  const VectorXd predicted = (ols.intercept + ols.slope * (test.x * report.basis).array()).matrix();
  const VectorXd residual = test.y - predicted;
  const double sse = residual.squaredNorm();
  const double sst = (test.y.array() - test.y.mean()).square().sum();
  report.test_mse = sse / static_cast<double>(test.n());
  report.test_rmse = std::sqrt(report.test_mse);
  const double r2 = sst > 0.0 ? 1.0 - sse / sst : 0.0;
  report.test_adj_r2 = test.n() > 2 ? adjusted_r2(r2, test.n()) : r2;
  return report;
}

}  // namespace modal_sdr
