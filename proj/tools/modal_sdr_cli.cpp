// Command-line front end: Monte Carlo campaigns, single-dataset estimation
// and the train/test regression pipeline.

#include <CLI11.hpp>

#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "modal_sdr/baselines.hpp"
#include "modal_sdr/error.hpp"
#include "modal_sdr/modal_opg.hpp"
#include "modal_sdr/pipeline.hpp"
#include "modal_sdr/simulation.hpp"

namespace {

using namespace modal_sdr;

// Failure inside a named stage of a subcommand.
struct StageError : std::runtime_error {
  StageError(std::string stage, const std::string& what) : std::runtime_error(what), stage(std::move(stage)) {}
  std::string stage;
};

template <typename F>
auto stage(const std::string& name, F&& body) {
  try {
    return body();
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

std::vector<std::string> split_list(const std::vector<std::string>& items) {
  std::vector<std::string> out;
  for (const auto& item : items) {
    std::stringstream ss(item);
    std::string tok;
    while (std::getline(ss, tok, ',')) {
      if (!tok.empty()) out.push_back(tok);
    }
  }
  return out;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty() || out_path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path, std::ios::binary);
  if (!out) throw Error(ErrorKind::Io, "cannot write '" + out_path + "'");
  out << text;
}

struct EstimatorFlags {
  double h1 = 1.0;
  double h2 = 1.0;
  int max_iter = 100;
  double tol = 1e-6;
  std::optional<Index> anchors;

  void add(CLI::App* app) {
    app->add_option("--h1", h1, "Predictor kernel bandwidth")->check(CLI::PositiveNumber);
    app->add_option("--h2", h2, "Residual kernel bandwidth")->check(CLI::PositiveNumber);
    app->add_option("--max-iter", max_iter, "Modal EM iteration cap")->check(CLI::NonNegativeNumber);
    app->add_option("--tol", tol, "Relative parameter-change tolerance")->check(CLI::PositiveNumber);
    app->add_option("--anchors", anchors, "Fit only this many evenly spaced anchors")->check(CLI::PositiveNumber);
  }

  LmopgConfig config(Index d) const {
    LmopgConfig cfg;
    cfg.bandwidths = {h1, h2};
    cfg.max_iter = max_iter;
    cfg.tol = tol;
    cfg.d = d;
    cfg.anchor_subsample = anchors;
    return cfg;
  }
};

nlohmann::ordered_json vector_json(const VectorXd& v) {
  auto out = nlohmann::ordered_json::array();
  for (Index i = 0; i < v.size(); ++i) out.push_back(v(i));
  return out;
}

int run_simulate(const std::vector<std::string>& models, const std::vector<std::string>& dists,
                 const std::vector<Index>& n_list, const std::vector<std::string>& methods, int reps,
                 std::uint64_t seed, const std::optional<double>& h1, const std::optional<double>& h2, Index p,
                 double sigma, const std::string& error_law, const std::string& format, const std::string& out) {
  auto [grid, options] = stage("configure", [&] {
    std::vector<sim::SimSpec> grid;
    for (const auto& m : split_list(models)) {
      for (const auto& d : split_list(dists)) {
        for (const Index n : n_list) {
          sim::SimSpec spec;
          spec.model = sim::parse_model(m);
          spec.dist = sim::parse_dist(d);
          spec.n = n;
          spec.p = p;
          spec.sigma = sigma;
          spec.seed = seed;
          spec.error = error_law == "normal" ? sim::ErrorLaw::StandardNormal : sim::ErrorLaw::Mixture;
          spec.validate();
          grid.push_back(spec);
        }
      }
    }
    sim::McOptions options;
    options.replicates = reps;
    options.methods.clear();
    for (const auto& m : split_list(methods)) options.methods.push_back(sim::parse_method(m));
    options.bandwidths = {h1, h2};
    return std::make_pair(grid, options);
  });
  const auto report = stage("simulate", [&] { return sim::run_monte_carlo(grid, options); });
  stage("write", [&] {
    emit(format == "structured" ? report.to_structured() : report.to_csv(), out);
    return 0;
  });
  return 0;
}

int run_estimate(const std::string& input, const std::string& response, const std::vector<std::string>& drop, Index d,
                 const std::string& method, int slices, const EstimatorFlags& flags, const std::string& out) {
  const Dataset data = stage("ingest", [&] { return ingest_csv(input, response, std::nullopt, drop); });
  nlohmann::ordered_json j;
  stage("estimate", [&] {
    j["method"] = method;
    j["n"] = data.n();
    j["p"] = data.p();
    j["d"] = d;
    Basis basis;
    nlohmann::ordered_json diag;
    const auto m = sim::parse_method(method);
    if (m == sim::Method::Sir) {
      basis = sir(data, SirConfig{slices, d});
    } else {
      LmopgConfig cfg = flags.config(d);
      if (m == sim::Method::MeanOpg) cfg.max_iter = 0;
      const auto result = lmopg(data, cfg);
      basis = result.basis;
      Index converged = 0, regularized = 0, failed = 0;
      double iterations = 0.0;
      for (const auto& fit : result.field.fits) {
        converged += fit.converged ? 1 : 0;
        regularized += fit.regularized ? 1 : 0;
        failed += fit.failed ? 1 : 0;
        iterations += fit.iterations;
      }
      diag["anchors"] = result.field.fits.size();
      diag["failedAnchors"] = failed;
      diag["convergedAnchors"] = converged;
      diag["regularizedAnchors"] = regularized;
      diag["meanIterations"] = iterations / static_cast<double>(result.field.fits.size());
    }
    if (basis.warning) diag["warning"] = *basis.warning;
    if (!data.predictor_names.empty()) j["predictors"] = data.predictor_names;
    auto cols = nlohmann::ordered_json::array();
    for (Index c = 0; c < basis.columns.cols(); ++c) cols.push_back(vector_json(basis.columns.col(c)));
    j["basis"] = cols;
    j["eigenvalues"] = vector_json(basis.eigenvalues);
    j["eigenProportions"] = vector_json(eigenvalue_proportions(basis.eigenvalues));
    j["diagnostics"] = diag;
    return 0;
  });
  stage("write", [&] {
    emit(j.dump(2) + "\n", out);
    return 0;
  });
  return 0;
}

int run_pipeline(const std::string& input, const std::string& response, const std::vector<std::string>& drop,
                 const std::string& train_rows, const std::string& test_rows, const std::optional<double>& cum_prop, const std::optional<Index>& d,
                 const EstimatorFlags& flags, const std::string& out) {
  auto [train, test] = stage("ingest", [&] {
    const auto table = read_csv(input);
    return std::make_pair(to_dataset(table, response, RowRange::parse(train_rows), drop),
                          to_dataset(table, response, RowRange::parse(test_rows), drop));
  });
  const auto report = stage("pipeline", [&] {
    PipelineOptions options;
    if (cum_prop) options.cum_prop = *cum_prop;
    options.d = d;
    return real_data_pipeline(train, test, flags.config(1), options);
  });
  stage("write", [&] {
    emit(report.to_json() + "\n", out);
    return 0;
  });
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sufficient dimension reduction by local modal outer products of gradients"};
  app.require_subcommand(1);

  auto* simulate = app.add_subcommand("simulate", "Monte Carlo trace-correlation study");
  std::vector<std::string> models{"A1"}, dists{"normal"}, methods{"lmopg"};
  std::vector<Index> n_list{200, 300, 500};
  int reps = 100;
  std::uint64_t seed = 0;
  std::optional<double> sim_h1, sim_h2;
  Index sim_p = 10;
  double sigma = 0.5;
  std::string error_law = "mixture";
  std::string format = "csv";
  std::string sim_out;
  simulate->add_option("--models", models, "Models, e.g. A1,A2 or B1")->delimiter(',');
  simulate->add_option("--dists", dists, "normal, chisq1, exp1, f_5_10, gamma_3_1_5")->delimiter(',');
  simulate->add_option("--n-list", n_list, "Sample sizes")->delimiter(',');
  simulate->add_option("--methods", methods, "lmopg, meanopg, sir")->delimiter(',');
  simulate->add_option("--reps", reps, "Replicates per cell")->check(CLI::PositiveNumber);
  simulate->add_option("--seed", seed, "Base seed");
  simulate->add_option("--h1", sim_h1, "Override the per-distribution h1 preset")->check(CLI::PositiveNumber);
  simulate->add_option("--h2", sim_h2, "Override the per-distribution h2 preset")->check(CLI::PositiveNumber);
  simulate->add_option("--p", sim_p, "Predictor dimension")->check(CLI::Range(2, 1000));
  simulate->add_option("--sigma", sigma, "Noise scale for additive-error models")->check(CLI::NonNegativeNumber);
  simulate->add_option("--error", error_law, "Error law")->check(CLI::IsMember({"mixture", "normal"}));
  simulate->add_option("--format", format, "Output format")->check(CLI::IsMember({"csv", "structured"}));
  simulate->add_option("--out", sim_out, "Output file (default stdout)");

  auto* estimate = app.add_subcommand("estimate", "Estimate a reduction basis for a CSV dataset");
  std::string est_input, est_response, est_method = "lmopg", est_out;
  std::vector<std::string> est_drop;
  Index est_d = 1;
  int slices = 10;
  EstimatorFlags est_flags;
  estimate->add_option("--input", est_input, "CSV file")->required();
  estimate->add_option("--response", est_response, "Response column name or zero-based index")->required();
  estimate->add_option("--drop", est_drop, "Columns to leave out of the predictors")->delimiter(',');
  estimate->add_option("--d", est_d, "Target dimension")->check(CLI::PositiveNumber);
  estimate->add_option("--method", est_method, "Estimator")->check(CLI::IsMember({"lmopg", "meanopg", "sir"}));
  estimate->add_option("--slices", slices, "SIR slice count")->check(CLI::Range(2, 100000));
  est_flags.add(estimate);
  estimate->add_option("--out", est_out, "Output file (default stdout)");

  auto* pipeline = app.add_subcommand("pipeline", "Reduce, regress on the leading direction, score on a test split");
  std::string pipe_input, pipe_response, train_rows, test_rows, pipe_out;
  std::vector<std::string> pipe_drop;
  std::optional<double> cum_prop;
  std::optional<Index> pipe_d;
  EstimatorFlags pipe_flags;
  pipeline->add_option("--input", pipe_input, "CSV file")->required();
  pipeline->add_option("--response", pipe_response, "Response column name or zero-based index")->required();
  pipeline->add_option("--drop", pipe_drop, "Columns to leave out of the predictors")->delimiter(',');
  pipeline->add_option("--train-rows", train_rows, "Training rows, 1-based inclusive, e.g. 1-1000")->required();
  pipeline->add_option("--test-rows", test_rows, "Test rows, e.g. 1001-1500")->required();
  auto* cum_opt = pipeline->add_option("--cum-prop", cum_prop, "Cumulative eigenvalue proportion for choosing d")
                      ->check(CLI::Range(0.0, 1.0));
  pipeline->add_option("--d", pipe_d, "Fix the dimension instead of choosing it")
      ->check(CLI::PositiveNumber)
      ->excludes(cum_opt);
  pipe_flags.add(pipeline);
  pipeline->add_option("--out", pipe_out, "Output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (simulate->parsed()) {
      return run_simulate(models, dists, n_list, methods, reps, seed, sim_h1, sim_h2, sim_p, sigma, error_law,
                          format, sim_out);
    }
    if (estimate->parsed()) {
      return run_estimate(est_input, est_response, est_drop, est_d, est_method, slices, est_flags, est_out);
    }
    if (pipeline->parsed()) {
      return run_pipeline(pipe_input, pipe_response, pipe_drop, train_rows, test_rows, cum_prop, pipe_d, pipe_flags, pipe_out);
    }
  } catch (const StageError& e) {
    std::cerr << "error [" << e.stage << "]: " << e.what() << '\n';
    return 1;
  }
  return 2;
}
