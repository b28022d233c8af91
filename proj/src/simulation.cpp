#include "modal_sdr/simulation.hpp"

#include <cmath>
#include <limits>
#include <sstream>

#include "json.hpp"
#include "modal_sdr/error.hpp"
#include "modal_sdr/parallel.hpp"
#include "modal_sdr/subspace_metrics.hpp"

namespace modal_sdr::sim {

namespace {

constexpr std::string_view kModelNames[] = {"A1", "A2", "A3", "A4", "A5", "B1", "B2", "B3"};
constexpr std::string_view kDistNames[] = {"normal", "chisq1", "exp1", "f_5_10", "gamma_3_1_5"};
constexpr std::string_view kMethodNames[] = {"lmopg", "meanopg", "sir"};

template <typename Enum, std::size_t N>
Enum parse_enum(std::string_view name, const std::string_view (&names)[N], const char* what) {
  for (std::size_t i = 0; i < N; ++i) {
    if (names[i] == name) return static_cast<Enum>(i);
  }
  throw Error(ErrorKind::InvalidInput, std::string("unknown ") + what + " '" + std::string(name) + "'");
}

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

double round6(double v) {
  return std::isfinite(v) ? std::round(v * 1e6) / 1e6 : v;
}

std::string fixed6(double v) {
  if (!std::isfinite(v)) return "nan";
  std::ostringstream out;
  out.setf(std::ios::fixed);
  out.precision(6);
  out << round6(v);
  return out.str();
}

Basis estimate(Method method, const Dataset& data, const LmopgConfig& lmopg_cfg, const SirConfig& sir_cfg) {
  switch (method) {
    case Method::Lmopg: return lmopg(data, lmopg_cfg).basis;
    case Method::MeanOpg: return mean_opg(data, lmopg_cfg);
    case Method::Sir: return sir(data, sir_cfg);
  }
  throw Error(ErrorKind::InvalidInput, "unknown method");
}

}  // namespace

std::string_view to_string(Model m) { return kModelNames[static_cast<int>(m)]; }
std::string_view to_string(PredictorDist d) { return kDistNames[static_cast<int>(d)]; }
std::string_view to_string(Method m) { return kMethodNames[static_cast<int>(m)]; }
Model parse_model(std::string_view name) { return parse_enum<Model>(name, kModelNames, "model"); }
PredictorDist parse_dist(std::string_view name) { return parse_enum<PredictorDist>(name, kDistNames, "distribution"); }
Method parse_method(std::string_view name) { return parse_enum<Method>(name, kMethodNames, "method"); }

VectorXd SimSpec::beta1_or_default() const {
  return beta1.size() ? beta1 : VectorXd(VectorXd::Unit(p, 0));
}

VectorXd SimSpec::beta2_or_default() const {
  return beta2.size() ? beta2 : VectorXd(VectorXd::Unit(p, 1));
}

MatrixXd SimSpec::true_basis() const {
  MatrixXd b(p, 2);
  b.col(0) = beta1_or_default();
  b.col(1) = beta2_or_default();
  return b;
}

void SimSpec::validate() const {
  if (p < 2) throw Error(ErrorKind::InvalidInput, "simulation needs p >= 2");
  if (n < p + 2) throw Error(ErrorKind::InvalidInput, "simulation needs n >= p + 2");
  if (!(sigma >= 0.0)) throw Error(ErrorKind::InvalidInput, "sigma must be non-negative");
  if (beta1_or_default().size() != p || beta2_or_default().size() != p) {
    throw Error(ErrorKind::DimensionMismatch, "beta vectors must have length p");
  }
  const MatrixXd b = true_basis();
  Eigen::FullPivLU<MatrixXd> lu(b);
  lu.setThreshold(1e-10);
  if (lu.rank() < 2) throw Error(ErrorKind::InvalidInput, "beta1 and beta2 must be linearly independent");
}

double model_response(Model model, double u1, double u2, double eps, double sigma) {
  switch (model) {
    case Model::A1: return u1 + u2 * eps;
    case Model::A2: return 2.0 * std::sin(1.4 * u1) + (u2 + 1.0) * (u2 + 1.0) * eps;
    case Model::A3: return u1 / (0.5 + (u2 + 1.5) * (u2 + 1.5)) + sigma * eps;
    case Model::A4: return u1 * (u2 + 1.0) + sigma * eps;
    case Model::A5: return 0.4 * u1 + 3.0 * std::sin(u1 * u2 / 4.0) + sigma * eps;
    case Model::B1: return std::sqrt(std::abs(4.0 + u1)) * std::sqrt(std::abs(2.0 + u2)) + sigma * eps;
    case Model::B2: return std::sqrt(std::abs(u1)) + std::sqrt(std::abs(u2 * eps)) + sigma * eps;
    case Model::B3: return 0.4 * u1 + 3.0 * std::sin(u2 / 4.0) + sigma * eps;
  }
  throw Error(ErrorKind::InvalidInput, "unknown model");
}

VectorXd sample_mixture_error(Rng& rng, Index count) {
  std::bernoulli_distribution pick_left(0.5);
  std::normal_distribution<double> left(-1.0, 1.0);
  std::normal_distribution<double> right(1.0, 0.5);
  VectorXd out(count);
  for (Index i = 0; i < count; ++i) out(i) = pick_left(rng) ? left(rng) : right(rng);
  return out;
}

VectorXd sample_errors(Rng& rng, ErrorLaw law, Index count) {
  if (law == ErrorLaw::Mixture) return sample_mixture_error(rng, count);
  std::normal_distribution<double> normal(0.0, 1.0);
  VectorXd out(count);
  for (Index i = 0; i < count; ++i) out(i) = normal(rng);
  return out;
}

MatrixXd sample_predictors(Rng& rng, const SimSpec& spec) {
  MatrixXd x(spec.n, spec.p);
  auto fill = [&](auto&& dist) {
    for (Index i = 0; i < spec.n; ++i)
      for (Index k = 0; k < spec.p; ++k) x(i, k) = dist(rng);
  };
  switch (spec.dist) {
    case PredictorDist::Normal: fill(std::normal_distribution<double>(0.0, 1.0)); break;
    case PredictorDist::ChiSq1: fill(std::chi_squared_distribution<double>(1.0)); break;
    case PredictorDist::Exp1: fill(std::exponential_distribution<double>(1.0)); break;
    case PredictorDist::F_5_10: fill(std::fisher_f_distribution<double>(5.0, 10.0)); break;
    case PredictorDist::Gamma_3_1_5: fill(std::gamma_distribution<double>(3.0, 1.5)); break;
  }
  return x;
}

Dataset generate(Rng& rng, const SimSpec& spec) {
  spec.validate();
  Dataset data;
  data.x = sample_predictors(rng, spec);
  const VectorXd eps = sample_errors(rng, spec.error, spec.n);
  const VectorXd u1 = data.x * spec.beta1_or_default();
  const VectorXd u2 = data.x * spec.beta2_or_default();
  data.y.resize(spec.n);
  for (Index i = 0; i < spec.n; ++i) data.y(i) = model_response(spec.model, u1(i), u2(i), eps(i), spec.sigma);
  return data;
}

std::uint64_t derive_seed(std::uint64_t base, std::initializer_list<std::uint64_t> keys) {
  std::uint64_t h = splitmix64(base);
  for (const auto k : keys) h = splitmix64(h ^ splitmix64(k + 0x632be59bd9b4e019ULL));
  return h;
}

double preset_bandwidth(PredictorDist dist) {
  switch (dist) {
    case PredictorDist::Normal: return 1.0;
    case PredictorDist::ChiSq1: return 7.0;
    default: return 8.0;
  }
}

Bandwidths BandwidthPolicy::resolve(PredictorDist dist) const {
  const double preset = preset_bandwidth(dist);
  return Bandwidths{h1.value_or(preset), h2.value_or(preset)};
}

std::string McReport::to_csv() const {
  std::ostringstream out;
  out << "model,dist,n,method,avg_R,sd_R,reps,failures\n";
  for (const auto& row : rows) {
    out << to_string(row.model) << ',' << to_string(row.dist) << ',' << row.n << ',' << to_string(row.method) << ','
        << fixed6(row.avg_r) << ',' << fixed6(row.sd_r) << ',' << row.reps << ',' << row.failures << '\n';
  }
  return out.str();
}

std::string McReport::to_structured() const {
  std::ostringstream out;
  for (const auto& row : rows) {
    nlohmann::ordered_json record;
    record["model"] = to_string(row.model);
    record["dist"] = to_string(row.dist);
    record["n"] = row.n;
    record["method"] = to_string(row.method);
    record["avg_R"] = std::isfinite(row.avg_r) ? nlohmann::ordered_json(round6(row.avg_r)) : nullptr;
    record["sd_R"] = std::isfinite(row.sd_r) ? nlohmann::ordered_json(round6(row.sd_r)) : nullptr;
    record["reps"] = row.reps;
    record["failures"] = row.failures;
    out << record.dump() << '\n';
  }
  return out.str();
}

McReport run_monte_carlo(const std::vector<SimSpec>& grid, const McOptions& options) {
  if (options.replicates < 1) throw Error(ErrorKind::InvalidInput, "replicates must be at least 1");
  if (options.methods.empty()) throw Error(ErrorKind::InvalidInput, "no methods requested");
  for (const auto& spec : grid) spec.validate();

  const std::size_t reps = static_cast<std::size_t>(options.replicates);
  const std::size_t methods = options.methods.size();
  // r_values[(cell * methods + m) * reps + rep]
  std::vector<double> r_values(grid.size() * methods * reps, std::numeric_limits<double>::quiet_NaN());

  parallel_for(grid.size() * reps, options.threads, [&](std::size_t job) {
    const std::size_t cell = job / reps;
    const std::size_t rep = job % reps;
    const SimSpec& spec = grid[cell];
    Rng rng(derive_seed(spec.seed, {static_cast<std::uint64_t>(spec.model), static_cast<std::uint64_t>(spec.dist),
                                    static_cast<std::uint64_t>(spec.n), rep}));
    const Dataset data = generate(rng, spec);
    const MatrixXd truth = spec.true_basis();

    LmopgConfig lmopg_cfg = options.lmopg;
    lmopg_cfg.bandwidths = options.bandwidths.resolve(spec.dist);
    lmopg_cfg.d = truth.cols();
    lmopg_cfg.threads = 1;
    SirConfig sir_cfg = options.sir;
    sir_cfg.d = truth.cols();

    for (std::size_t m = 0; m < methods; ++m) {
      double r = std::numeric_limits<double>::quiet_NaN();
      try {
        r = trace_correlation(estimate(options.methods[m], data, lmopg_cfg, sir_cfg).columns, truth);
      } catch (const Error& e) {
        if (e.kind() == ErrorKind::InternalInvariant) throw;
      }
      r_values[(cell * methods + m) * reps + rep] = r;
    }
  });

  McReport report;
  for (std::size_t cell = 0; cell < grid.size(); ++cell) {
    for (std::size_t m = 0; m < methods; ++m) {
      const auto begin = r_values.begin() + static_cast<std::ptrdiff_t>((cell * methods + m) * reps);
      std::vector<double> values(begin, begin + static_cast<std::ptrdiff_t>(reps));
      McRow row;
      row.model = grid[cell].model;
      row.dist = grid[cell].dist;
      row.n = grid[cell].n;
      row.method = options.methods[m];
      row.reps = options.replicates;
      double sum = 0.0;
      int ok = 0;
      for (const double v : values) {
        if (std::isfinite(v)) {
          sum += v;
          ++ok;
        }
      }
      row.failures = options.replicates - ok;
      if (ok == 0) {
        row.avg_r = row.sd_r = std::numeric_limits<double>::quiet_NaN();
      } else {
        row.avg_r = sum / ok;
        double ss = 0.0;
        for (const double v : values) {
          if (std::isfinite(v)) ss += (v - row.avg_r) * (v - row.avg_r);
        }
        row.sd_r = ok > 1 ? std::sqrt(ss / (ok - 1)) : 0.0;
      }
      report.rows.push_back(row);
      report.replicate_r.push_back(std::move(values));
    }
  }
  return report;
}

}  // namespace modal_sdr::sim
