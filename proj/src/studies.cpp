#include "splinegp/studies.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <numeric>
#include <random>
#include <sstream>

#include "splinegp/errors.hpp"
#include "splinegp/kernels.hpp"
#include "splinegp/likelihoods.hpp"
#include "splinegp/splines.hpp"

namespace splinegp::studies {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;
constexpr double kLogTwoOverPi = -0.45158270528945486473;
// Study truths are smooth enough that 1e-9 jitter fails on long lengthscales.
constexpr double kTruthJitter = 1e-6;

std::int64_t draw_negbin(double mean, double overdispersion, std::mt19937_64& rng) {
  if (mean <= 0.0) return 0;
  std::gamma_distribution<double> gamma(mean / overdispersion, overdispersion);
  std::poisson_distribution<std::int64_t> poisson(gamma(rng));
  return poisson(rng);
}

double seconds_since(std::chrono::steady_clock::time_point start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

double max_rhat(const hmc::PosteriorDraws& draws) {
  double worst = 0.0;
  if (draws.chains.size() < 2) return worst;
  for (std::size_t c = 0; c < draws.names.size(); ++c) {
    const double r = hmc::split_rhat(draws.by_chain(c));
    if (std::isfinite(r)) worst = std::max(worst, r);
  }
  return worst;
}

hmc::SamplerConfig with_raw(hmc::SamplerConfig cfg) {
  cfg.store_raw = true;
  return cfg;
}

}  // namespace

CountSurfaceModel::CountSurfaceModel(priors::SurfacePrior prior,
                                     std::vector<GridObservation> observations)
    : prior_(std::move(prior)), observations_(std::move(observations)) {
  if (prior_.on_points()) throw ValidationError("count surface model needs a grid prior");
  if (observations_.empty()) throw ValidationError("count surface model has no observations");
  for (const auto& o : observations_) {
    if (o.row < 0 || o.row >= prior_.surface_rows() || o.col < 0 || o.col >= prior_.surface_cols()) {
      throw ValidationError("observation outside the surface grid");
    }
    if (o.count < 0) throw ValidationError("negative count");
  }
}

std::size_t CountSurfaceModel::dimension() const { return 1 + prior_.raw_dimension(); }

double CountSurfaceModel::log_density_gradient(std::span<const double> x,
                                               std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double v = x[0];
  const double nu = std::exp(-2.0 * v);
  const double theta = nu / (1.0 + nu);
  if (!(nu > 0.0) || !(theta < 1.0)) throw NumericalError("overdispersion left (0, inf)");
  const double dtheta_dnu = 1.0 / ((1.0 + nu) * (1.0 + nu));

  const auto eval = prior_.evaluate(x.subspan(1));
  Eigen::MatrixXd g_f = Eigen::MatrixXd::Zero(eval.surface.rows(), eval.surface.cols());
  double lp = eval.log_prior;
  double g_nu = 0.0;
  for (const auto& o : observations_) {
    const double alpha = std::exp(eval.surface(o.row, o.col)) / nu;
    if (!(alpha > 0.0) || !std::isfinite(alpha)) throw NumericalError("count mean left (0, inf)");
    const auto t = likelihoods::negbin_logpmf_grad(o.count, alpha, theta);
    lp += t.value;
    g_f(o.row, o.col) += t.d_first * alpha;
    g_nu += -t.d_first * alpha / nu + t.d_second * dtheta_dnu;
  }
  // Half-normal on nu^{-1/2} = exp(v), with the log Jacobian.
  const double s = std::exp(v);
  lp += std::log(2.0) - kHalfLogTwoPi - 0.5 * s * s + v;
  grad[0] = g_nu * (-2.0 * nu) + 1.0 - s * s;
  prior_.backprop(eval, g_f, grad.subspan(1));
  return lp;
}

std::vector<std::string> CountSurfaceModel::output_names() const {
  std::vector<std::string> names{"nu"};
  for (const auto& h : prior_.hyper_spec()) names.push_back(h.name);
  return names;
}

void CountSurfaceModel::outputs(std::span<const double> x, std::span<double> out) const {
  out[0] = overdispersion(x);
  const auto e = prior_.evaluate(x.subspan(1));
  for (std::size_t h = 0; h < e.hypers.size(); ++h) out[1 + h] = e.hypers[h];
}

Eigen::MatrixXd CountSurfaceModel::mean_surface(std::span<const double> raw) const {
  return prior_.evaluate(raw.subspan(1)).surface.array().exp().matrix();
}

double CountSurfaceModel::overdispersion(std::span<const double> raw) const {
  return std::exp(-2.0 * raw[0]);
}

GaussianSurfaceModel::GaussianSurfaceModel(priors::SurfacePrior prior, std::vector<double> values)
    : prior_(std::move(prior)), values_(std::move(values)) {
  if (!prior_.on_points()) throw ValidationError("Gaussian surface model needs a point prior");
  if (static_cast<Eigen::Index>(values_.size()) != prior_.surface_rows()) {
    throw ValidationError("value count does not match the prior's points");
  }
}

std::size_t GaussianSurfaceModel::dimension() const { return 1 + prior_.raw_dimension(); }

double GaussianSurfaceModel::log_density_gradient(std::span<const double> x,
                                                  std::span<double> grad) const {
  std::fill(grad.begin(), grad.end(), 0.0);
  const double sigma = std::exp(x[0]);
  if (!(sigma > 0.0) || !std::isfinite(sigma)) throw NumericalError("noise scale left (0, inf)");
  const auto eval = prior_.evaluate(x.subspan(1));
  Eigen::MatrixXd g_f = Eigen::MatrixXd::Zero(eval.surface.rows(), 1);
  double lp = eval.log_prior;
  double g_sigma = 0.0;
  for (std::size_t k = 0; k < values_.size(); ++k) {
    const auto t = likelihoods::gaussian_loglik_grad(values_[k], eval.surface(static_cast<Eigen::Index>(k), 0), sigma);
    lp += t.value;
    g_f(static_cast<Eigen::Index>(k), 0) = t.d_first;
    g_sigma += t.d_second;
  }
  // Half-Cauchy(0, 1) on sigma, sampled on the log scale.
  lp += kLogTwoOverPi - std::log1p(sigma * sigma) + x[0];
  grad[0] = g_sigma * sigma - 2.0 * sigma * sigma / (1.0 + sigma * sigma) + 1.0;
  prior_.backprop(eval, g_f, grad.subspan(1));
  return lp;
}

std::vector<std::string> GaussianSurfaceModel::output_names() const {
  std::vector<std::string> names{"sigma"};
  for (const auto& h : prior_.hyper_spec()) names.push_back(h.name);
  return names;
}

void GaussianSurfaceModel::outputs(std::span<const double> x, std::span<double> out) const {
  out[0] = std::exp(x[0]);
  const auto e = prior_.evaluate(x.subspan(1));
  for (std::size_t h = 0; h < e.hypers.size(); ++h) out[1 + h] = e.hypers[h];
}

std::string MethodSpec::label() const {
  std::string name(priors::prior_kind_name(kind));
  if (kind == priors::PriorKind::Standard2DGP) return name;
  return name + ":" + std::to_string(knots);
}

MethodSpec parse_method(const std::string& text) {
  const auto colon = text.find(':');
  MethodSpec m;
  m.kind = priors::parse_prior_kind(text.substr(0, colon));
  if (m.kind == priors::PriorKind::Standard2DGP) {
    if (colon != std::string::npos) throw ValidationError("gp2d takes no knot count: " + text);
    m.knots = 0;
    return m;
  }
  if (colon == std::string::npos) throw ValidationError("method needs a knot count: " + text);
  const std::string count = text.substr(colon + 1);
  std::size_t used = 0;
  long knots = 0;
  try {
    knots = std::stol(count, &used);
  } catch (const std::exception&) {
    used = 0;
  }
  if (used != count.size() || count.empty() || knots < 2) {
    throw ValidationError("knot count must be an integer >= 2: " + text);
  }
  m.knots = static_cast<std::size_t>(knots);
  return m;
}

std::string correlation_label(double lengthscale) {
  if (lengthscale == 0.05) return "weakly";
  if (lengthscale == 0.25) return "mildly";
  if (lengthscale == 1.0) return "strongly";
  return "custom";
}

void SimulationConfig::validate() const {
  if (grid_size < 3) throw ValidationError("simulation grid needs at least 3 points per axis");
  if (!(lengthscale > 0.0)) throw ValidationError("simulation lengthscale must be positive");
  if (!(overdispersion > 0.0)) throw ValidationError("simulation overdispersion must be positive");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train fraction must lie in (0, 1)");
  }
  if (methods.empty()) throw ValidationError("simulation needs at least one method");
  for (const auto& m : methods) {
    if (m.kind != priors::PriorKind::Standard2DGP && m.knots < 2) {
      throw ValidationError("knots must be >= 2 per axis");
    }
  }
  mcmc.validate();
}

SimulatedStudy simulate_count_study(const SimulationConfig& config) {
  config.validate();
  const std::size_t n = config.grid_size;
  SimulatedStudy s;
  s.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i) s.coords[i] = static_cast<double>(i) / static_cast<double>(n - 1);

  std::seed_seq seq{config.seed, std::uint64_t{0x51u}};
  std::mt19937_64 rng(seq);
  std::normal_distribution<double> normal;
  const kernels::SqExpKernel k(1.0, config.lengthscale);
  const auto cov = kernels::kronecker_cov(s.coords, s.coords, k, k, kTruthJitter);
  Eigen::MatrixXd z(static_cast<Eigen::Index>(n), static_cast<Eigen::Index>(n));
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = normal(rng);
  }
  s.log_mean = kernels::sample_grid_gp(cov.rows_chol, cov.cols_chol, z);
  s.mean = s.log_mean.array().exp().matrix();
  s.counts.resize(z.rows(), z.cols());
  for (Eigen::Index j = 0; j < z.cols(); ++j) {
    for (Eigen::Index i = 0; i < z.rows(); ++i) {
      s.counts(i, j) = static_cast<int>(draw_negbin(s.mean(i, j), config.overdispersion, rng));
    }
  }

  std::vector<std::size_t> cells(n * n);
  std::iota(cells.begin(), cells.end(), 0);
  std::shuffle(cells.begin(), cells.end(), rng);
  const auto n_train = std::max<std::size_t>(
      1, static_cast<std::size_t>(std::llround(config.train_fraction * static_cast<double>(n * n))));
  std::sort(cells.begin(), cells.begin() + static_cast<std::ptrdiff_t>(n_train));
  std::sort(cells.begin() + static_cast<std::ptrdiff_t>(n_train), cells.end());
  for (std::size_t k2 = 0; k2 < cells.size(); ++k2) {
    const int i = static_cast<int>(cells[k2] % n);
    const int j = static_cast<int>(cells[k2] / n);
    GridObservation o{i, j, s.counts(i, j)};
    (k2 < n_train ? s.train : s.test).push_back(o);
  }
  return s;
}

MethodResult fit_count_method(const SimulatedStudy& study, const MethodSpec& method,
                              const SimulationConfig& config) {
  MethodResult result;
  result.method = method;
  const auto start = std::chrono::steady_clock::now();
  auto prior = priors::SurfacePrior::make(method.kind, study.coords, study.coords, method.knots,
                                          method.knots, config.hyper);
  const CountSurfaceModel model(std::move(prior), study.train);
  const auto draws = hmc::sample(model, with_raw(config.mcmc));
  result.runtime_seconds = seconds_since(start);
  result.divergences = draws.total_divergences();
  result.max_rhat = max_rhat(draws);

  const Eigen::MatrixXd raw = draws.stacked_raw();
  const Eigen::Index cells = study.mean.size();
  Eigen::MatrixXd means(raw.rows(), cells);
  std::vector<double> nus(static_cast<std::size_t>(raw.rows()));
  std::vector<double> row(static_cast<std::size_t>(raw.cols()));
  for (Eigen::Index d = 0; d < raw.rows(); ++d) {
    for (Eigen::Index p = 0; p < raw.cols(); ++p) row[static_cast<std::size_t>(p)] = raw(d, p);
    const Eigen::MatrixXd m = model.mean_surface(row);
    means.row(d) = Eigen::Map<const Eigen::RowVectorXd>(m.data(), cells);
    nus[static_cast<std::size_t>(d)] = model.overdispersion(row);
  }

  const auto n = study.mean.rows();
  result.median_surface.resize(n, study.mean.cols());
  std::vector<double> column(static_cast<std::size_t>(raw.rows()));
  for (Eigen::Index c = 0; c < cells; ++c) {
    for (Eigen::Index d = 0; d < raw.rows(); ++d) column[static_cast<std::size_t>(d)] = means(d, c);
    result.median_surface(c % n, c / n) = hmc::quantile(column, 0.5);
  }

  std::seed_seq seq{config.seed, std::uint64_t{0x9e}};
  std::mt19937_64 rng(seq);
  std::vector<double> errors;
  std::size_t covered = 0;
  for (const auto& o : study.test) {
    const double e = result.median_surface(o.row, o.col) - study.mean(o.row, o.col);
    errors.push_back(e * e);
    const Eigen::Index c = o.row + n * o.col;
    for (Eigen::Index d = 0; d < raw.rows(); ++d) {
      column[static_cast<std::size_t>(d)] =
          static_cast<double>(draw_negbin(means(d, c), nus[static_cast<std::size_t>(d)], rng));
    }
    const double lo = hmc::quantile(column, 0.025);
    const double hi = hmc::quantile(column, 0.975);
    const auto y = static_cast<double>(o.count);
    if (y >= lo && y <= hi) ++covered;
  }
  const double count = static_cast<double>(errors.size());
  result.mse_mean = std::accumulate(errors.begin(), errors.end(), 0.0) / count;
  double ss = 0.0;
  for (double e : errors) ss += (e - result.mse_mean) * (e - result.mse_mean);
  result.mse_sd = errors.size() > 1 ? std::sqrt(ss / (count - 1.0)) : 0.0;
  result.coverage95 = static_cast<double>(covered) / count;
  return result;
}

SimulationReport run_simulation(const SimulationConfig& config) {
  SimulationReport report;
  report.config = config;
  report.study = simulate_count_study(config);
  for (const auto& m : config.methods) {
    report.results.push_back(fit_count_method(report.study, m, config));
  }
  return report;
}

PointData load_point_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw DataError("point data: empty file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  const auto header = data::split_csv_line(line);
  auto column = [&](const std::string& name) {
    const auto it = std::find(header.begin(), header.end(), name);
    if (it == header.end()) throw DataError("point data: missing column '" + name + "'");
    return static_cast<std::size_t>(it - header.begin());
  };
  const std::size_t cx = column("x"), cy = column("y"), cv = column("value");
  PointData out;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto f = data::split_csv_line(line);
    if (f.size() != header.size()) {
      throw DataError("point data line " + std::to_string(lineno) + ": expected " +
                      std::to_string(header.size()) + " fields");
    }
    auto number = [&](std::size_t c) {
      std::size_t used = 0;
      double v = 0.0;
      try {
        v = std::stod(f[c], &used);
      } catch (const std::exception&) {
        used = 0;
      }
      if (used == 0 || used != f[c].size() || !std::isfinite(v)) {
        throw DataError("point data line " + std::to_string(lineno) + ": '" + f[c] +
                        "' is not a finite number");
      }
      return v;
    };
    out.x.push_back(number(cx));
    out.y.push_back(number(cy));
    out.value.push_back(number(cv));
  }
  if (out.size() == 0) throw DataError("point data: no rows");
  return out;
}

PointData load_point_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path);
  return load_point_csv(in);
}

PointData synthetic_point_data(std::size_t count, double noise_sd, std::uint64_t seed) {
  std::seed_seq seq{seed, std::uint64_t{0xb3}};
  std::mt19937_64 rng(seq);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::normal_distribution<double> noise(0.0, noise_sd);
  PointData out;
  for (std::size_t k = 0; k < count; ++k) {
    const double x = unit(rng), y = unit(rng);
    const double bump = std::exp(-((x - 0.6) * (x - 0.6) + (y - 0.3) * (y - 0.3)) / 0.05);
    out.x.push_back(x);
    out.y.push_back(y);
    out.value.push_back(std::sin(3.0 * x) * std::cos(2.0 * y) + 1.5 * bump + noise(rng));
  }
  return out;
}

void BenchmarkConfig::validate() const {
  if (train_size < 2) throw ValidationError("benchmark needs at least 2 training points");
  if (methods.empty()) throw ValidationError("benchmark needs at least one method");
  for (const auto& m : methods) {
    if (m.kind == priors::PriorKind::Standard2DGP) {
      throw ValidationError("benchmark compares spline priors only; gp2d is not supported");
    }
    if (m.knots < 2) throw ValidationError("knots must be >= 2 per axis");
  }
  mcmc.validate();
}

BenchmarkReport run_benchmark(const PointData& data, const BenchmarkConfig& config) {
  config.validate();
  if (data.size() <= config.train_size) {
    throw ValidationError("benchmark data has " + std::to_string(data.size()) +
                          " points; need more than train_size");
  }
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  std::seed_seq seq{config.seed, std::uint64_t{0xbe}};
  std::mt19937_64 rng(seq);
  std::shuffle(order.begin(), order.end(), rng);
  const std::size_t available = data.size() - config.train_size;
  const std::size_t n_test = config.test_size == 0 ? available : std::min(config.test_size, available);

  auto pick = [&](std::size_t from, std::size_t count, std::vector<double>& xs,
                  std::vector<double>& ys, std::vector<double>& vs) {
    for (std::size_t k = from; k < from + count; ++k) {
      xs.push_back(data.x[order[k]]);
      ys.push_back(data.y[order[k]]);
      vs.push_back(data.value[order[k]]);
    }
  };
  std::vector<double> tx, ty, tv, sx, sy, sv;
  pick(0, config.train_size, tx, ty, tv);
  pick(config.train_size, n_test, sx, sy, sv);
  const auto [xlo, xhi] = std::minmax_element(data.x.begin(), data.x.end());
  const auto [ylo, yhi] = std::minmax_element(data.y.begin(), data.y.end());
  if (!(*xhi > *xlo) || !(*yhi > *ylo)) throw DataError("point data: coordinates have no spread");

  BenchmarkReport report;
  report.train_size = config.train_size;
  report.test_size = n_test;
  for (const auto& m : config.methods) {
    BenchmarkResult r;
    r.method = m;
    const auto start = std::chrono::steady_clock::now();
    const auto kr = splines::equispaced_knots(*xlo, *xhi, m.knots);
    const auto kc = splines::equispaced_knots(*ylo, *yhi, m.knots);
    const GaussianSurfaceModel model(
        priors::SurfacePrior::spline_at_points(m.kind, kr, kc, tx, ty, config.hyper), tv);
    const auto draws = hmc::sample(model, with_raw(config.mcmc));
    r.runtime_seconds = seconds_since(start);
    r.divergences = draws.total_divergences();

    const auto at_test = priors::SurfacePrior::spline_at_points(m.kind, kr, kc, sx, sy, config.hyper);
    const Eigen::MatrixXd raw = draws.stacked_raw();
    Eigen::MatrixXd pred(raw.rows(), static_cast<Eigen::Index>(n_test));
    std::vector<double> row(static_cast<std::size_t>(raw.cols() - 1));
    for (Eigen::Index d = 0; d < raw.rows(); ++d) {
      for (std::size_t p = 0; p < row.size(); ++p) row[p] = raw(d, static_cast<Eigen::Index>(p) + 1);
      pred.row(d) = at_test.evaluate(row).surface.col(0).transpose();
    }
    std::vector<double> column(static_cast<std::size_t>(raw.rows()));
    double sse = 0.0;
    for (std::size_t k = 0; k < n_test; ++k) {
      for (Eigen::Index d = 0; d < raw.rows(); ++d) {
        column[static_cast<std::size_t>(d)] = pred(d, static_cast<Eigen::Index>(k));
      }
      const double e = hmc::quantile(column, 0.5) - sv[k];
      sse += e * e;
    }
    r.mse = sse / static_cast<double>(n_test);
    report.results.push_back(r);
  }
  return report;
}

SimulatedMortality simulate_mortality(const MortalitySimulation& sim, const std::string& state,
                                      const std::string& first_week) {
  if (sim.weeks < 4) throw ValidationError("mortality simulation needs at least 4 weeks");
  if (!(sim.peak_total > 0.0) || !(sim.overdispersion > 0.0)) {
    throw ValidationError("mortality simulation needs positive peak_total and overdispersion");
  }
  SimulatedMortality out{mortality::AgeGrid::from_labels(sim.bands, sim.weeks, sim.max_age),
                         {}, {}, {}, {}, {}, {}, {}};
  const int A = out.grid.ages();
  const int W = sim.weeks;
  const int B = out.grid.band_count();

  // Deaths concentrate around an age that drifts younger as the weeks pass.
  out.surface.resize(A, W);
  for (int w = 0; w < W; ++w) {
    const double t = static_cast<double>(w) / static_cast<double>(W - 1);
    const double centre = (sim.centre_start + (sim.centre_end - sim.centre_start) * t) * sim.max_age;
    for (int a = 0; a < A; ++a) {
      const double u = (a - centre) / (sim.age_spread * sim.max_age);
      out.surface(a, w) = -0.5 * u * u;
    }
  }
  out.pi = mortality::composition_from_surface(out.surface);
  if (!sim.lambda.empty()) {
    if (static_cast<int>(sim.lambda.size()) != W) throw ValidationError("lambda needs one entry per week");
    for (double l : sim.lambda) {
      if (!(l > 0.0)) throw ValidationError("lambda entries must be positive");
    }
    out.lambda = sim.lambda;
  } else {
    out.lambda.resize(static_cast<std::size_t>(W));
    for (int w = 0; w < W; ++w) {
      const double u = (w - 0.5 * W) / (0.25 * W);
      out.lambda[static_cast<std::size_t>(w)] = sim.peak_total * (0.15 + 0.85 * std::exp(-0.5 * u * u));
    }
  }
  if (!sim.initial_cumulative.empty() && static_cast<int>(sim.initial_cumulative.size()) != B) {
    throw ValidationError("initial_cumulative needs one entry per band");
  }
  out.mu_band = mortality::expected_band_deaths(out.lambda, out.pi, out.grid);

  std::seed_seq seq{sim.seed, std::uint64_t{0x3f}};
  std::mt19937_64 rng(seq);
  out.deaths.resize(B, W);
  out.calibration.assign(static_cast<std::size_t>(W), 0);
  for (int w = 0; w < W; ++w) {
    for (int b = 0; b < B; ++b) {
      const auto d = draw_negbin(out.mu_band(b, w), sim.overdispersion, rng);
      out.deaths(b, w) = static_cast<int>(d);
      out.calibration[static_cast<std::size_t>(w)] += d;
    }
  }

  const data::Date start = data::parse_date(first_week);
  if (!data::is_saturday(start)) throw ValidationError("first week must be a Saturday");
  std::vector<data::Date> dates;
  for (int w = 0; w <= W; ++w) dates.push_back(start + std::chrono::days{7 * w});
  for (int b = 0; b < B; ++b) {
    data::CumulativeReport rep;
    rep.state = state;
    rep.band = out.grid.bands()[static_cast<std::size_t>(b)].label;
    rep.weeks = dates;
    std::int64_t cum = sim.initial_cumulative.empty() ? 0 : sim.initial_cumulative[static_cast<std::size_t>(b)];
    if (cum < 0) throw ValidationError("initial cumulative counts must be non-negative");
    for (int w = 0; w <= W; ++w) {
      if (w > 0) cum += out.deaths(b, w - 1);
      rep.values.push_back(cum >= 1 && cum <= 9 ? data::CumulativeValue::censored()
                                                : data::CumulativeValue::observed(cum));
    }
    out.reports.push_back(std::move(rep));
  }
  return out;
}

}  // namespace splinegp::studies
