#pragma once

// Observation models and drivers for the comparison studies: count surfaces
// on a grid with a Negative-Binomial likelihood, scattered continuous data
// with a Gaussian likelihood, and synthetic generators with known truth for
// the mortality pipeline.

#include <cstdint>
#include <istream>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "splinegp/data.hpp"
#include "splinegp/hmc.hpp"
#include "splinegp/mortality.hpp"
#include "splinegp/priors.hpp"

namespace splinegp::studies {

struct GridObservation {
  int row = 0;
  int col = 0;
  std::int64_t count = 0;
};

/// y_ij ~ NegBin(exp(f_ij) / nu, nu / (1 + nu)) on the observed cells.
class CountSurfaceModel : public hmc::TargetDensity {
 public:
  CountSurfaceModel(priors::SurfacePrior prior, std::vector<GridObservation> observations);

  /// Raw layout: log nu^{-1/2} (half-normal prior), then the surface prior.
  std::size_t dimension() const override;
  double log_density_gradient(std::span<const double> x, std::span<double> grad) const override;
  std::vector<std::string> output_names() const override;
  void outputs(std::span<const double> x, std::span<double> out) const override;

  /// exp(f) over the whole grid.
  Eigen::MatrixXd mean_surface(std::span<const double> raw) const;
  double overdispersion(std::span<const double> raw) const;
  const priors::SurfacePrior& prior() const { return prior_; }

 private:
  priors::SurfacePrior prior_;
  std::vector<GridObservation> observations_;
};

/// y_k ~ N(f(x_k, y_k), sigma^2) with the prior laid out on the points.
class GaussianSurfaceModel : public hmc::TargetDensity {
 public:
  GaussianSurfaceModel(priors::SurfacePrior prior, std::vector<double> values);

  /// Raw layout: log sigma (half-Cauchy prior), then the surface prior.
  std::size_t dimension() const override;
  double log_density_gradient(std::span<const double> x, std::span<double> grad) const override;
  std::vector<std::string> output_names() const override;
  void outputs(std::span<const double> x, std::span<double> out) const override;

  const priors::SurfacePrior& prior() const { return prior_; }

 private:
  priors::SurfacePrior prior_;
  std::vector<double> values_;
};

/// A prior kind with its knot count per axis (ignored by gp2d).
struct MethodSpec {
  priors::PriorKind kind = priors::PriorKind::ProjectedGP;
  std::size_t knots = 10;

  std::string label() const;
};

/// "gp2d", or "<kind>:<knots>".
MethodSpec parse_method(const std::string& text);

/// "weakly", "mildly" or "strongly" correlated for 0.05, 0.25 and 1; "custom" otherwise.
std::string correlation_label(double lengthscale);

struct SimulationConfig {
  std::size_t grid_size = 50;
  double lengthscale = 0.25;
  double overdispersion = 0.1;
  double train_fraction = 0.4;
  std::vector<MethodSpec> methods;
  hmc::SamplerConfig mcmc;
  priors::HyperPriors hyper;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Truth and data of one simulated count surface on {0, 1/(n-1), ..., 1}^2.
struct SimulatedStudy {
  std::vector<double> coords;
  Eigen::MatrixXd log_mean;  // the GP draw f
  Eigen::MatrixXd mean;      // exp(f)
  Eigen::MatrixXi counts;
  std::vector<GridObservation> train;
  std::vector<GridObservation> test;
};

/// f is a zero-mean GP with unit variance and the configured lengthscale;
/// counts are Negative Binomial around exp(f); a uniformly sampled
/// train_fraction of the cells is kept for fitting.
SimulatedStudy simulate_count_study(const SimulationConfig& config);

struct MethodResult {
  MethodSpec method;
  double mse_mean = 0.0;   // mean squared error of the posterior-median mean surface on test cells
  double mse_sd = 0.0;     // sd of those squared errors
  double coverage95 = 0.0; // test counts inside the 95% posterior predictive interval
  double runtime_seconds = 0.0;
  int divergences = 0;
  double max_rhat = 0.0;
  Eigen::MatrixXd median_surface;
};

/// Fits one method to the training cells and scores it on the test cells.
MethodResult fit_count_method(const SimulatedStudy& study, const MethodSpec& method,
                              const SimulationConfig& config);

struct SimulationReport {
  SimulationConfig config;
  SimulatedStudy study;
  std::vector<MethodResult> results;
};

SimulationReport run_simulation(const SimulationConfig& config);

/// Scattered continuous observations.
struct PointData {
  std::vector<double> x;
  std::vector<double> y;
  std::vector<double> value;

  std::size_t size() const { return value.size(); }
};

/// Header must contain x, y and value (any order, extra columns ignored).
PointData load_point_csv(std::istream& in);
PointData load_point_csv(const std::string& path);

/// Smooth field on [0, 1]^2 plus Gaussian noise, for fixtures and tests.
PointData synthetic_point_data(std::size_t count, double noise_sd, std::uint64_t seed);

struct BenchmarkConfig {
  std::size_t train_size = 2000;
  std::size_t test_size = 1000;  // 0 keeps every point not used for training
  std::vector<MethodSpec> methods;
  hmc::SamplerConfig mcmc;
  priors::HyperPriors hyper;
  std::uint64_t seed = 1;

  void validate() const;
};

struct BenchmarkResult {
  MethodSpec method;
  double mse = 0.0;  // posterior-median prediction against held-out values
  double runtime_seconds = 0.0;
  int divergences = 0;
};

struct BenchmarkReport {
  std::size_t train_size = 0;
  std::size_t test_size = 0;
  std::vector<BenchmarkResult> results;
};

/// Gaussian-likelihood fits of the spline priors on a random train/test split.
BenchmarkReport run_benchmark(const PointData& data, const BenchmarkConfig& config);

/// Weekly deaths drawn from the mortality model with a known surface.
struct MortalitySimulation {
  std::vector<std::string> bands{"0-24", "25-44", "45-54", "55-64", "65-74", "75+"};
  int weeks = 20;
  int max_age = 105;
  double peak_total = 400.0;  // all-age expected deaths at the epidemic peak
  /// Replaces the default single-wave curve when non-empty; one entry per week.
  std::vector<double> lambda;
  /// The age of peak mortality moves linearly from centre_start to
  /// centre_end (fractions of max_age) over the weeks.
  double centre_start = 0.7;
  double centre_end = 0.5;
  double age_spread = 0.22;  // fraction of max_age
  /// Cumulative count reported before week 1, per band; zeros when empty.
  std::vector<std::int64_t> initial_cumulative;
  double overdispersion = 0.05;
  std::uint64_t seed = 1;
};

struct SimulatedMortality {
  mortality::AgeGrid grid;
  Eigen::MatrixXd surface;   // ages x weeks, known f
  Eigen::MatrixXd pi;        // ages x weeks
  std::vector<double> lambda;
  Eigen::MatrixXd mu_band;   // bands x weeks
  Eigen::MatrixXi deaths;    // bands x weeks
  /// One report per band with weeks + 1 cumulative values, censored in 1..9.
  std::vector<data::CumulativeReport> reports;
  /// All-age weekly totals, as an external calibration source would report them.
  std::vector<std::int64_t> calibration;
};

SimulatedMortality simulate_mortality(const MortalitySimulation& sim,
                                      const std::string& state = "XX",
                                      const std::string& first_week = "2020-05-02");

}  // namespace splinegp::studies
