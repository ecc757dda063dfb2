#pragma once

// Hamiltonian Monte Carlo with a diagonal metric, dual-averaging step-size
// adaptation, windowed metric adaptation and rank-normalised convergence
// diagnostics. Chains run on threads and are merged in chain order, so
// results depend only on the seed.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace splinegp::hmc {

/// A differentiable log density on an unconstrained space.
class TargetDensity {
 public:
  virtual ~TargetDensity() = default;

  virtual std::size_t dimension() const = 0;

  /// Returns log p(x) up to a constant and writes d log p / dx into grad.
  /// May throw NumericalError; the sampler treats that as a divergence.
  virtual double log_density_gradient(std::span<const double> x, std::span<double> grad) const = 0;

  /// Names of the reported quantities; defaults to the raw coordinates.
  virtual std::vector<std::string> output_names() const;

  /// Maps a raw draw to the reported quantities; defaults to identity.
  virtual void outputs(std::span<const double> x, std::span<double> out) const;
};

struct SamplerConfig {
  int chains = 4;
  int iterations = 2000;  // per chain, warmup included
  int warmup = 1000;
  std::uint64_t seed = 1;
  double target_accept = 0.8;
  /// Total leapfrog integration time, jittered uniformly by +-20%.
  double integration_time = 2.0;
  int max_leapfrog = 1024;
  double init_radius = 2.0;
  int max_init_attempts = 100;
  /// 0 means one thread per chain, capped at the hardware concurrency.
  int threads = 0;
  bool store_raw = false;

  void validate() const;
};

struct ChainResult {
  Eigen::MatrixXd draws;  // post-warmup iterations x outputs
  Eigen::MatrixXd raw;    // post-warmup iterations x dimension, when requested
  int divergences = 0;
  double step_size = 0.0;
  double mean_accept = 0.0;
  Eigen::VectorXd inv_metric;
};

struct ParamSummary {
  std::string name;
  double mean = 0.0;
  double sd = 0.0;
  double q025 = 0.0;
  double q50 = 0.0;
  double q975 = 0.0;
  double ess_bulk = 0.0;
  double rhat = 0.0;
};

struct PosteriorDraws {
  std::vector<std::string> names;
  std::vector<ChainResult> chains;
  SamplerConfig config;

  std::size_t draws_per_chain() const;
  std::size_t total_draws() const;
  int total_divergences() const;
  std::size_t index_of(const std::string& name) const;
  /// One vector per chain for a single output.
  std::vector<std::vector<double>> by_chain(std::size_t column) const;
  /// All chains concatenated for a single output.
  std::vector<double> pooled(std::size_t column) const;
  /// Chains stacked row-wise: total_draws x outputs.
  Eigen::MatrixXd stacked() const;
  Eigen::MatrixXd stacked_raw() const;
  std::vector<ParamSummary> summarize() const;
};

/// Position, momentum and cached gradient of one trajectory state.
struct PhasePoint {
  Eigen::VectorXd q;
  Eigen::VectorXd p;
  Eigen::VectorXd grad;
  double log_density = 0.0;
};

/// `steps` leapfrog steps with the diagonal inverse metric. Returns false if
/// the target threw or produced a non-finite value along the way.
bool leapfrog(const TargetDensity& target, PhasePoint& z, const Eigen::VectorXd& inv_metric,
              double step_size, int steps);

/// Draws a finite starting point uniformly in [-radius, radius]^d.
Eigen::VectorXd initial_point(const TargetDensity& target, std::mt19937_64& rng, double radius,
                              int max_attempts);

PosteriorDraws sample(const TargetDensity& target, const SamplerConfig& config);

/// Rank-normalised split R-hat: the larger of the bulk and folded-tail values.
double split_rhat(const std::vector<std::vector<double>>& chains);

/// Bulk effective sample size on rank-normalised split chains, with Geyer's
/// initial monotone sequence truncation.
double ess_bulk(const std::vector<std::vector<double>>& chains);

/// Linear-interpolation quantile (type 7) of an unsorted sample.
double quantile(std::vector<double> values, double prob);

}  // namespace splinegp::hmc
