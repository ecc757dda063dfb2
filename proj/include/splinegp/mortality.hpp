#pragma once

// Age-by-week mortality model: a latent surface f becomes a weekly age
// composition via a column softmax, weekly totals lambda spread deaths over
// ages, 1-year expectations aggregate to reporting bands, and the band
// series enter through Negative-Binomial and censored-sum likelihoods.

#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "splinegp/data.hpp"
#include "splinegp/hmc.hpp"
#include "splinegp/priors.hpp"

namespace splinegp::mortality {

struct AgeBand {
  std::string label;
  int first = 0;
  int last = 0;
};

/// "0", "1-4", "85+" (open bands end at max_age).
AgeBand parse_band(const std::string& label, int max_age = 105);

class AgeGrid {
 public:
  /// Bands must partition 0..max_age in order; weeks >= 1.
  AgeGrid(std::vector<AgeBand> bands, int weeks, int max_age = 105);

  /// The 11 standard reporting bands over 0..105.
  static AgeGrid standard(int weeks);
  static AgeGrid from_labels(const std::vector<std::string>& labels, int weeks, int max_age = 105);

  int ages() const { return max_age_ + 1; }
  int max_age() const { return max_age_; }
  int weeks() const { return weeks_; }
  const std::vector<AgeBand>& bands() const { return bands_; }
  int band_count() const { return static_cast<int>(bands_.size()); }
  int band_of(int age) const { return band_of_[static_cast<std::size_t>(age)]; }

 private:
  std::vector<AgeBand> bands_;
  std::vector<int> band_of_;
  int weeks_;
  int max_age_;
};

/// Column-wise softmax with max subtraction. Throws NumericalError on non-finite input.
Eigen::MatrixXd composition_from_surface(const Eigen::MatrixXd& f);

/// mu_{b,w} = lambda_w * sum_{a in b} pi_{a,w}.
Eigen::MatrixXd expected_band_deaths(std::span<const double> lambda, const Eigen::MatrixXd& pi,
                                     const AgeGrid& grid);

/// Grid prior over ages x weeks with both axes rescaled to [0, 1].
priors::SurfacePrior make_surface_prior(priors::PriorKind kind, const AgeGrid& grid,
                                        std::size_t knots_age, std::size_t knots_week,
                                        priors::HyperPriors hyper = {});

/// Gamma prior on weekly totals with mean T_w and sd sd_factor * T_w / eta.
struct TotalsPrior {
  std::vector<double> mean;  // T_w, floored at `floor`
  double eta = 1.0;
  double sd_factor = 0.5;
  double floor = 1.0;

  static TotalsPrior from_series(std::span<const data::CensoredSeries> series, int weeks,
                                 double sd_factor = 0.5, double floor = 1.0);
};

class MortalityModel : public hmc::TargetDensity {
 public:
  struct State {
    std::vector<double> lambda;
    double nu = 0.0;
    priors::SurfaceEval surface;
    Eigen::MatrixXd pi;       // ages x weeks
    Eigen::MatrixXd mu_band;  // bands x weeks
  };

  MortalityModel(AgeGrid grid, std::vector<data::CensoredSeries> series, priors::SurfacePrior prior,
                 TotalsPrior totals);

  /// Raw layout: log(lambda_w / T_w) for w = 1..W, log nu^{-1/2}, then the surface prior.
  std::size_t dimension() const override;
  double log_density_gradient(std::span<const double> x, std::span<double> grad) const override;
  std::vector<std::string> output_names() const override;
  void outputs(std::span<const double> x, std::span<double> out) const override;

  State transform(std::span<const double> raw) const;
  /// Observation terms only; invariant to per-week shifts of the surface.
  double log_likelihood(const State& s) const;
  /// alpha_{a,w} = mu_{a,w} / nu.
  Eigen::MatrixXd age_concentrations(std::span<const double> raw) const;
  /// Raw vector that reproduces the given constrained values.
  std::vector<double> to_raw(std::span<const double> lambda, double nu,
                             std::span<const double> surface_raw) const;

  const AgeGrid& grid() const { return grid_; }
  const priors::SurfacePrior& prior() const { return prior_; }
  const TotalsPrior& totals_prior() const { return totals_; }
  const std::vector<data::CensoredSeries>& series() const { return series_; }
  std::size_t surface_offset() const { return static_cast<std::size_t>(grid_.weeks()) + 1; }

 private:
  AgeGrid grid_;
  std::vector<data::CensoredSeries> series_;
  priors::SurfacePrior prior_;
  TotalsPrior totals_;
};

/// d*_{.,w} ~ DirichletMultinomial(total_w, alpha_{.,w}) for each draw, with
/// per-draw random streams derived from `seed`.
std::vector<Eigen::MatrixXi> predictive_rescale(const std::vector<Eigen::MatrixXd>& alpha_draws,
                                                std::span<const std::int64_t> calibration,
                                                std::uint64_t seed, int threads = 0);

/// Alpha matrices for `count` draws spread evenly over the stored raw draws.
std::vector<Eigen::MatrixXd> concentration_draws(const MortalityModel& model,
                                                 const hmc::PosteriorDraws& draws, std::size_t count);

std::vector<std::int64_t> sample_dirichlet_multinomial(std::int64_t total,
                                                       std::span<const double> alpha,
                                                       std::mt19937_64& rng);
double dirichlet_multinomial_logpmf(std::span<const std::int64_t> counts,
                                    std::span<const double> alpha);

/// Across-draw mean of the predictive draws, ages x weeks.
Eigen::MatrixXd predictive_mean(const std::vector<Eigen::MatrixXi>& d_star);

/// Per-draw cumulative deaths in `ages` over all weeks divided by their population.
std::vector<double> mortality_rate(const std::vector<Eigen::MatrixXi>& d_star,
                                   std::span<const int> ages, std::span<const double> population);

}  // namespace splinegp::mortality
