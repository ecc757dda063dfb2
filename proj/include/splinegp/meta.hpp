#pragma once

// Relative resurgence deaths per state and age class, the random-effects
// Gamma meta-regression on pre-resurgence vaccination, and counterfactual
// projection under alternative vaccination coverage.

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "splinegp/hmc.hpp"

namespace splinegp::meta {

inline constexpr int kClasses = 2;  // 18-64, 65+

enum class GammaConvention { ShapeRate, ShapeScale };
GammaConvention parse_gamma_convention(const std::string& text);
std::string gamma_convention_name(GammaConvention c);

/// Sums an ages x weeks matrix into the two classes (ages 18..64 and 65..max).
Eigen::MatrixXd aggregate_to_classes(const Eigen::MatrixXd& by_age);

/// One state's relative deaths from the resurgence start onwards.
struct RelativeDeaths {
  std::string state;
  int start_week = 0;                         // 1-based
  std::array<double, kClasses> max_pre{};     // pre-resurgence maximum of the mean trajectory
  std::array<std::vector<double>, kClasses> r;  // r[c][k] at week start_week + k
};

/// mean_by_class is classes x weeks (posterior-mean trajectory). Needs at
/// least one pre-resurgence week and a positive pre-resurgence maximum.
RelativeDeaths relative_deaths(const std::string& state, const Eigen::MatrixXd& mean_by_class,
                               int start_week);

struct StateData {
  RelativeDeaths deaths;
  std::array<double, kClasses> vacc_pre{};  // v^{pre-r}, 14 days before the start week
};

struct MetaParams {
  std::array<double, kClasses> chi_base{};
  std::array<double, kClasses> psi_base{};
  double chi_vacc = 0.0;
  double psi_vacc = 0.0;
  std::array<double, kClasses> chi_cross{};
  std::array<double, kClasses> psi_cross{};
  std::array<double, kClasses> sigma_chi{1.0, 1.0};
  std::vector<std::array<double, kClasses>> chi_state;  // per state
  std::vector<double> kappa;                            // per state
};

class MetaModel : public hmc::TargetDensity {
 public:
  /// Raw layout: chi_base[2], psi_base[2], chi_vacc, psi_vacc, chi_cross[2],
  /// psi_cross[2], log sigma_chi[2], z_state[M x 2] (state-major), log kappa[M].
  /// State effects are non-centred: chi_state = sigma_chi * z_state.
  MetaModel(std::vector<StateData> states, GammaConvention convention = GammaConvention::ShapeRate);

  std::size_t dimension() const override;
  double log_density_gradient(std::span<const double> x, std::span<double> grad) const override;
  std::vector<std::string> output_names() const override;
  void outputs(std::span<const double> x, std::span<double> out) const override;

  MetaParams unpack(std::span<const double> raw) const;
  std::vector<double> pack(const MetaParams& p) const;

  /// log xi for state m, class c, week offset k under the given vaccination rates.
  double log_shape(const MetaParams& p, std::size_t m, int c, int k,
                   const std::array<double, kClasses>& vacc) const;
  /// E[r] = xi / kappa^2 (shape-rate) or xi * kappa^2 (shape-scale).
  double expected_relative(double xi, double kappa) const;
  /// Gamma observation terms only.
  double log_likelihood(const MetaParams& p) const;

  const std::vector<StateData>& states() const { return states_; }
  GammaConvention convention() const { return convention_; }

 private:
  std::vector<StateData> states_;
  GammaConvention convention_;
};

/// Log density of the meta-regression (likelihood plus priors) at raw parameters.
double meta_loglik(const MetaModel& model, std::span<const double> raw, std::span<double> grad);

struct CounterfactualSummary {
  std::string state;
  int age_class = 0;
  double avoided_median = 0.0, avoided_lo95 = 0.0, avoided_hi95 = 0.0;
  double pct_median = 0.0, pct_lo95 = 0.0, pct_hi95 = 0.0;
};

/// Replaces each state's 18-64 pre-resurgence rate with `scenario_rate` and
/// reports avoided deaths (model-based observed minus counterfactual, summed
/// over resurgence weeks and rescaled by the pre-resurgence maximum) as draw
/// quantiles, for both classes.
std::vector<CounterfactualSummary> counterfactual_project(const MetaModel& model,
                                                          const Eigen::MatrixXd& raw_draws,
                                                          double scenario_rate);

/// Synthetic resurgence data with known effects, for recovery checks.
struct MetaSimulation {
  int states = 20;
  int weeks = 12;
  double chi_base = 3.5;
  double psi_base = 0.05;
  double chi_vacc = -2.0;
  double psi_vacc = -0.1;
  double chi_cross = 0.0;
  double psi_cross = 0.0;
  double sigma_chi = 0.2;
  double kappa = 1.0;
  std::uint64_t seed = 1;
};

std::vector<StateData> simulate_meta_data(const MetaSimulation& sim,
                                          GammaConvention convention = GammaConvention::ShapeRate);

}  // namespace splinegp::meta
