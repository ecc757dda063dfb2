#pragma once

// Run configuration: a TOML file of [sections] with key = value pairs,
// overridden by command-line flags. The effective configuration is
// serialised canonically and hashed so every output can name the run that
// produced it.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "splinegp/hmc.hpp"
#include "splinegp/meta.hpp"
#include "splinegp/priors.hpp"

namespace splinegp::config {

struct RunConfig {
  std::string command;
  std::uint64_t seed = 1;
  std::string out_dir = "out";
  hmc::SamplerConfig mcmc = default_mcmc();

  priors::PriorKind prior_kind = priors::PriorKind::ProjectedGP;
  std::size_t knots_age = 12;
  std::size_t knots_week = 10;
  priors::HyperPriors hyper;

  // simulate
  std::size_t sim_grid = 30;
  double sim_lengthscale = 0.25;
  double sim_overdispersion = 0.1;
  double sim_train_fraction = 0.4;
  int sim_replicates = 1;
  std::vector<std::string> sim_methods{"gp2d", "bsplines:10", "psplines:10", "projected-gp:10"};

  // benchmark
  std::string bench_data;
  std::size_t bench_train = 2000;
  std::size_t bench_test = 1000;
  std::vector<std::string> bench_methods{"bsplines:125", "psplines:125", "projected-gp:125"};

  // fit and predict
  std::string cdc_path;
  std::string calibration_path;
  std::vector<std::string> states;
  double sd_factor = 0.5;
  std::size_t draws_per_chain = 500;

  // meta
  std::string fits_dir;  // defaults to out_dir
  std::string vaccination_path;
  std::string resurgence_from = "2021-07-01";
  int vaccination_lag_days = 14;
  meta::GammaConvention gamma_convention = meta::GammaConvention::ShapeRate;
  double scenario_rate = 0.0;  // 0 means: the largest observed 18-64 rate across states

  static hmc::SamplerConfig default_mcmc();

  /// Every result-affecting setting as sorted key=value lines. The command,
  /// output directory and thread count are excluded, so fit, predict and meta
  /// runs on one configuration share a hash.
  std::string canonical() const;
  /// FNV-1a 64-bit hash of canonical(), as 16 hex digits.
  std::string hash() const;
  /// Range checks that need no file access.
  void validate() const;
};

/// Parses TOML text. Relative paths resolve against base_dir. Unknown
/// sections or keys are a ValidationError.
RunConfig parse_config(const std::string& text, const std::string& base_dir = ".");
RunConfig load_config(const std::string& path);

std::uint64_t fnv1a64(const std::string& bytes);

}  // namespace splinegp::config
