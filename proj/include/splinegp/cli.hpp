#pragma once

// Subcommands of the splinegp tool. Each validates its inputs before any
// sampling, writes long-format CSV files whose first line records the config
// hash and seed, and returns the paths it wrote.

#include <iosfwd>
#include <string>
#include <vector>

#include "splinegp/config.hpp"

namespace splinegp::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitInput = 2;      // validation or data error
inline constexpr int kExitNumerical = 3;  // sampler or factorisation failure

/// "# config_hash=<hex> seed=<n>"
std::string provenance_line(const config::RunConfig& cfg);

/// Simulation study: one row per (replicate, method) with test-cell MSE,
/// plus the long-format surfaces. Runtimes go to timing.csv, the one output
/// that is not reproducible byte for byte.
std::vector<std::string> cmd_simulate(const config::RunConfig& cfg, std::ostream& log);

/// Gaussian-likelihood spline fits on scattered points. Runtimes go to
/// benchmark_timing.csv.
std::vector<std::string> cmd_benchmark(const config::RunConfig& cfg, std::ostream& log);

/// Mortality model per state: fit_<state>.csv (expected deaths by age and
/// week), diagnostics, the posterior-mean trajectory used downstream, and
/// raw draws for predict.
std::vector<std::string> cmd_fit(const config::RunConfig& cfg, std::ostream& log);

/// Dirichlet-Multinomial rescaling of stored draws onto calibration totals,
/// with a band-level posterior predictive check.
std::vector<std::string> cmd_predict(const config::RunConfig& cfg, std::ostream& log);

/// Meta-regression of resurgent deaths on vaccination, with effect sizes,
/// posterior predictive series and counterfactual.csv.
std::vector<std::string> cmd_meta(const config::RunConfig& cfg, std::ostream& log);

/// Parses arguments (argv[0] is skipped), dispatches, and maps errors to exit codes.
int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err);

}  // namespace splinegp::cli
