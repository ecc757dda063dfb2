#pragma once

// The four interchangeable priors on a latent 2D surface. Each maps an
// unconstrained parameter vector to (log prior density, surface) and can
// push a surface adjoint back onto that vector, so any observation model can
// be written once against this interface.

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include <Eigen/Dense>

#include "splinegp/kernels.hpp"
#include "splinegp/splines.hpp"

namespace splinegp::priors {

enum class PriorKind { Standard2DGP, StandardBSplines, BayesianPSplines, ProjectedGP };

/// CLI spelling: gp2d, bsplines, psplines, projected-gp.
std::string_view prior_kind_name(PriorKind kind);
PriorKind parse_prior_kind(std::string_view name);

/// Hyperprior constants. Defaults: lengthscales ~ Inv-Gamma(5, 5), zeta and
/// tau ~ half-Cauchy(0, 1).
struct HyperPriors {
  double lengthscale_shape = 5.0;
  double lengthscale_scale = 5.0;
  double magnitude_scale = 1.0;
  double precision_scale = 1.0;
  /// Soft sum-to-zero on the P-spline coefficients: mean(beta) ~ N(0, sd).
  double sum_to_zero_sd = 0.001;
  /// P-spline surfaces carry an explicit level, level ~ N(0, sd).
  double level_sd = 1.0;
  double jitter = kernels::kDefaultJitter;
};

struct HyperSpec {
  std::string name;
  std::string support;
  std::string prior;
};

/// First-order neighbourhood graph on an I x J coefficient lattice. Nodes
/// are numbered column-major, u = i + I * j.
class GmrfGraph {
 public:
  GmrfGraph(std::size_t rows, std::size_t cols);

  std::size_t rows() const { return rows_; }
  std::size_t cols() const { return cols_; }
  std::size_t node_count() const { return rows_ * cols_; }
  const std::vector<std::pair<std::size_t, std::size_t>>& edges() const { return edges_; }
  const std::vector<int>& degrees() const { return degrees_; }

  /// sum over edges of (beta_u - beta_v)^2
  double pairwise_sum(std::span<const double> beta) const;

 private:
  std::size_t rows_;
  std::size_t cols_;
  std::vector<std::pair<std::size_t, std::size_t>> edges_;
  std::vector<int> degrees_;
};

/// Log density of an intrinsic GMRF under the pairwise-difference form, with
/// the (M - 1) log tau normaliser of the rank-deficient precision.
double gmrf_pairwise_logdensity(const GmrfGraph& graph, std::span<const double> beta, double tau);

/// Everything a forward pass produced that the backward pass needs.
struct SurfaceEval {
  double log_prior = 0.0;
  /// n x m on a grid layout; N x 1 on a scattered-point layout.
  Eigen::MatrixXd surface;
  Eigen::MatrixXd latent;  // z (GP variants) or beta (B-spline variants)
  Eigen::MatrixXd beta;    // coefficients that feed the projection (spline variants)
  Eigen::MatrixXd rows_chol;
  Eigen::MatrixXd cols_chol;
  Eigen::MatrixXd rows_cov;  // jitter excluded
  Eigen::MatrixXd cols_cov;
  std::vector<double> hypers;  // constrained, in hyper_spec() order
};

class SurfacePrior {
 public:
  static SurfacePrior standard_gp(std::vector<double> row_coords, std::vector<double> col_coords,
                                  HyperPriors hyper = {});
  static SurfacePrior bsplines(splines::BasisMatrix basis_rows, splines::BasisMatrix basis_cols,
                               HyperPriors hyper = {});
  static SurfacePrior psplines(splines::BasisMatrix basis_rows, splines::BasisMatrix basis_cols,
                               HyperPriors hyper = {});
  static SurfacePrior projected_gp(splines::BasisMatrix basis_rows, splines::BasisMatrix basis_cols,
                                   HyperPriors hyper = {});
  /// Spline variant evaluated at scattered points (x_k, y_k) instead of a grid.
  static SurfacePrior spline_at_points(PriorKind kind, const splines::KnotVector& row_knots,
                                       const splines::KnotVector& col_knots,
                                       std::span<const double> xs, std::span<const double> ys,
                                       HyperPriors hyper = {});
  /// Grid prior of the given kind, with equispaced knots for the spline kinds.
  static SurfacePrior make(PriorKind kind, std::span<const double> row_coords,
                           std::span<const double> col_coords, std::size_t knots_rows,
                           std::size_t knots_cols, HyperPriors hyper = {});

  PriorKind kind() const { return kind_; }
  std::size_t raw_dimension() const;
  const std::vector<HyperSpec>& hyper_spec() const { return hyper_spec_; }
  std::vector<std::string> parameter_names() const;
  /// Surface shape produced by evaluate().
  Eigen::Index surface_rows() const;
  Eigen::Index surface_cols() const;
  bool on_points() const { return !point_rows_.empty(); }
  const HyperPriors& hyper_priors() const { return hyper_; }
  const std::optional<splines::BasisMatrix>& basis_rows() const { return basis_rows_; }
  const std::optional<splines::BasisMatrix>& basis_cols() const { return basis_cols_; }

  SurfaceEval evaluate(std::span<const double> raw) const;

  /// Adds d(log prior + L)/d raw to grad_raw, where d_surface = dL/d surface.
  void backprop(const SurfaceEval& eval, const Eigen::MatrixXd& d_surface,
                std::span<double> grad_raw) const;

 private:
  SurfacePrior() = default;

  std::size_t coefficient_rows() const;
  std::size_t coefficient_cols() const;
  std::size_t hyper_count() const { return hyper_spec_.size(); }
  Eigen::MatrixXd project(const Eigen::MatrixXd& beta) const;
  Eigen::MatrixXd project_adjoint(const Eigen::MatrixXd& d_surface) const;
  void gp_forward(std::span<const double> raw, SurfaceEval& out) const;
  void gp_backward(const SurfaceEval& eval, const Eigen::MatrixXd& d_out,
                   std::span<double> grad_raw) const;

  PriorKind kind_ = PriorKind::ProjectedGP;
  HyperPriors hyper_;
  std::vector<HyperSpec> hyper_spec_;
  // GP index sets: grid coordinates for Standard2DGP, basis indices 1..I and
  // 1..J for ProjectedGP.
  std::vector<double> gp_rows_;
  std::vector<double> gp_cols_;
  Eigen::MatrixXd gp_rows_sqdist_;
  Eigen::MatrixXd gp_cols_sqdist_;
  std::optional<splines::BasisMatrix> basis_rows_;
  std::optional<splines::BasisMatrix> basis_cols_;
  std::optional<GmrfGraph> graph_;
  // scattered layout
  std::vector<splines::LocalBasis> point_rows_;
  std::vector<splines::LocalBasis> point_cols_;
  std::size_t point_coef_rows_ = 0;
  std::size_t point_coef_cols_ = 0;
};

/// Splits the Gaussian log density of a projected-GP surface into its
/// quadratic (data-fit) term vec(f)^T Sigma^+ vec(f), with Sigma the
/// projected covariance, and the log|K_beta| complexity penalty.
struct PenaltyTerms {
  double data_fit = 0.0;
  double penalty = 0.0;
};

PenaltyTerms penalty_decomposition(const SurfacePrior& prior, std::span<const double> f_vec,
                                   const Eigen::MatrixXd& K_beta);

}  // namespace splinegp::priors
