#pragma once

// B-spline bases built with the Cox-de Boor recursion on boundary-padded
// knot vectors, and tensor-product surfaces over two such bases.

#include <cstddef>
#include <span>
#include <vector>

#include <Eigen/Dense>

namespace splinegp::splines {

/// Interior knots plus the boundary-padded sequence the recursion runs on.
///
/// The extended sequence has `degree` copies of the first interior knot in
/// front and `degree` copies of the last one behind, so its length is
/// 2 * degree + K for K interior knots.
class KnotVector {
 public:
  /// Throws ValidationError unless `interior` is strictly increasing with at
  /// least two entries and `degree >= 0`.
  KnotVector(std::vector<double> interior, int degree);

  const std::vector<double>& interior() const { return interior_; }
  const std::vector<double>& extended() const { return extended_; }
  int degree() const { return degree_; }
  std::size_t basis_count() const { return interior_.size() + degree_ - 1; }
  double lower() const { return interior_.front(); }
  double upper() const { return interior_.back(); }

 private:
  std::vector<double> interior_;
  std::vector<double> extended_;
  int degree_;
};

KnotVector extend_knots(std::span<const double> interior, int degree);

/// `count` equally spaced knots over [lo, hi], both ends included.
KnotVector equispaced_knots(double lo, double hi, std::size_t count, int degree = 3);

/// Basis functions evaluated on a 1D grid, one row per basis function.
struct BasisMatrix {
  Eigen::MatrixXd values;  // basis_count x grid.size()
  std::vector<double> grid;
  KnotVector knots;

  std::size_t basis_count() const { return static_cast<std::size_t>(values.rows()); }
  std::size_t grid_size() const { return grid.size(); }
};

/// Evaluates every basis function at every grid point.
///
/// The half-open degree-0 indicators leave the right end of the domain
/// uncovered; there the last basis function is set to 1 so that each column
/// sums to one on the closed interval. Throws ValidationError for grid points
/// outside [lower, upper].
BasisMatrix eval_basis(const KnotVector& knots, std::span<const double> grid);

/// Basis built on `knot_count` equispaced knots over [min(grid), max(grid)].
BasisMatrix equispaced_basis(std::span<const double> grid, std::size_t knot_count, int degree = 3);

/// Non-zero window of the basis at a single point: values[k] belongs to
/// basis function first + k.
struct LocalBasis {
  std::size_t first = 0;
  std::vector<double> values;
};

LocalBasis local_basis(const KnotVector& knots, double x);

/// (B^rows)^T * beta * B^cols, i.e. sum_ij beta_ij B_i(row point) B_j(col point).
Eigen::MatrixXd tensor_surface(const Eigen::MatrixXd& beta, const BasisMatrix& basis_rows,
                               const BasisMatrix& basis_cols);

}  // namespace splinegp::splines
