#pragma once

// Squared-exponential kernels, Kronecker-structured covariances and the
// Cholesky machinery (including its reverse-mode adjoint) used by the
// Gaussian-process surface priors.

#include <cstdint>
#include <span>

#include <Eigen/Dense>

#include "splinegp/splines.hpp"

namespace splinegp::kernels {

/// Diagonal inflation applied before every Cholesky factorisation.
inline constexpr double kDefaultJitter = 1e-9;

/// k(a, b) = variance * exp(-(a - b)^2 / (2 lengthscale^2)); variance is zeta^2.
class SqExpKernel {
 public:
  SqExpKernel(double variance, double lengthscale);

  double variance() const { return variance_; }
  double lengthscale() const { return lengthscale_; }

 private:
  double variance_;
  double lengthscale_;
};

Eigen::MatrixXd sqexp(std::span<const double> points_a, std::span<const double> points_b,
                      const SqExpKernel& kernel);

/// Running total of scalar kernel evaluations performed by sqexp. Test hook
/// for the O(n^2 + m^2) construction contract.
std::uint64_t kernel_evaluation_count();
void reset_kernel_evaluation_count();

/// (A kron B) vec(V), reshaped, without forming the Kronecker product:
/// returns B * V * A^T. A is p x q, B is r x s, V is s x q; result is r x p.
Eigen::MatrixXd kron_mvprod(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            const Eigen::MatrixXd& V);

/// Materialised Kronecker product. Only for small instances.
Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B);

/// Lower Cholesky factor of K + jitter * I. On failure throws NumericalError
/// carrying an estimate of the smallest eigenvalue of the jittered matrix.
Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& K, double jitter = kDefaultJitter);

/// Given L = chol(K) and the adjoint of L (only its lower triangle is read),
/// returns the symmetric adjoint of K, so that dF = sum_ij Kbar_ij dK_ij for
/// symmetric perturbations dK.
Eigen::MatrixXd cholesky_adjoint(const Eigen::MatrixXd& L, const Eigen::MatrixXd& L_bar);

/// Separable covariance K_cols kron K_rows over a column-major vec of an
/// n x m grid, held as its two factors.
struct KroneckerCov {
  Eigen::MatrixXd rows;  // n x n, jitter included
  Eigen::MatrixXd cols;  // m x m, jitter included
  Eigen::MatrixXd rows_chol;
  Eigen::MatrixXd cols_chol;
  double jitter = kDefaultJitter;
};

/// Builds both factors; touches n^2 + m^2 kernel evaluations.
KroneckerCov kronecker_cov(std::span<const double> row_points, std::span<const double> col_points,
                           const SqExpKernel& row_kernel, const SqExpKernel& col_kernel,
                           double jitter = kDefaultJitter);

/// Non-centred draw L_rows * z * L_cols^T, whose vec has covariance
/// K_cols kron K_rows when z is standard normal.
Eigen::MatrixXd sample_grid_gp(const Eigen::MatrixXd& rows_chol, const Eigen::MatrixXd& cols_chol,
                               const Eigen::MatrixXd& z);

/// (B_cols kron B_rows)^T K_beta (B_cols kron B_rows): the covariance of the
/// surface induced by a Gaussian prior with covariance K_beta on vec(beta).
/// Dense (nm x nm); meant for small instances and tests.
Eigen::MatrixXd projected_kernel(const splines::BasisMatrix& basis_rows,
                                 const splines::BasisMatrix& basis_cols,
                                 const Eigen::MatrixXd& K_beta);

}  // namespace splinegp::kernels
