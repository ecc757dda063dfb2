#include "splinegp/kernels.hpp"

#include <atomic>
#include <cmath>
#include <sstream>

#include "splinegp/errors.hpp"

namespace splinegp::kernels {

namespace {

std::atomic<std::uint64_t> g_kernel_evaluations{0};

void require(bool ok, const char* what) {
  if (!ok) throw ValidationError(what);
}

}  // namespace

SqExpKernel::SqExpKernel(double variance, double lengthscale)
    : variance_(variance), lengthscale_(lengthscale) {
  if (!(variance > 0.0) || !std::isfinite(variance)) {
    throw ValidationError("kernel variance must be positive and finite");
  }
  if (!(lengthscale > 0.0) || !std::isfinite(lengthscale)) {
    throw ValidationError("kernel lengthscale must be positive and finite");
  }
}

Eigen::MatrixXd sqexp(std::span<const double> points_a, std::span<const double> points_b,
                      const SqExpKernel& kernel) {
  const auto n = static_cast<Eigen::Index>(points_a.size());
  const auto m = static_cast<Eigen::Index>(points_b.size());
  const double inv_two_l2 = 0.5 / (kernel.lengthscale() * kernel.lengthscale());
  Eigen::MatrixXd out(n, m);
  for (Eigen::Index j = 0; j < m; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = points_a[i] - points_b[j];
      out(i, j) = kernel.variance() * std::exp(-r * r * inv_two_l2);
    }
  }
  g_kernel_evaluations.fetch_add(static_cast<std::uint64_t>(n * m), std::memory_order_relaxed);
  return out;
}

std::uint64_t kernel_evaluation_count() { return g_kernel_evaluations.load(); }
void reset_kernel_evaluation_count() { g_kernel_evaluations.store(0); }

Eigen::MatrixXd kron_mvprod(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B,
                            const Eigen::MatrixXd& V) {
  if (B.cols() != V.rows() || A.cols() != V.cols()) {
    std::ostringstream msg;
    msg << "kron_mvprod shape mismatch: A " << A.rows() << "x" << A.cols() << ", B " << B.rows()
        << "x" << B.cols() << ", V " << V.rows() << "x" << V.cols();
    throw ValidationError(msg.str());
  }
  return (A * (B * V).transpose()).transpose();
}

Eigen::MatrixXd kron(const Eigen::MatrixXd& A, const Eigen::MatrixXd& B) {
  Eigen::MatrixXd out(A.rows() * B.rows(), A.cols() * B.cols());
  for (Eigen::Index i = 0; i < A.rows(); ++i) {
    for (Eigen::Index j = 0; j < A.cols(); ++j) {
      out.block(i * B.rows(), j * B.cols(), B.rows(), B.cols()) = A(i, j) * B;
    }
  }
  return out;
}

Eigen::MatrixXd jittered_cholesky(const Eigen::MatrixXd& K, double jitter) {
  require(K.rows() == K.cols(), "cholesky needs a square matrix");
  Eigen::MatrixXd A = K;
  A.diagonal().array() += jitter;
  Eigen::LLT<Eigen::MatrixXd> llt(A);
  if (llt.info() != Eigen::Success || !llt.matrixL().toDenseMatrix().allFinite()) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(A, Eigen::EigenvaluesOnly);
    std::ostringstream msg;
    msg << "cholesky failed after jitter " << jitter << "; minimum eigenvalue estimate "
        << (eig.info() == Eigen::Success ? eig.eigenvalues().minCoeff() : std::nan(""));
    throw NumericalError(msg.str());
  }
  return llt.matrixL();
}

Eigen::MatrixXd cholesky_adjoint(const Eigen::MatrixXd& L, const Eigen::MatrixXd& L_bar) {
  // Phi(L^T Lbar): lower triangle with halved diagonal.
  Eigen::MatrixXd P = (L.transpose() * L_bar.triangularView<Eigen::Lower>()).eval();
  P = P.triangularView<Eigen::Lower>();
  P.diagonal() *= 0.5;
  const auto Lt = L.transpose().triangularView<Eigen::Upper>();
  // S = L^{-T} P L^{-1}
  Eigen::MatrixXd X = Lt.solve(P);
  Eigen::MatrixXd S = Lt.solve(X.transpose()).transpose();
  return 0.5 * (S + S.transpose());
}

KroneckerCov kronecker_cov(std::span<const double> row_points, std::span<const double> col_points,
                           const SqExpKernel& row_kernel, const SqExpKernel& col_kernel,
                           double jitter) {
  KroneckerCov cov;
  cov.jitter = jitter;
  cov.rows = sqexp(row_points, row_points, row_kernel);
  cov.cols = sqexp(col_points, col_points, col_kernel);
  cov.rows_chol = jittered_cholesky(cov.rows, jitter);
  cov.cols_chol = jittered_cholesky(cov.cols, jitter);
  cov.rows.diagonal().array() += jitter;
  cov.cols.diagonal().array() += jitter;
  return cov;
}

Eigen::MatrixXd sample_grid_gp(const Eigen::MatrixXd& rows_chol, const Eigen::MatrixXd& cols_chol,
                               const Eigen::MatrixXd& z) {
  if (z.rows() != rows_chol.cols() || z.cols() != cols_chol.cols()) {
    throw ValidationError("standard-normal matrix does not match the Cholesky factors");
  }
  return kron_mvprod(cols_chol, rows_chol, z);
}

Eigen::MatrixXd projected_kernel(const splines::BasisMatrix& basis_rows,
                                 const splines::BasisMatrix& basis_cols,
                                 const Eigen::MatrixXd& K_beta) {
  const auto M = basis_rows.values.rows() * basis_cols.values.rows();
  if (K_beta.rows() != M || K_beta.cols() != M) {
    std::ostringstream msg;
    msg << "K_beta must be " << M << "x" << M << ", got " << K_beta.rows() << "x"
        << K_beta.cols();
    throw ValidationError(msg.str());
  }
  const Eigen::MatrixXd projection = kron(basis_cols.values, basis_rows.values);  // M x nm
  return projection.transpose() * K_beta * projection;
}

}  // namespace splinegp::kernels
