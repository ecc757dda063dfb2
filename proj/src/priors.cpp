#include "splinegp/priors.hpp"

#include <cmath>
#include <numbers>
#include <sstream>

#include "splinegp/errors.hpp"

namespace splinegp::priors {

namespace {

constexpr double kHalfLogTwoPi = 0.91893853320467274178;

// Log density of a positive hyperparameter plus the log-Jacobian of its log
// transform, with the derivative of both with respect to the log.
struct LogHyper {
  double value;
  double d_log;
};

LogHyper half_cauchy_on_log(double x, double scale) {
  const double r = x / scale;
  return {std::log(2.0 / (std::numbers::pi * scale)) - std::log1p(r * r) + std::log(x),
          1.0 - 2.0 * r * r / (1.0 + r * r)};
}

LogHyper inv_gamma_on_log(double x, double shape, double scale) {
  return {shape * std::log(scale) - std::lgamma(shape) - shape * std::log(x) - scale / x,
          -shape + scale / x};
}

Eigen::MatrixXd squared_distances(const std::vector<double>& pts) {
  const auto n = static_cast<Eigen::Index>(pts.size());
  Eigen::MatrixXd d(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    for (Eigen::Index i = 0; i < n; ++i) {
      const double r = pts[i] - pts[j];
      d(i, j) = r * r;
    }
  }
  return d;
}

std::vector<double> index_coords(std::size_t count) {
  std::vector<double> out(count);
  for (std::size_t i = 0; i < count; ++i) out[i] = static_cast<double>(i + 1);
  return out;
}

void check_hyper(const HyperPriors& h) {
  if (!(h.lengthscale_shape > 0 && h.lengthscale_scale > 0 && h.magnitude_scale > 0 &&
        h.precision_scale > 0 && h.sum_to_zero_sd > 0 && h.level_sd > 0 && h.jitter >= 0)) {
    throw ValidationError("hyperprior constants must be positive");
  }
}

std::vector<HyperSpec> gp_spec(const HyperPriors& h) {
  std::ostringstream hc, ig;
  hc << "half-cauchy(0, " << h.magnitude_scale << ")";
  ig << "inv-gamma(" << h.lengthscale_shape << ", " << h.lengthscale_scale << ")";
  return {{"zeta", "positive", hc.str()},
          {"lengthscale_rows", "positive", ig.str()},
          {"lengthscale_cols", "positive", ig.str()}};
}

}  // namespace

std::string_view prior_kind_name(PriorKind kind) {
  switch (kind) {
    case PriorKind::Standard2DGP: return "gp2d";
    case PriorKind::StandardBSplines: return "bsplines";
    case PriorKind::BayesianPSplines: return "psplines";
    case PriorKind::ProjectedGP: return "projected-gp";
  }
  return "unknown";
}

PriorKind parse_prior_kind(std::string_view name) {
  for (auto k : {PriorKind::Standard2DGP, PriorKind::StandardBSplines, PriorKind::BayesianPSplines,
                 PriorKind::ProjectedGP}) {
    if (prior_kind_name(k) == name) return k;
  }
  throw ValidationError("unknown prior '" + std::string(name) +
                        "'; expected gp2d, bsplines, psplines or projected-gp");
}

GmrfGraph::GmrfGraph(std::size_t rows, std::size_t cols)
    : rows_(rows), cols_(cols), degrees_(rows * cols, 0) {
  if (rows == 0 || cols == 0) throw ValidationError("GMRF lattice must be non-empty");
  for (std::size_t j = 0; j < cols; ++j) {
    for (std::size_t i = 0; i < rows; ++i) {
      const std::size_t u = i + rows * j;
      if (i + 1 < rows) edges_.emplace_back(u, u + 1);
      if (j + 1 < cols) edges_.emplace_back(u, u + rows);
    }
  }
  for (auto [u, v] : edges_) {
    ++degrees_[u];
    ++degrees_[v];
  }
}

double GmrfGraph::pairwise_sum(std::span<const double> beta) const {
  if (beta.size() != node_count()) throw ValidationError("GMRF coefficient count mismatch");
  double s = 0.0;
  for (auto [u, v] : edges_) {
    const double d = beta[u] - beta[v];
    s += d * d;
  }
  return s;
}

double gmrf_pairwise_logdensity(const GmrfGraph& graph, std::span<const double> beta, double tau) {
  if (!(tau > 0.0)) throw ValidationError("GMRF tau must be positive");
  const double m = static_cast<double>(graph.node_count());
  return -graph.pairwise_sum(beta) / (2.0 * tau * tau) - (m - 1.0) * std::log(tau) -
         (m - 1.0) * kHalfLogTwoPi;
}

SurfacePrior SurfacePrior::standard_gp(std::vector<double> row_coords,
                                       std::vector<double> col_coords, HyperPriors hyper) {
  check_hyper(hyper);
  if (row_coords.empty() || col_coords.empty()) {
    throw ValidationError("GP surface needs non-empty coordinates");
  }
  SurfacePrior p;
  p.kind_ = PriorKind::Standard2DGP;
  p.hyper_ = hyper;
  p.hyper_spec_ = gp_spec(hyper);
  p.gp_rows_ = std::move(row_coords);
  p.gp_cols_ = std::move(col_coords);
  p.gp_rows_sqdist_ = squared_distances(p.gp_rows_);
  p.gp_cols_sqdist_ = squared_distances(p.gp_cols_);
  return p;
}

SurfacePrior SurfacePrior::bsplines(splines::BasisMatrix basis_rows, splines::BasisMatrix basis_cols,
                                    HyperPriors hyper) {
  check_hyper(hyper);
  SurfacePrior p;
  p.kind_ = PriorKind::StandardBSplines;
  p.hyper_ = hyper;
  p.basis_rows_ = std::move(basis_rows);
  p.basis_cols_ = std::move(basis_cols);
  return p;
}

SurfacePrior SurfacePrior::psplines(splines::BasisMatrix basis_rows, splines::BasisMatrix basis_cols,
                                    HyperPriors hyper) {
  check_hyper(hyper);
  SurfacePrior p;
  p.kind_ = PriorKind::BayesianPSplines;
  p.hyper_ = hyper;
  std::ostringstream hc, lv;
  hc << "half-cauchy(0, " << hyper.precision_scale << ")";
  lv << "normal(0, " << hyper.level_sd << ")";
  p.hyper_spec_ = {{"tau", "positive", hc.str()}, {"level", "real", lv.str()}};
  p.graph_.emplace(basis_rows.basis_count(), basis_cols.basis_count());
  p.basis_rows_ = std::move(basis_rows);
  p.basis_cols_ = std::move(basis_cols);
  return p;
}

SurfacePrior SurfacePrior::projected_gp(splines::BasisMatrix basis_rows,
                                        splines::BasisMatrix basis_cols, HyperPriors hyper) {
  check_hyper(hyper);
  SurfacePrior p;
  p.kind_ = PriorKind::ProjectedGP;
  p.hyper_ = hyper;
  p.hyper_spec_ = gp_spec(hyper);
  p.gp_rows_ = index_coords(basis_rows.basis_count());
  p.gp_cols_ = index_coords(basis_cols.basis_count());
  p.gp_rows_sqdist_ = squared_distances(p.gp_rows_);
  p.gp_cols_sqdist_ = squared_distances(p.gp_cols_);
  p.basis_rows_ = std::move(basis_rows);
  p.basis_cols_ = std::move(basis_cols);
  return p;
}

SurfacePrior SurfacePrior::spline_at_points(PriorKind kind, const splines::KnotVector& row_knots,
                                            const splines::KnotVector& col_knots,
                                            std::span<const double> xs, std::span<const double> ys,
                                            HyperPriors hyper) {
  check_hyper(hyper);
  if (kind == PriorKind::Standard2DGP) {
    throw ValidationError("the standard 2D GP is defined on grids only");
  }
  if (xs.size() != ys.size() || xs.empty()) {
    throw ValidationError("scattered points need matching, non-empty coordinate lists");
  }
  SurfacePrior p;
  p.kind_ = kind;
  p.hyper_ = hyper;
  p.point_coef_rows_ = row_knots.basis_count();
  p.point_coef_cols_ = col_knots.basis_count();
  p.point_rows_.reserve(xs.size());
  p.point_cols_.reserve(xs.size());
  for (std::size_t k = 0; k < xs.size(); ++k) {
    p.point_rows_.push_back(splines::local_basis(row_knots, xs[k]));
    p.point_cols_.push_back(splines::local_basis(col_knots, ys[k]));
  }
  if (kind == PriorKind::ProjectedGP) {
    p.hyper_spec_ = gp_spec(hyper);
    p.gp_rows_ = index_coords(p.point_coef_rows_);
    p.gp_cols_ = index_coords(p.point_coef_cols_);
    p.gp_rows_sqdist_ = squared_distances(p.gp_rows_);
    p.gp_cols_sqdist_ = squared_distances(p.gp_cols_);
  } else if (kind == PriorKind::BayesianPSplines) {
    std::ostringstream hc, lv;
    hc << "half-cauchy(0, " << hyper.precision_scale << ")";
    lv << "normal(0, " << hyper.level_sd << ")";
    p.hyper_spec_ = {{"tau", "positive", hc.str()}, {"level", "real", lv.str()}};
    p.graph_.emplace(p.point_coef_rows_, p.point_coef_cols_);
  }
  return p;
}

SurfacePrior SurfacePrior::make(PriorKind kind, std::span<const double> row_coords,
                                std::span<const double> col_coords, std::size_t knots_rows,
                                std::size_t knots_cols, HyperPriors hyper) {
  if (kind == PriorKind::Standard2DGP) {
    return standard_gp({row_coords.begin(), row_coords.end()}, {col_coords.begin(), col_coords.end()},
                       hyper);
  }
  auto br = splines::equispaced_basis(row_coords, knots_rows);
  auto bc = splines::equispaced_basis(col_coords, knots_cols);
  switch (kind) {
    case PriorKind::StandardBSplines: return bsplines(std::move(br), std::move(bc), hyper);
    case PriorKind::BayesianPSplines: return psplines(std::move(br), std::move(bc), hyper);
    default: return projected_gp(std::move(br), std::move(bc), hyper);
  }
}

std::size_t SurfacePrior::coefficient_rows() const {
  if (on_points()) return point_coef_rows_;
  if (basis_rows_) return basis_rows_->basis_count();
  return gp_rows_.size();
}

std::size_t SurfacePrior::coefficient_cols() const {
  if (on_points()) return point_coef_cols_;
  if (basis_cols_) return basis_cols_->basis_count();
  return gp_cols_.size();
}

std::size_t SurfacePrior::raw_dimension() const {
  return hyper_count() + coefficient_rows() * coefficient_cols();
}

Eigen::Index SurfacePrior::surface_rows() const {
  if (on_points()) return static_cast<Eigen::Index>(point_rows_.size());
  if (basis_rows_) return static_cast<Eigen::Index>(basis_rows_->grid_size());
  return static_cast<Eigen::Index>(gp_rows_.size());
}

Eigen::Index SurfacePrior::surface_cols() const {
  if (on_points()) return 1;
  if (basis_cols_) return static_cast<Eigen::Index>(basis_cols_->grid_size());
  return static_cast<Eigen::Index>(gp_cols_.size());
}

std::vector<std::string> SurfacePrior::parameter_names() const {
  std::vector<std::string> names;
  if (kind_ == PriorKind::Standard2DGP || kind_ == PriorKind::ProjectedGP) {
    names = {"log_zeta", "log_lengthscale_rows", "log_lengthscale_cols"};
  } else if (kind_ == PriorKind::BayesianPSplines) {
    names = {"log_tau", "level"};
  }
  const char* stem = (kind_ == PriorKind::Standard2DGP || kind_ == PriorKind::ProjectedGP) ? "z" : "beta";
  for (std::size_t j = 0; j < coefficient_cols(); ++j) {
    for (std::size_t i = 0; i < coefficient_rows(); ++i) {
      names.push_back(std::string(stem) + "[" + std::to_string(i + 1) + "," + std::to_string(j + 1) + "]");
    }
  }
  return names;
}

Eigen::MatrixXd SurfacePrior::project(const Eigen::MatrixXd& beta) const {
  if (!on_points()) return splines::tensor_surface(beta, *basis_rows_, *basis_cols_);
  Eigen::MatrixXd out(static_cast<Eigen::Index>(point_rows_.size()), 1);
  for (std::size_t k = 0; k < point_rows_.size(); ++k) {
    const auto& r = point_rows_[k];
    const auto& c = point_cols_[k];
    double s = 0.0;
    for (std::size_t b = 0; b < c.values.size(); ++b) {
      double inner = 0.0;
      for (std::size_t a = 0; a < r.values.size(); ++a) {
        inner += beta(static_cast<Eigen::Index>(r.first + a), static_cast<Eigen::Index>(c.first + b)) *
                 r.values[a];
      }
      s += inner * c.values[b];
    }
    out(static_cast<Eigen::Index>(k), 0) = s;
  }
  return out;
}

Eigen::MatrixXd SurfacePrior::project_adjoint(const Eigen::MatrixXd& d_surface) const {
  if (!on_points()) {
    return basis_rows_->values * d_surface * basis_cols_->values.transpose();
  }
  Eigen::MatrixXd d_beta = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(coefficient_rows()),
                                                 static_cast<Eigen::Index>(coefficient_cols()));
  for (std::size_t k = 0; k < point_rows_.size(); ++k) {
    const double g = d_surface(static_cast<Eigen::Index>(k), 0);
    if (g == 0.0) continue;
    const auto& r = point_rows_[k];
    const auto& c = point_cols_[k];
    for (std::size_t b = 0; b < c.values.size(); ++b) {
      const double gb = g * c.values[b];
      for (std::size_t a = 0; a < r.values.size(); ++a) {
        d_beta(static_cast<Eigen::Index>(r.first + a), static_cast<Eigen::Index>(c.first + b)) +=
            gb * r.values[a];
      }
    }
  }
  return d_beta;
}

void SurfacePrior::gp_forward(std::span<const double> raw, SurfaceEval& out) const {
  const double zeta = std::exp(raw[0]);
  const double l_rows = std::exp(raw[1]);
  const double l_cols = std::exp(raw[2]);
  if (!std::isfinite(zeta) || !std::isfinite(l_rows) || !std::isfinite(l_cols) || zeta == 0.0 ||
      l_rows == 0.0 || l_cols == 0.0 || !(zeta * zeta > 0.0) || !std::isfinite(zeta * zeta)) {
    throw NumericalError("GP hyperparameters overflowed");
  }
  const auto I = static_cast<Eigen::Index>(gp_rows_.size());
  const auto J = static_cast<Eigen::Index>(gp_cols_.size());
  out.latent = Eigen::Map<const Eigen::MatrixXd>(raw.data() + 3, I, J);
  // The magnitude lives on the row factor only, so the product has variance zeta^2.
  out.rows_cov = kernels::sqexp(gp_rows_, gp_rows_, kernels::SqExpKernel(zeta * zeta, l_rows));
  out.cols_cov = kernels::sqexp(gp_cols_, gp_cols_, kernels::SqExpKernel(1.0, l_cols));
  out.rows_chol = kernels::jittered_cholesky(out.rows_cov, hyper_.jitter);
  out.cols_chol = kernels::jittered_cholesky(out.cols_cov, hyper_.jitter);
  out.hypers = {zeta, l_rows, l_cols};

  const auto hz = half_cauchy_on_log(zeta, hyper_.magnitude_scale);
  const auto hr = inv_gamma_on_log(l_rows, hyper_.lengthscale_shape, hyper_.lengthscale_scale);
  const auto hc = inv_gamma_on_log(l_cols, hyper_.lengthscale_shape, hyper_.lengthscale_scale);
  out.log_prior = hz.value + hr.value + hc.value - 0.5 * out.latent.squaredNorm() -
                  static_cast<double>(I * J) * kHalfLogTwoPi;
}

void SurfacePrior::gp_backward(const SurfaceEval& eval, const Eigen::MatrixXd& d_out,
                               std::span<double> grad_raw) const {
  const double zeta = eval.hypers[0];
  const double l_rows = eval.hypers[1];
  const double l_cols = eval.hypers[2];
  const auto& L1 = eval.rows_chol;
  const auto& L2 = eval.cols_chol;
  const auto& Z = eval.latent;

  const Eigen::MatrixXd d_z = L1.transpose() * d_out * L2 - Z;
  const Eigen::MatrixXd d_L1 = d_out * L2 * Z.transpose();
  const Eigen::MatrixXd d_L2 = d_out.transpose() * (L1 * Z);
  const Eigen::MatrixXd K1_bar = kernels::cholesky_adjoint(L1, d_L1);
  const Eigen::MatrixXd K2_bar = kernels::cholesky_adjoint(L2, d_L2);

  const auto hz = half_cauchy_on_log(zeta, hyper_.magnitude_scale);
  const auto hr = inv_gamma_on_log(l_rows, hyper_.lengthscale_shape, hyper_.lengthscale_scale);
  const auto hc = inv_gamma_on_log(l_cols, hyper_.lengthscale_shape, hyper_.lengthscale_scale);

  // dK/dlog zeta = 2K; dK/dlog l = K .* r^2 / l^2.
  grad_raw[0] += hz.d_log + 2.0 * (K1_bar.array() * eval.rows_cov.array()).sum();
  grad_raw[1] += hr.d_log + (K1_bar.array() * eval.rows_cov.array() * gp_rows_sqdist_.array()).sum() /
                                (l_rows * l_rows);
  grad_raw[2] += hc.d_log + (K2_bar.array() * eval.cols_cov.array() * gp_cols_sqdist_.array()).sum() /
                                (l_cols * l_cols);
  Eigen::Map<Eigen::MatrixXd>(grad_raw.data() + 3, Z.rows(), Z.cols()) += d_z;
}

SurfaceEval SurfacePrior::evaluate(std::span<const double> raw) const {
  if (raw.size() != raw_dimension()) {
    std::ostringstream msg;
    msg << "surface prior expects " << raw_dimension() << " parameters, got " << raw.size();
    throw ValidationError(msg.str());
  }
  SurfaceEval out;
  const auto I = static_cast<Eigen::Index>(coefficient_rows());
  const auto J = static_cast<Eigen::Index>(coefficient_cols());
  switch (kind_) {
    case PriorKind::Standard2DGP:
      gp_forward(raw, out);
      out.surface = kernels::sample_grid_gp(out.rows_chol, out.cols_chol, out.latent);
      break;
    case PriorKind::ProjectedGP:
      gp_forward(raw, out);
      out.beta = kernels::sample_grid_gp(out.rows_chol, out.cols_chol, out.latent);
      out.surface = project(out.beta);
      break;
    case PriorKind::StandardBSplines:
      out.beta = Eigen::Map<const Eigen::MatrixXd>(raw.data(), I, J);
      out.latent = out.beta;
      out.log_prior = -0.5 * out.beta.squaredNorm() - static_cast<double>(I * J) * kHalfLogTwoPi;
      out.surface = project(out.beta);
      break;
    case PriorKind::BayesianPSplines: {
      const double tau = std::exp(raw[0]);
      if (!(tau > 0.0) || !std::isfinite(tau)) throw NumericalError("P-spline tau overflowed");
      const double level = raw[1];
      out.beta = Eigen::Map<const Eigen::MatrixXd>(raw.data() + 2, I, J);
      out.latent = out.beta;
      out.hypers = {tau, level};
      const double mean = out.beta.mean();
      const double s0 = hyper_.sum_to_zero_sd;
      out.log_prior = gmrf_pairwise_logdensity(*graph_, raw.subspan(2), tau) +
                      half_cauchy_on_log(tau, hyper_.precision_scale).value -
                      0.5 * mean * mean / (s0 * s0) - std::log(s0) - kHalfLogTwoPi -
                      0.5 * level * level / (hyper_.level_sd * hyper_.level_sd) -
                      std::log(hyper_.level_sd) - kHalfLogTwoPi;
      out.surface = project(out.beta).array() + level;
      break;
    }
  }
  return out;
}

void SurfacePrior::backprop(const SurfaceEval& eval, const Eigen::MatrixXd& d_surface,
                            std::span<double> grad_raw) const {
  if (grad_raw.size() != raw_dimension()) throw ValidationError("gradient buffer size mismatch");
  if (d_surface.rows() != eval.surface.rows() || d_surface.cols() != eval.surface.cols()) {
    throw ValidationError("surface adjoint shape mismatch");
  }
  const auto I = static_cast<Eigen::Index>(coefficient_rows());
  const auto J = static_cast<Eigen::Index>(coefficient_cols());
  switch (kind_) {
    case PriorKind::Standard2DGP:
      gp_backward(eval, d_surface, grad_raw);
      break;
    case PriorKind::ProjectedGP:
      gp_backward(eval, project_adjoint(d_surface), grad_raw);
      break;
    case PriorKind::StandardBSplines:
      Eigen::Map<Eigen::MatrixXd>(grad_raw.data(), I, J) += project_adjoint(d_surface) - eval.beta;
      break;
    case PriorKind::BayesianPSplines: {
      const double tau = eval.hypers[0];
      const double level = eval.hypers[1];
      const double s0 = hyper_.sum_to_zero_sd;
      const double m = static_cast<double>(I * J);
      std::span<const double> beta(eval.beta.data(), static_cast<std::size_t>(eval.beta.size()));
      Eigen::MatrixXd d_beta = project_adjoint(d_surface);
      d_beta.array() -= eval.beta.mean() / (s0 * s0 * m);
      const double inv_t2 = 1.0 / (tau * tau);
      for (auto [u, v] : graph_->edges()) {
        const double diff = (beta[u] - beta[v]) * inv_t2;
        d_beta.data()[u] -= diff;
        d_beta.data()[v] += diff;
      }
      grad_raw[0] += graph_->pairwise_sum(beta) * inv_t2 - (m - 1.0) +
                     half_cauchy_on_log(tau, hyper_.precision_scale).d_log;
      grad_raw[1] += d_surface.sum() - level / (hyper_.level_sd * hyper_.level_sd);
      Eigen::Map<Eigen::MatrixXd>(grad_raw.data() + 2, I, J) += d_beta;
      break;
    }
  }
}

PenaltyTerms penalty_decomposition(const SurfacePrior& prior, std::span<const double> f_vec,
                                   const Eigen::MatrixXd& K_beta) {
  if (prior.kind() != PriorKind::ProjectedGP || prior.on_points()) {
    throw ValidationError("penalty decomposition needs a grid projected-GP prior");
  }
  const auto& br = *prior.basis_rows();
  const auto& bc = *prior.basis_cols();
  const auto ij = static_cast<Eigen::Index>(br.basis_count() * bc.basis_count());
  const auto nm = static_cast<Eigen::Index>(br.grid_size() * bc.grid_size());
  if (K_beta.rows() != ij || K_beta.cols() != ij) {
    throw ValidationError("K_beta must be (I*J) x (I*J)");
  }
  if (static_cast<Eigen::Index>(f_vec.size()) != nm) {
    throw ValidationError("f_vec must hold n*m surface values");
  }
  // vec(f) = P^T vec(beta); for full-column-rank P^T the pseudo-inverse of
  // P^T K P reduces the quadratic form to beta_ls^T K^{-1} beta_ls.
  const Eigen::MatrixXd Pt = kernels::kron(bc.values, br.values).transpose();
  const Eigen::Map<const Eigen::VectorXd> f(f_vec.data(), nm);
  Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(Pt);
  if (qr.rank() < ij) throw NumericalError("projection is rank deficient; more knots than grid points");
  const Eigen::VectorXd beta_ls = qr.solve(f);
  Eigen::LLT<Eigen::MatrixXd> llt(K_beta);
  if (llt.info() != Eigen::Success) throw NumericalError("K_beta is not positive definite");
  PenaltyTerms out;
  out.data_fit = beta_ls.dot(llt.solve(beta_ls));
  const Eigen::MatrixXd L = llt.matrixL();
  out.penalty = 2.0 * L.diagonal().array().log().sum();
  return out;
}

}  // namespace splinegp::priors
