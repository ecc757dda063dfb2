#include "splinegp/splines.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "splinegp/errors.hpp"

namespace splinegp::splines {

namespace {

std::vector<double> pad_boundaries(const std::vector<double>& interior, int degree) {
  std::vector<double> out;
  out.reserve(interior.size() + 2 * static_cast<std::size_t>(degree));
  out.insert(out.end(), static_cast<std::size_t>(degree), interior.front());
  out.insert(out.end(), interior.begin(), interior.end());
  out.insert(out.end(), static_cast<std::size_t>(degree), interior.back());
  return out;
}

// Cox-de Boor on the padded sequence. Returns the basis_count values of the
// top-order functions at x. Zero-width spans contribute nothing.
std::vector<double> cox_de_boor(const KnotVector& knots, double x) {
  const auto& xi = knots.extended();
  const std::size_t span_count = xi.size() - 1;
  std::vector<double> level(span_count, 0.0);
  for (std::size_t k = 0; k < span_count; ++k) {
    level[k] = (xi[k] <= x && x < xi[k + 1]) ? 1.0 : 0.0;
  }
  for (int order = 2; order <= knots.degree() + 1; ++order) {
    const std::size_t count = xi.size() - static_cast<std::size_t>(order);
    std::vector<double> next(count, 0.0);
    for (std::size_t k = 0; k < count; ++k) {
      double left = 0.0;
      double right = 0.0;
      const double left_width = xi[k + order - 1] - xi[k];
      const double right_width = xi[k + order] - xi[k + 1];
      if (left_width > 0.0) left = (x - xi[k]) / left_width * level[k];
      if (right_width > 0.0) right = (xi[k + order] - x) / right_width * level[k + 1];
      next[k] = left + right;
    }
    level = std::move(next);
  }
  level.resize(knots.basis_count());
  if (x == knots.upper()) level.back() = 1.0;
  return level;
}

void check_in_domain(const KnotVector& knots, double x) {
  if (!(x >= knots.lower() && x <= knots.upper())) {
    std::ostringstream msg;
    msg << "grid point " << x << " outside knot span [" << knots.lower() << ", " << knots.upper()
        << "]";
    throw ValidationError(msg.str());
  }
}

}  // namespace

KnotVector::KnotVector(std::vector<double> interior, int degree)
    : interior_(std::move(interior)), degree_(degree) {
  if (degree_ < 0) throw ValidationError("spline degree must be non-negative");
  if (interior_.size() < 2) throw ValidationError("need at least two interior knots");
  for (std::size_t i = 1; i < interior_.size(); ++i) {
    if (!(interior_[i] > interior_[i - 1])) {
      std::ostringstream msg;
      msg << "interior knots must be strictly increasing (position " << i << ")";
      throw ValidationError(msg.str());
    }
  }
  extended_ = pad_boundaries(interior_, degree_);
}

KnotVector extend_knots(std::span<const double> interior, int degree) {
  return KnotVector(std::vector<double>(interior.begin(), interior.end()), degree);
}

KnotVector equispaced_knots(double lo, double hi, std::size_t count, int degree) {
  if (count < 2) throw ValidationError("need at least two knots");
  if (!(hi > lo)) throw ValidationError("knot range must have positive width");
  std::vector<double> knots(count);
  for (std::size_t i = 0; i < count; ++i) {
    knots[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(count - 1);
  }
  knots.back() = hi;
  return KnotVector(std::move(knots), degree);
}

BasisMatrix eval_basis(const KnotVector& knots, std::span<const double> grid) {
  BasisMatrix out{Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(knots.basis_count()),
                                        static_cast<Eigen::Index>(grid.size())),
                  std::vector<double>(grid.begin(), grid.end()), knots};
  for (std::size_t j = 0; j < grid.size(); ++j) {
    check_in_domain(knots, grid[j]);
    const auto column = cox_de_boor(knots, grid[j]);
    for (std::size_t i = 0; i < column.size(); ++i) {
      out.values(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = column[i];
    }
  }
  return out;
}

BasisMatrix equispaced_basis(std::span<const double> grid, std::size_t knot_count, int degree) {
  if (grid.empty()) throw ValidationError("empty grid");
  const auto [lo, hi] = std::minmax_element(grid.begin(), grid.end());
  return eval_basis(equispaced_knots(*lo, *hi, knot_count, degree), grid);
}

LocalBasis local_basis(const KnotVector& knots, double x) {
  check_in_domain(knots, x);
  const auto column = cox_de_boor(knots, x);
  LocalBasis out;
  auto first = std::find_if(column.begin(), column.end(), [](double v) { return v != 0.0; });
  auto last = std::find_if(column.rbegin(), column.rend(), [](double v) { return v != 0.0; });
  if (first == column.end()) return out;
  out.first = static_cast<std::size_t>(first - column.begin());
  out.values.assign(first, last.base());
  return out;
}

Eigen::MatrixXd tensor_surface(const Eigen::MatrixXd& beta, const BasisMatrix& basis_rows,
                               const BasisMatrix& basis_cols) {
  if (beta.rows() != basis_rows.values.rows() || beta.cols() != basis_cols.values.rows()) {
    std::ostringstream msg;
    msg << "coefficient matrix is " << beta.rows() << "x" << beta.cols() << " but bases have "
        << basis_rows.values.rows() << " and " << basis_cols.values.rows() << " functions";
    throw ValidationError(msg.str());
  }
  return basis_rows.values.transpose() * beta * basis_cols.values;
}

}  // namespace splinegp::splines
