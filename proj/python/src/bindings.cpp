// Python bindings for the numerical building blocks and the command-line entry point.

#include <pybind11/eigen.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <iostream>
#include <random>
#include <sstream>

#include "splinegp/cli.hpp"
#include "splinegp/data.hpp"
#include "splinegp/errors.hpp"
#include "splinegp/kernels.hpp"
#include "splinegp/likelihoods.hpp"
#include "splinegp/mortality.hpp"
#include "splinegp/splines.hpp"

namespace py = pybind11;
using namespace splinegp;

namespace {

data::CumulativeValue to_cumulative(const py::handle& v) {
  if (v.is_none()) return data::CumulativeValue::censored();
  if (py::isinstance<py::str>(v)) {
    if (v.cast<std::string>() == "missing") return data::CumulativeValue::missing();
    throw ValidationError("cumulative values are ints, None (censored) or \"missing\"");
  }
  return data::CumulativeValue::observed(v.cast<std::int64_t>());
}

likelihoods::CensoredSumBound make_bound(const std::string& scenario, std::int64_t first_uncensored) {
  if (scenario == "exact") return likelihoods::CensoredSumBound::exact(first_uncensored);
  if (scenario == "observed-end") return likelihoods::CensoredSumBound::interval_with_observed_end(first_uncensored);
  if (scenario == "trailing") return likelihoods::CensoredSumBound::trailing_censored();
  if (scenario == "all") return likelihoods::CensoredSumBound::all_censored();
  throw ValidationError("scenario must be exact, observed-end, trailing or all");
}

}  // namespace

PYBIND11_MODULE(_core, m) {
  m.doc() = "B-spline projected Gaussian process surfaces: numerical core";

  py::register_exception<ValidationError>(m, "ValidationError", PyExc_ValueError);
  py::register_exception<DataError>(m, "DataError", PyExc_ValueError);
  py::register_exception<NumericalError>(m, "NumericalError", PyExc_ArithmeticError);

  m.def(
      "bspline_basis",
      [](const std::vector<double>& knots, const std::vector<double>& grid, int degree) {
        return splines::eval_basis(splines::KnotVector(knots, degree), grid).values;
      },
      py::arg("knots"), py::arg("grid"), py::arg("degree") = 3,
      "Basis values, one row per basis function, on boundary-padded interior knots.");

  m.def(
      "equispaced_basis",
      [](const std::vector<double>& grid, std::size_t knot_count, int degree) {
        return splines::equispaced_basis(grid, knot_count, degree).values;
      },
      py::arg("grid"), py::arg("knot_count"), py::arg("degree") = 3);

  m.def("kron_mvprod", &kernels::kron_mvprod, py::arg("A"), py::arg("B"), py::arg("V"),
        "(A kron B) vec(V) reshaped, computed as B V A^T.");

  m.def(
      "projected_kernel",
      [](const Eigen::MatrixXd& basis_rows, const Eigen::MatrixXd& basis_cols, const Eigen::MatrixXd& K_beta) {
        // Only the values are used; the knot vectors are placeholders.
        const splines::KnotVector dummy({0.0, 1.0}, 0);
        return kernels::projected_kernel({basis_rows, {}, dummy}, {basis_cols, {}, dummy}, K_beta);
      },
      py::arg("basis_rows"), py::arg("basis_cols"), py::arg("K_beta"));

  m.def("negbin_logpmf", &likelihoods::negbin_logpmf, py::arg("d"), py::arg("shape"), py::arg("scale"));

  m.def(
      "censored_block_loglik",
      [](const std::string& scenario, std::int64_t first_uncensored, double shape_sum, double scale) {
        return likelihoods::censored_block_loglik(make_bound(scenario, first_uncensored), shape_sum, scale);
      },
      py::arg("scenario"), py::arg("first_uncensored") = 0, py::arg("shape_sum"), py::arg("scale"));

  m.def(
      "difference_weekly",
      [](const py::sequence& cumulative) {
        std::vector<data::CumulativeValue> values;
        for (const auto& v : cumulative) values.push_back(to_cumulative(v));
        const auto s = data::difference_weekly(values);
        py::dict out;
        out["retrievable"] = s.retrievable;
        out["missing_weeks"] = s.missing_weeks;
        if (s.block) {
          out["block_weeks"] = s.block->weeks;
          out["block_bounds"] = std::make_pair(s.block->bound.lower, s.block->bound.upper);
          out["scenario"] = std::string(likelihoods::scenario_name(s.block->bound.scenario));
        } else {
          out["block_weeks"] = py::list();
          out["block_bounds"] = py::none();
          out["scenario"] = py::none();
        }
        return out;
      },
      py::arg("cumulative"),
      "Weekly deaths from cumulative reports: ints, None for censored, \"missing\" for absent.");

  m.def(
      "sample_dirichlet_multinomial",
      [](std::int64_t total, const std::vector<double>& alpha, std::uint64_t seed, int draws) {
        std::mt19937_64 rng(seed);
        Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic> out(draws, static_cast<Eigen::Index>(alpha.size()));
        for (int d = 0; d < draws; ++d) {
          const auto x = mortality::sample_dirichlet_multinomial(total, alpha, rng);
          for (std::size_t k = 0; k < x.size(); ++k) out(d, static_cast<Eigen::Index>(k)) = x[k];
        }
        return out;
      },
      py::arg("total"), py::arg("alpha"), py::arg("seed") = 1, py::arg("draws") = 1);

  m.def(
      "dirichlet_multinomial_logpmf",
      [](const std::vector<std::int64_t>& counts, const std::vector<double>& alpha) {
        return mortality::dirichlet_multinomial_logpmf(counts, alpha);
      },
      py::arg("counts"), py::arg("alpha"));

  m.def(
      "run_cli",
      [](const std::vector<std::string>& args) {
        std::vector<std::string> full{"splinegp"};
        full.insert(full.end(), args.begin(), args.end());
        std::ostringstream out, err;
        int code;
        {
          py::gil_scoped_release release;
          code = cli::run(full, out, err);
        }
        return py::make_tuple(code, out.str(), err.str());
      },
      py::arg("args"), "Runs a subcommand; returns (exit code, stdout, stderr).");
}
