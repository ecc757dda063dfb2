#include <doctest.h>

#include <cmath>

#include "splinegp/errors.hpp"
#include "splinegp/likelihoods.hpp"
#include "support.hpp"

using namespace splinegp;
using namespace splinegp::likelihoods;

TEST_CASE("negative binomial pmf sums to one and has the stated moments") {
  const double a = 3.7, t = 0.3;
  double total = 0.0, m1 = 0.0, m2 = 0.0;
  for (int d = 0; d < 2000; ++d) {
    const double p = std::exp(negbin_logpmf(d, a, t));
    total += p;
    m1 += d * p;
    m2 += static_cast<double>(d) * d * p;
  }
  NegBinShapeScale nb(a, t);
  CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(m1 == doctest::Approx(nb.mean()).epsilon(1e-10));
  CHECK(m2 - m1 * m1 == doctest::Approx(nb.variance()).epsilon(1e-9));
}

TEST_CASE("mean parameterisation recovers the mean") {
  auto nb = NegBinShapeScale::from_mean(42.0, 0.8);
  CHECK(nb.mean() == doctest::Approx(42.0));
  CHECK(nb.variance() == doctest::Approx(42.0 * 1.8));
  CHECK_THROWS_AS(NegBinShapeScale(-1.0, 0.5), ValidationError);
  CHECK_THROWS_AS(NegBinShapeScale(1.0, 1.0), ValidationError);
}

TEST_CASE("log cdf agrees with a direct pmf sum") {
  for (double a : {0.05, 2.5, 40.0}) {
    for (double t : {0.1, 0.4, 0.9}) {
      for (int d : {0, 7, 30}) {
        double s = 0.0;
        for (int k = 0; k <= d; ++k) s += std::exp(negbin_logpmf(k, a, t));
        CHECK(negbin_logcdf(d, a, t) == doctest::Approx(std::log(s)).epsilon(1e-11));
      }
    }
  }
  // Past the recursive regime the incomplete beta takes over.
  double s = 0.0;
  for (int k = 0; k <= 5000; ++k) s += std::exp(negbin_logpmf(k, 3000.0, 0.6));
  CHECK(negbin_logcdf(5000, 3000.0, 0.6) == doctest::Approx(std::log(s)).epsilon(1e-9));
}

TEST_CASE("sum of independent shape-scale variables adds shapes") {
  const double a1 = 1.3, a2 = 2.2, t = 0.45;
  for (int s = 0; s < 25; ++s) {
    double conv = 0.0;
    for (int k = 0; k <= s; ++k) conv += std::exp(negbin_logpmf(k, a1, t) + negbin_logpmf(s - k, a2, t));
    CHECK(std::exp(negbin_logpmf(s, a1 + a2, t)) == doctest::Approx(conv).epsilon(1e-12));
  }
}

TEST_CASE("pmf gradient matches finite differences") {
  for (int d : {0, 3, 17, 250}) {
    const std::vector<double> x{2.7, 0.35};
    auto g = negbin_logpmf_grad(d, x[0], x[1]);
    auto f = [d](const std::vector<double>& v) { return negbin_logpmf(d, v[0], v[1]); };
    CHECK(testsupport::max_relative_gradient_error(f, x, {g.d_first, g.d_second}, 1e-4) < 1e-7);
    CHECK(g.value == doctest::Approx(negbin_logpmf(d, x[0], x[1])));
  }
}

TEST_CASE("censored bounds by scenario") {
  auto e = CensoredSumBound::exact(11);
  CHECK(e.lower == 11);
  CHECK(e.upper == 11);
  auto i = CensoredSumBound::interval_with_observed_end(11);
  CHECK(i.lower == 2);
  CHECK(i.upper == 10);
  auto t = CensoredSumBound::trailing_censored();
  CHECK(t.lower == 1);
  CHECK(t.upper == 9);
  auto a = CensoredSumBound::all_censored();
  CHECK(a.lower == 0);
  CHECK(a.upper == 8);
  CensoredSumBound bad{CensorScenario::AllCensored, 3, 1};
  CHECK_THROWS_AS(bad.validate(), ValidationError);
}

TEST_CASE("censored block likelihood is a window probability with consistent gradient") {
  const auto bound = CensoredSumBound::interval_with_observed_end(25);
  const double a = 4.2, t = 0.7;
  double p = 0.0;
  for (int k = 16; k <= 24; ++k) p += std::exp(negbin_logpmf(k, a, t));
  CHECK(censored_block_loglik(bound, a, t) == doctest::Approx(std::log(p)).epsilon(1e-12));
  const double via_cdf = std::log(std::exp(negbin_logcdf(24, a, t)) - std::exp(negbin_logcdf(15, a, t)));
  CHECK(censored_block_loglik(bound, a, t) == doctest::Approx(via_cdf).epsilon(1e-10));
  auto g = censored_block_loglik_grad(bound, a, t);
  auto f = [&](const std::vector<double>& v) { return censored_block_loglik(bound, v[0], v[1]); };
  CHECK(testsupport::max_relative_gradient_error(f, {a, t}, {g.d_first, g.d_second}, 1e-4) < 1e-7);
  CHECK_THROWS_AS(censored_block_loglik(bound, 0.0, t), ValidationError);
}

TEST_CASE("gaussian log likelihood") {
  CHECK(gaussian_loglik(1.0, 0.0, 1.0) == doctest::Approx(-1.4189385332046727));
  auto g = gaussian_loglik_grad(1.3, 0.2, 0.7);
  auto f = [](const std::vector<double>& v) { return gaussian_loglik(1.3, v[0], v[1]); };
  CHECK(testsupport::max_relative_gradient_error(f, {0.2, 0.7}, {g.d_first, g.d_second}) < 1e-8);
  CHECK_THROWS_AS(gaussian_loglik(0.0, 0.0, -1.0), ValidationError);
}
