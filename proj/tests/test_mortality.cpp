#include <doctest.h>

#include <boost/math/distributions/gamma.hpp>
#include <cmath>
#include <map>

#include "mortality_fixtures.hpp"
#include "splinegp/errors.hpp"
#include "splinegp/likelihoods.hpp"
#include "splinegp/mortality.hpp"
#include "support.hpp"

using namespace splinegp;
using namespace splinegp::mortality;

TEST_CASE("standard grid has eleven bands over 106 ages") {
  auto g = AgeGrid::standard(10);
  CHECK(g.ages() == 106);
  CHECK(g.band_count() == 11);
  CHECK(g.band_of(0) == 0);
  CHECK(g.band_of(4) == 1);
  CHECK(g.band_of(105) == 10);
  CHECK_THROWS_AS(AgeGrid::from_labels({"0-10", "12+"}, 3), ValidationError);
  CHECK_THROWS_AS(parse_band("abc"), DataError);
}

TEST_CASE("softmax composition") {
  Eigen::MatrixXd f = Eigen::MatrixXd::Constant(106, 3, 0.7);
  auto pi = composition_from_surface(f);
  CHECK(pi(5, 1) == doctest::Approx(1.0 / 106));
  Eigen::MatrixXd g = Eigen::MatrixXd::Random(4, 2);
  auto p = composition_from_surface(g);
  for (int w = 0; w < 2; ++w) {
    double z = 0;
    for (int a = 0; a < 4; ++a) z += std::exp(g(a, w));
    for (int a = 0; a < 4; ++a) CHECK(p(a, w) == doctest::Approx(std::exp(g(a, w)) / z).epsilon(1e-14));
  }
  Eigen::MatrixXd shifted = g;
  shifted.col(1).array() += 50.0;
  CHECK((composition_from_surface(shifted) - p).norm() < 1e-14);
  g(0, 0) = std::nan("");
  CHECK_THROWS_AS(composition_from_surface(g), NumericalError);
}

TEST_CASE("band aggregation") {
  auto grid = AgeGrid::from_labels({"0", "1-2", "3-4"}, 2, 4);
  Eigen::MatrixXd f = Eigen::MatrixXd::Random(5, 2);
  auto pi = composition_from_surface(f);
  const std::vector<double> lambda{10.0, 3.0};
  auto mu = expected_band_deaths(lambda, pi, grid);
  for (int w = 0; w < 2; ++w) {
    CHECK(mu(0, w) == doctest::Approx(lambda[w] * pi(0, w)));
    CHECK(mu(1, w) == doctest::Approx(lambda[w] * (pi(1, w) + pi(2, w))));
    CHECK(mu(2, w) == doctest::Approx(lambda[w] * (pi(3, w) + pi(4, w))));
    CHECK(mu.col(w).sum() == doctest::Approx(lambda[w]).epsilon(1e-14));
  }
  auto one = AgeGrid::from_labels({"0-4"}, 2, 4);
  auto mu1 = expected_band_deaths(lambda, pi, one);
  CHECK(mu1(0, 1) == doctest::Approx(3.0));
  const std::vector<double> zero{0.0, 0.0};
  CHECK(expected_band_deaths(zero, pi, grid).norm() == 0.0);
  const std::vector<double> neg{-1.0, 0.0};
  CHECK_THROWS_AS(expected_band_deaths(neg, pi, grid), ValidationError);
}

TEST_CASE("single observation posterior equals the hand-assembled sum") {
  using data::CumulativeValue;
  auto grid = AgeGrid::from_labels({"0-5"}, 1, 5);
  auto series = data::difference_weekly(
      std::vector<CumulativeValue>{CumulativeValue::observed(10), CumulativeValue::observed(27)}, "0-5");
  TotalsPrior totals;
  totals.mean = {17.0};
  totals.eta = 3.0;
  std::vector<double> rows{0, 0.2, 0.4, 0.6, 0.8, 1.0}, cols{0.0};
  auto prior = priors::SurfacePrior::standard_gp(rows, cols);
  MortalityModel model(grid, {series}, prior, totals);
  auto raw = testsupport::normal_vector(model.dimension(), 17, 0.3);
  std::vector<double> grad(raw.size());
  const double lp = model.log_density_gradient(raw, grad);

  const double lambda = 17.0 * std::exp(raw[0]);
  const double s = std::exp(raw[1]);
  const double nu = 1.0 / (s * s);
  const double sd = 0.5 * 17.0 / 3.0;
  boost::math::gamma_distribution<> gam(17.0 * 17.0 / (sd * sd), sd * sd / 17.0);
  const double expect = likelihoods::negbin_logpmf(17, lambda / nu, nu / (1 + nu)) +
                        std::log(boost::math::pdf(gam, lambda)) + std::log(lambda) +
                        std::log(2.0) - 0.5 * std::log(2 * M_PI) - 0.5 * s * s + raw[1] +
                        prior.evaluate(std::span<const double>(raw).subspan(2)).log_prior;
  CHECK(lp == doctest::Approx(expect).epsilon(1e-11));
}

TEST_CASE("exact-sum block enters as one pmf term with summed shapes") {
  auto model = testsupport::toy_mortality_model(priors::PriorKind::StandardBSplines);
  auto raw = testsupport::normal_vector(model.dimension(), 4, 0.3);
  auto st = model.transform(raw);
  const double nu = st.nu, theta = nu / (1 + nu);
  double expect = 0.0;
  // band 0 retrievable weeks 1..4
  const std::vector<int> d0{4, 7, 9, 3};
  for (int w = 0; w < 4; ++w) expect += likelihoods::negbin_logpmf(d0[w], st.mu_band(0, w) / nu, theta);
  // band 1: weeks 1..3 sum to 12, week 4 retrievable = 7
  const double a_block = (st.mu_band(1, 0) + st.mu_band(1, 1) + st.mu_band(1, 2)) / nu;
  expect += likelihoods::negbin_logpmf(12, a_block, theta);
  expect += likelihoods::negbin_logpmf(7, st.mu_band(1, 3) / nu, theta);
  // band 2: weeks 2 and 3 missing
  expect += likelihoods::negbin_logpmf(15, st.mu_band(2, 0) / nu, theta);
  expect += likelihoods::negbin_logpmf(11, st.mu_band(2, 3) / nu, theta);
  CHECK(model.log_likelihood(st) == doctest::Approx(expect).epsilon(1e-12));
}

TEST_CASE("likelihood ignores per-week shifts of the surface") {
  auto model = testsupport::toy_mortality_model(priors::PriorKind::ProjectedGP);
  auto raw = testsupport::normal_vector(model.dimension(), 8, 0.4);
  auto st = model.transform(raw);
  auto shifted = st;
  Eigen::MatrixXd f = st.surface.surface;
  for (int w = 0; w < f.cols(); ++w) f.col(w).array() += 3.0 * (w + 1);
  shifted.pi = composition_from_surface(f);
  shifted.mu_band = expected_band_deaths(shifted.lambda, shifted.pi, model.grid());
  CHECK(model.log_likelihood(shifted) == doctest::Approx(model.log_likelihood(st)).epsilon(1e-13));
}

TEST_CASE("posterior gradient matches finite differences for every prior") {
  for (auto kind : {priors::PriorKind::Standard2DGP, priors::PriorKind::StandardBSplines,
                    priors::PriorKind::BayesianPSplines, priors::PriorKind::ProjectedGP}) {
    CAPTURE(priors::prior_kind_name(kind));
    auto model = testsupport::toy_mortality_model(kind);
    for (std::uint64_t seed = 0; seed < 3; ++seed) {
      auto raw = testsupport::normal_vector(model.dimension(), 100 + seed, 0.5);
      std::vector<double> grad(raw.size());
      model.log_density_gradient(raw, grad);
      auto f = [&](const std::vector<double>& x) {
        std::vector<double> g(x.size());
        return model.log_density_gradient(x, g);
      };
      CHECK(testsupport::max_relative_gradient_error(f, raw, grad, 1e-3) < 1e-6);
    }
  }
}

TEST_CASE("week partitions must agree with the model") {
  using data::CumulativeValue;
  auto grid = AgeGrid::from_labels({"0-5"}, 2, 5);
  auto s = data::difference_weekly(std::vector<CumulativeValue>{
      CumulativeValue::observed(10), CumulativeValue::observed(20), CumulativeValue::observed(25)});
  auto bad = s;
  bad.retrievable.pop_back();
  TotalsPrior totals;
  totals.mean = {10.0, 5.0};
  totals.eta = 2.0;
  auto prior = make_surface_prior(priors::PriorKind::StandardBSplines, grid, 3, 2);
  CHECK_NOTHROW(MortalityModel(grid, {s}, prior, totals));
  CHECK_THROWS_AS(MortalityModel(grid, {bad}, prior, totals), ValidationError);
}

TEST_CASE("Dirichlet-Multinomial sampling") {
  std::mt19937_64 rng(3);
  const std::vector<double> one{2.5};
  CHECK(sample_dirichlet_multinomial(17, one, rng)[0] == 17);
  const std::vector<double> two{1.5, 1.5};
  const int n = 20000;
  double m0 = 0.0, v0 = 0.0;
  for (int i = 0; i < n; ++i) {
    auto x = sample_dirichlet_multinomial(10, two, rng);
    CHECK(x[0] + x[1] == 10);
    m0 += x[0];
    v0 += static_cast<double>(x[0]) * x[0];
  }
  m0 /= n;
  v0 = v0 / n - m0 * m0;
  CHECK(std::abs(m0 - 5.0) < 3.0 * std::sqrt(v0 / n));
}

TEST_CASE("Dirichlet-Multinomial pmf equals the Negative-Binomial conditional") {
  const std::vector<double> alpha{0.7, 2.0, 4.5};
  const double theta = 0.37;
  double total_mass = 0.0;
  for (std::int64_t i = 0; i <= 6; ++i) {
    for (std::int64_t j = 0; i + j <= 6; ++j) {
      const std::vector<std::int64_t> x{i, j, 6 - i - j};
      double lp = -likelihoods::negbin_logpmf(6, alpha[0] + alpha[1] + alpha[2], theta);
      for (int k = 0; k < 3; ++k) lp += likelihoods::negbin_logpmf(x[k], alpha[k], theta);
      CHECK(dirichlet_multinomial_logpmf(x, alpha) == doctest::Approx(lp).epsilon(1e-12));
      total_mass += std::exp(lp);
    }
  }
  CHECK(total_mass == doctest::Approx(1.0).epsilon(1e-12));
  // Merging categories sums their concentrations.
  for (std::int64_t i = 0; i <= 6; ++i) {
    double merged = 0.0;
    for (std::int64_t j = 0; j <= 6 - i; ++j) {
      const std::vector<std::int64_t> x{i, j, 6 - i - j};
      merged += std::exp(dirichlet_multinomial_logpmf(x, alpha));
    }
    const std::vector<std::int64_t> y{i, 6 - i};
    const std::vector<double> a2{alpha[0], alpha[1] + alpha[2]};
    CHECK(std::log(merged) == doctest::Approx(dirichlet_multinomial_logpmf(y, a2)).epsilon(1e-12));
  }
}

TEST_CASE("predictive rescaling preserves totals and is seeded") {
  std::vector<Eigen::MatrixXd> alpha(20, Eigen::MatrixXd::Constant(5, 3, 0.4));
  alpha[3](2, 1) = 1e-4;
  const std::vector<std::int64_t> calib{12, 0, 1000};
  auto a = predictive_rescale(alpha, calib, 9, 2);
  auto b = predictive_rescale(alpha, calib, 9, 1);
  for (std::size_t d = 0; d < a.size(); ++d) {
    for (int w = 0; w < 3; ++w) CHECK(a[d].col(w).sum() == calib[w]);
    CHECK((a[d] - b[d]).norm() == 0);
  }
  const std::vector<std::int64_t> negative{-1, 0, 0};
  CHECK_THROWS_AS(predictive_rescale(alpha, negative, 1), ValidationError);
  auto mean = predictive_mean(a);
  CHECK(mean.col(2).sum() == doctest::Approx(1000));
}

TEST_CASE("mortality rates") {
  Eigen::MatrixXi d(2, 2);
  d << 3, 1, 5, 2;
  const std::vector<Eigen::MatrixXi> draws{d, Eigen::MatrixXi::Zero(2, 2)};
  const std::vector<double> pop{100.0, 50.0};
  const std::vector<int> a0{0}, a1{1}, both{0, 1}, none{};
  auto r0 = mortality_rate(draws, a0, pop);
  auto r1 = mortality_rate(draws, a1, pop);
  auto rb = mortality_rate(draws, both, pop);
  CHECK(r0[0] == doctest::Approx(0.04));
  CHECK(r1[0] == doctest::Approx(0.14));
  CHECK(rb[0] * 150.0 == doctest::Approx(r0[0] * 100.0 + r1[0] * 50.0));
  CHECK(r0[1] == 0.0);
  CHECK_THROWS_AS(mortality_rate(draws, none, pop), ValidationError);
}
