#include <doctest.h>

#include <cmath>

#include "splinegp/errors.hpp"
#include "splinegp/hmc.hpp"
#include "splinegp/meta.hpp"
#include "support.hpp"

using namespace splinegp;
using namespace splinegp::meta;

namespace {

StateData flat_state(const std::string& name, double v1, double v2, std::vector<double> r) {
  StateData s;
  s.deaths.state = name;
  s.deaths.start_week = 3;
  s.deaths.max_pre = {10.0, 4.0};
  s.deaths.r = {r, r};
  s.vacc_pre = {v1, v2};
  return s;
}

}  // namespace

TEST_CASE("relative deaths divide by the pre-resurgence maximum") {
  Eigen::MatrixXd m(2, 4);
  m << 1, 4, 2, 6, 3, 3, 3, 3;
  auto r = relative_deaths("XA", m, 4);
  CHECK(r.r[0] == std::vector<double>{1.5});
  CHECK(r.r[1] == std::vector<double>{1.0});
  auto r2 = relative_deaths("XA", 2.0 * m, 4);
  CHECK(r2.r[0] == r.r[0]);
  Eigen::MatrixXd zero = Eigen::MatrixXd::Zero(2, 4);
  CHECK_THROWS_AS(relative_deaths("XA", zero, 3), ValidationError);
  CHECK_THROWS_AS(relative_deaths("XA", m, 1), ValidationError);
}

TEST_CASE("class aggregation covers 18-64 and 65+") {
  Eigen::MatrixXd a = Eigen::MatrixXd::Ones(106, 2);
  auto c = aggregate_to_classes(a);
  CHECK(c(0, 0) == 47.0);
  CHECK(c(1, 1) == 41.0);
}

TEST_CASE("zero effects give a unit shape") {
  MetaModel model({flat_state("XA", 0.3, 0.6, {1.0})});
  MetaParams p;
  p.chi_state = {{0.0, 0.0}};
  p.kappa = {1.7};
  const double k2 = 1.7 * 1.7;
  CHECK(model.log_shape(p, 0, 0, 0, {0.3, 0.6}) == 0.0);
  // Two classes, each Gamma(shape 1, rate k2) at r = 1.
  CHECK(model.log_likelihood(p) == doctest::Approx(2.0 * (std::log(k2) - k2)).epsilon(1e-14));
  auto raw = model.pack(p);
  auto back = model.unpack(raw);
  CHECK(back.kappa[0] == doctest::Approx(1.7));
}

TEST_CASE("meta gradient matches finite differences under both conventions") {
  auto data = simulate_meta_data({.states = 3, .weeks = 4, .seed = 2});
  for (auto conv : {GammaConvention::ShapeRate, GammaConvention::ShapeScale}) {
    MetaModel model(data, conv);
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
      auto raw = testsupport::normal_vector(model.dimension(), seed, 0.4);
      std::vector<double> grad(raw.size());
      meta_loglik(model, raw, grad);
      auto f = [&](const std::vector<double>& x) {
        std::vector<double> g(x.size());
        return meta_loglik(model, x, g);
      };
      CHECK(testsupport::max_relative_gradient_error(f, raw, grad) < 1e-6);
    }
  }
}

TEST_CASE("invalid meta inputs") {
  CHECK_THROWS_AS(MetaModel({flat_state("XA", 0.3, 0.6, {1.0, -0.5})}), ValidationError);
  CHECK_THROWS_AS(MetaModel({flat_state("XA", 1.3, 0.6, {1.0})}), ValidationError);
  CHECK_THROWS_AS(parse_gamma_convention("mean"), ValidationError);
}

TEST_CASE("counterfactual projection") {
  MetaModel model({flat_state("XA", 0.3, 0.6, {1.0, 2.0}), flat_state("XB", 0.5, 0.5, {1.0, 1.5})});
  MetaParams p;
  p.chi_base = {1.0, 0.5};
  p.chi_vacc = -1.0;
  p.psi_vacc = -0.5;
  p.chi_cross = {-0.2, -0.3};
  p.chi_state = {{0.1, -0.1}, {0.0, 0.2}};
  p.kappa = {1.0, 1.2};
  auto raw = model.pack(p);
  Eigen::MatrixXd draws(1, raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) draws(0, static_cast<Eigen::Index>(i)) = raw[i];

  auto own = counterfactual_project(model, draws, 0.5);
  CHECK(own[2].avoided_median == doctest::Approx(0.0).scale(1.0));  // XB 18-64 at its own rate
  CHECK(own[3].avoided_median == doctest::Approx(0.0).scale(1.0));

  // Hand computation for XA 18-64 at rate 0.8.
  auto cf = counterfactual_project(model, draws, 0.8);
  auto shape = [&](double v1, double v2, int k) {
    return std::exp(1.0 + 0.1 - 1.0 * v1 - 0.2 * v2 + (-0.5 * v1) * k);
  };
  double obs = 0, alt = 0;
  for (int k = 0; k < 2; ++k) {
    obs += shape(0.3, 0.6, k);
    alt += shape(0.8, 0.6, k);
  }
  CHECK(cf[0].avoided_median == doctest::Approx(10.0 * (obs - alt)));
  CHECK(cf[0].pct_median == doctest::Approx(100.0 * (obs - alt) / obs));
  CHECK(cf[0].avoided_median > 0.0);

  // Raising the scenario rate never increases projected deaths.
  double prev = -1e300;
  for (double rate : {0.3, 0.5, 0.7, 0.9, 1.0}) {
    const double a = counterfactual_project(model, draws, rate)[0].avoided_median;
    CHECK(a >= prev);
    prev = a;
  }
  CHECK_THROWS_AS(counterfactual_project(model, draws, 1.5), ValidationError);
}

TEST_CASE("vaccination effects on data simulated without them cover zero") {
  // A moderate shape level keeps the intercept within reach of its prior; a
  // large level is partly absorbed by the uncentred coverage slopes.
  MetaSimulation sim;
  sim.states = 12;
  sim.chi_base = 0.5;
  sim.chi_vacc = 0.0;
  sim.psi_vacc = 0.0;
  MetaModel model(simulate_meta_data(sim));
  hmc::SamplerConfig c;
  c.chains = 2;
  c.iterations = 600;
  c.warmup = 300;
  c.seed = 3;
  c.threads = 1;
  const auto draws = hmc::sample(model, c);
  for (const auto& s : draws.summarize()) {
    if (s.name != "chi_vacc" && s.name != "psi_vacc") continue;
    CHECK(s.q025 < 0.0);
    CHECK(s.q975 > 0.0);
    CHECK(s.rhat < 1.05);
  }
}
