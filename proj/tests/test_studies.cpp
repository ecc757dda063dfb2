#include <doctest.h>

#include <cmath>
#include <sstream>

#include "splinegp/errors.hpp"
#include "splinegp/studies.hpp"
#include "support.hpp"

using namespace splinegp;
using namespace splinegp::studies;

namespace {

std::vector<double> unit_grid(int n) {
  std::vector<double> g(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) g[static_cast<std::size_t>(i)] = static_cast<double>(i) / (n - 1);
  return g;
}

double gradient_error(const hmc::TargetDensity& model, const std::vector<double>& x) {
  std::vector<double> grad(x.size());
  model.log_density_gradient(x, grad);
  auto f = [&](const std::vector<double>& p) {
    std::vector<double> g(p.size());
    return model.log_density_gradient(p, g);
  };
  return testsupport::max_relative_gradient_error(f, x, grad);
}

SimulationConfig small_simulation() {
  SimulationConfig c;
  c.grid_size = 8;
  c.methods = {parse_method("projected-gp:4"), parse_method("bsplines:4")};
  c.mcmc.chains = 2;
  c.mcmc.iterations = 200;
  c.mcmc.warmup = 100;
  c.mcmc.threads = 1;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("count surface gradient matches finite differences for every prior") {
  const auto g = unit_grid(5);
  const std::vector<GridObservation> obs{{0, 0, 3}, {1, 2, 0}, {4, 4, 7}, {2, 3, 1}, {3, 0, 12}};
  for (auto kind : {priors::PriorKind::Standard2DGP, priors::PriorKind::StandardBSplines,
                    priors::PriorKind::BayesianPSplines, priors::PriorKind::ProjectedGP}) {
    CountSurfaceModel model(priors::SurfacePrior::make(kind, g, g, 3, 3), obs);
    const auto x = testsupport::normal_vector(model.dimension(), 11, 0.5);
    CHECK_MESSAGE(gradient_error(model, x) < 1e-6, priors::prior_kind_name(kind));
  }
}

TEST_CASE("Gaussian surface gradient matches finite differences") {
  const std::vector<double> xs{0.1, 0.5, 0.9, 0.3}, ys{0.2, 0.8, 0.4, 0.6}, v{1.0, -0.5, 0.3, 2.0};
  const auto knots = splines::equispaced_knots(0.0, 1.0, 3);
  for (auto kind : {priors::PriorKind::StandardBSplines, priors::PriorKind::BayesianPSplines,
                    priors::PriorKind::ProjectedGP}) {
    GaussianSurfaceModel model(priors::SurfacePrior::spline_at_points(kind, knots, knots, xs, ys), v);
    const auto x = testsupport::normal_vector(model.dimension(), 5, 0.5);
    CHECK(gradient_error(model, x) < 1e-6);
  }
  CHECK_THROWS_AS(GaussianSurfaceModel(priors::SurfacePrior::spline_at_points(
                                           priors::PriorKind::ProjectedGP, knots, knots, xs, ys),
                                       {1.0}),
                  ValidationError);
}

TEST_CASE("method specs and scenario labels") {
  CHECK(parse_method("gp2d").kind == priors::PriorKind::Standard2DGP);
  CHECK(parse_method("projected-gp:30").knots == 30);
  CHECK(parse_method("psplines:12").label() == "psplines:12");
  CHECK_THROWS_AS(parse_method("bsplines"), ValidationError);
  CHECK_THROWS_AS(parse_method("bsplines:1"), ValidationError);
  CHECK_THROWS_AS(parse_method("bsplines:x"), ValidationError);
  CHECK_THROWS_AS(parse_method("gp2d:4"), ValidationError);
  CHECK(correlation_label(0.05) == "weakly");
  CHECK(correlation_label(0.25) == "mildly");
  CHECK(correlation_label(1.0) == "strongly");
  CHECK(correlation_label(0.5) == "custom");
}

TEST_CASE("simulated count study splits cells and is reproducible") {
  auto c = small_simulation();
  const auto a = simulate_count_study(c);
  const auto b = simulate_count_study(c);
  CHECK(a.train.size() == 26);  // round(0.4 * 64)
  CHECK(a.train.size() + a.test.size() == 64);
  CHECK((a.log_mean - b.log_mean).norm() == 0.0);
  CHECK((a.counts - b.counts).norm() == 0);
  CHECK(a.coords.front() == 0.0);
  CHECK(a.coords.back() == 1.0);
  // Unit-variance truth: sample variance of f stays in a plausible band.
  const double var = (a.log_mean.array() - a.log_mean.mean()).square().mean();
  CHECK(var < 4.0);
  c.train_fraction = 1.0;
  CHECK_THROWS_AS(simulate_count_study(c), ValidationError);
  c.train_fraction = 0.0;
  CHECK_THROWS_AS(simulate_count_study(c), ValidationError);
}

TEST_CASE("simulation report is deterministic apart from runtimes") {
  const auto c = small_simulation();
  const auto r1 = run_simulation(c);
  const auto r2 = run_simulation(c);
  REQUIRE(r1.results.size() == 2);
  for (std::size_t m = 0; m < 2; ++m) {
    CHECK(r1.results[m].mse_mean == r2.results[m].mse_mean);
    CHECK(r1.results[m].coverage95 == r2.results[m].coverage95);
    CHECK(r1.results[m].mse_mean >= 0.0);
    CHECK(r1.results[m].coverage95 > 0.5);
  }
}

TEST_CASE("point CSV loader") {
  std::istringstream ok("value,y,x,extra\n1.5,0.2,0.1,a\n2.0,0.3,0.4,b\n");
  const auto d = load_point_csv(ok);
  REQUIRE(d.size() == 2);
  CHECK(d.x[1] == 0.4);
  CHECK(d.y[0] == 0.2);
  CHECK(d.value[0] == 1.5);
  std::istringstream missing("x,y\n0.1,0.2\n");
  CHECK_THROWS_AS(load_point_csv(missing), DataError);
  std::istringstream bad("x,y,value\n0.1,zz,1\n");
  CHECK_THROWS_AS(load_point_csv(bad), DataError);
  std::istringstream ragged("x,y,value\n0.1,0.2\n");
  CHECK_THROWS_AS(load_point_csv(ragged), DataError);
}

TEST_CASE("benchmark on a constant field recovers the noise level") {
  auto data = synthetic_point_data(300, 0.5, 2);
  for (auto& v : data.value) v = 0.0;
  std::mt19937_64 rng(9);
  std::normal_distribution<double> noise(0.0, 0.5);
  for (auto& v : data.value) v = 3.0 + noise(rng);
  BenchmarkConfig c;
  c.train_size = 200;
  c.test_size = 0;
  c.methods = {parse_method("bsplines:4"), parse_method("psplines:4"), parse_method("projected-gp:4")};
  c.mcmc.chains = 1;
  c.mcmc.iterations = 300;
  c.mcmc.warmup = 150;
  c.mcmc.threads = 1;
  const auto r = run_benchmark(data, c);
  CHECK(r.test_size == 100);
  for (const auto& m : r.results) {
    CHECK_MESSAGE(m.mse == doctest::Approx(0.25).epsilon(0.35), m.method.label());
  }
  c.methods = {parse_method("gp2d")};
  CHECK_THROWS_AS(run_benchmark(data, c), ValidationError);
  c.methods = {parse_method("bsplines:4")};
  c.train_size = 300;
  CHECK_THROWS_AS(run_benchmark(data, c), ValidationError);
}

TEST_CASE("simulated mortality data is internally consistent") {
  MortalitySimulation sim;
  const auto s = simulate_mortality(sim);
  CHECK(s.grid.band_count() == 6);
  CHECK(s.reports.size() == 6);
  for (int w = 0; w < sim.weeks; ++w) {
    CHECK(s.pi.col(w).sum() == doctest::Approx(1.0));
    CHECK(s.mu_band.col(w).sum() == doctest::Approx(s.lambda[static_cast<std::size_t>(w)]));
    CHECK(s.calibration[static_cast<std::size_t>(w)] == s.deaths.col(w).sum());
  }
  for (int b = 0; b < 6; ++b) {
    const auto& rep = s.reports[static_cast<std::size_t>(b)];
    CHECK(rep.values.size() == static_cast<std::size_t>(sim.weeks + 1));
    const auto series = data::difference_weekly(rep);
    CHECK(series.weeks == sim.weeks);
    for (auto [w, d] : series.retrievable) CHECK(d == s.deaths(b, w - 1));
  }
  CHECK_THROWS_AS(simulate_mortality(sim, "XX", "2020-05-03"), ValidationError);
}
