#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "splinegp/errors.hpp"
#include "splinegp/hmc.hpp"

using namespace splinegp;
using namespace splinegp::hmc;

namespace {

class DiagonalGaussian : public TargetDensity {
 public:
  explicit DiagonalGaussian(std::vector<double> sd) : sd_(std::move(sd)) {}
  std::size_t dimension() const override { return sd_.size(); }
  double log_density_gradient(std::span<const double> x, std::span<double> g) const override {
    double lp = 0.0;
    for (std::size_t i = 0; i < sd_.size(); ++i) {
      lp -= 0.5 * x[i] * x[i] / (sd_[i] * sd_[i]);
      g[i] = -x[i] / (sd_[i] * sd_[i]);
    }
    return lp;
  }

 private:
  std::vector<double> sd_;
};

class Nowhere : public TargetDensity {
 public:
  std::size_t dimension() const override { return 2; }
  double log_density_gradient(std::span<const double>, std::span<double>) const override {
    return -std::numeric_limits<double>::infinity();
  }
};

std::vector<std::vector<double>> ar1_chains(int chains, int n, double phi, std::uint64_t seed,
                                            double offset_step = 0.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z;
  std::vector<std::vector<double>> out(chains);
  for (int c = 0; c < chains; ++c) {
    double x = z(rng) / std::sqrt(1 - phi * phi);
    for (int i = 0; i < n; ++i) {
      x = phi * x + z(rng);
      out[c].push_back(x + c * offset_step);
    }
  }
  return out;
}

}  // namespace

TEST_CASE("sampler recovers a badly scaled Gaussian") {
  DiagonalGaussian target({1.0, 10.0, 0.1});
  SamplerConfig cfg;
  cfg.chains = 4;
  cfg.iterations = 1500;
  cfg.warmup = 500;
  cfg.seed = 42;
  auto draws = sample(target, cfg);
  auto summary = draws.summarize();
  const std::vector<double> sd{1.0, 10.0, 0.1};
  for (std::size_t j = 0; j < 3; ++j) {
    CHECK(std::abs(summary[j].mean) < 0.15 * sd[j]);
    CHECK(summary[j].sd == doctest::Approx(sd[j]).epsilon(0.1));
    CHECK(summary[j].rhat < 1.01);
    CHECK(summary[j].ess_bulk > 400);
  }
  CHECK(draws.total_divergences() == 0);
}

TEST_CASE("sampling is reproducible and independent of thread count") {
  DiagonalGaussian target({1.0, 2.0});
  SamplerConfig cfg;
  cfg.chains = 3;
  cfg.iterations = 300;
  cfg.warmup = 100;
  cfg.seed = 7;
  cfg.threads = 1;
  auto a = sample(target, cfg);
  cfg.threads = 3;
  auto b = sample(target, cfg);
  CHECK((a.stacked() - b.stacked()).norm() == 0.0);
  cfg.seed = 8;
  auto c = sample(target, cfg);
  CHECK((a.stacked() - c.stacked()).norm() > 0.0);
}

TEST_CASE("leapfrog is reversible and nearly conserves energy") {
  DiagonalGaussian target({1.0, 3.0});
  PhasePoint z;
  z.q = Eigen::Vector2d(0.3, -1.2);
  z.p = Eigen::Vector2d(0.7, 0.2);
  z.grad = Eigen::Vector2d::Zero();
  z.log_density = target.log_density_gradient(std::span<const double>(z.q.data(), 2),
                                              std::span<double>(z.grad.data(), 2));
  const Eigen::VectorXd inv = Eigen::Vector2d::Ones();
  auto energy = [&](const PhasePoint& s) { return -s.log_density + 0.5 * s.p.squaredNorm(); };
  const double h0 = energy(z);
  PhasePoint y = z;
  REQUIRE(leapfrog(target, y, inv, 0.01, 200));
  CHECK(std::abs(energy(y) - h0) < 1e-4);
  y.p = -y.p;
  REQUIRE(leapfrog(target, y, inv, 0.01, 200));
  CHECK((y.q - z.q).norm() < 1e-10);
}

TEST_CASE("bulk ESS of AR(1) chains tracks the analytic value") {
  const double phi = 0.9;
  const int n = 5000;
  auto chains = ar1_chains(4, n, phi, 123);
  const double expected = 4.0 * n * (1 - phi) / (1 + phi);
  CHECK(ess_bulk(chains) == doctest::Approx(expected).epsilon(0.3));
  auto iid = ar1_chains(4, 2000, 0.0, 5);
  CHECK(ess_bulk(iid) == doctest::Approx(8000).epsilon(0.15));
}

TEST_CASE("R-hat flags chains stuck in different places") {
  auto good = ar1_chains(4, 1000, 0.5, 9);
  CHECK(split_rhat(good) < 1.01);
  auto bad = ar1_chains(4, 1000, 0.5, 9, 2.0);
  CHECK(split_rhat(bad) > 1.1);
  CHECK_THROWS_AS(split_rhat({good[0]}), ValidationError);
}

TEST_CASE("initialisation failure and bad configs are reported") {
  Nowhere target;
  SamplerConfig cfg;
  cfg.iterations = 10;
  cfg.warmup = 5;
  cfg.chains = 1;
  CHECK_THROWS_AS(sample(target, cfg), InitializationError);
  cfg.warmup = 10;
  CHECK_THROWS_AS(cfg.validate(), ValidationError);
}

TEST_CASE("type 7 quantiles") {
  CHECK(quantile({1, 2, 3, 4}, 0.5) == doctest::Approx(2.5));
  CHECK(quantile({5, 1, 3}, 0.0) == 1.0);
  CHECK(quantile({5, 1, 3}, 1.0) == 5.0);
}
