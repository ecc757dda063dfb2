#pragma once

#include <cmath>
#include <functional>
#include <random>
#include <vector>

namespace testsupport {

/// Richardson-extrapolated central difference of f along coordinate i.
inline double richardson_partial(const std::function<double(const std::vector<double>&)>& f,
                                 std::vector<double> x, std::size_t i, double h = 1e-3) {
  const double x0 = x[i];
  auto central = [&](double step) {
    x[i] = x0 + step;
    const double up = f(x);
    x[i] = x0 - step;
    const double down = f(x);
    x[i] = x0;
    return (up - down) / (2.0 * step);
  };
  const double d1 = central(h);
  const double d2 = central(h / 2.0);
  const double d4 = central(h / 4.0);
  const double r1 = (4.0 * d2 - d1) / 3.0;
  const double r2 = (4.0 * d4 - d2) / 3.0;
  return (16.0 * r2 - r1) / 15.0;
}

/// max_i |g_i - fd_i| / max(1, |fd_i|)
inline double max_relative_gradient_error(
    const std::function<double(const std::vector<double>&)>& f, const std::vector<double>& x,
    const std::vector<double>& grad, double h = 1e-3) {
  double worst = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double fd = richardson_partial(f, x, i, h);
    worst = std::max(worst, std::abs(grad[i] - fd) / std::max(1.0, std::abs(fd)));
  }
  return worst;
}

inline std::vector<double> normal_vector(std::size_t n, std::uint64_t seed, double sd = 1.0) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> z(0.0, sd);
  std::vector<double> out(n);
  for (auto& v : out) v = z(rng);
  return out;
}

}  // namespace testsupport
