#include "splinegp/likelihoods.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>
#include <vector>

#include <boost/math/special_functions/beta.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include "splinegp/errors.hpp"

namespace splinegp::likelihoods {

namespace {

void check_params(double shape, double scale) {
  if (!(shape > 0.0) || !std::isfinite(shape)) {
    throw ValidationError("negative binomial shape must be positive and finite");
  }
  if (!(scale > 0.0 && scale < 1.0)) {
    throw ValidationError("negative binomial scale must lie in (0, 1)");
  }
}

void check_count(std::int64_t d) {
  if (d < 0) throw ValidationError("counts must be non-negative");
}

double logpmf_unchecked(std::int64_t d, double shape, double scale) {
  const double k = static_cast<double>(d);
  return std::lgamma(k + shape) - std::lgamma(shape) - std::lgamma(k + 1.0) +
         k * std::log(scale) + shape * std::log1p(-scale);
}

// Direct summation pays off until the support gets long; beyond that the
// regularised incomplete beta is cheaper.
constexpr std::int64_t kSummationLimit = 4096;

}  // namespace

NegBinShapeScale::NegBinShapeScale(double shape, double scale) : shape_(shape), scale_(scale) {
  check_params(shape, scale);
}

NegBinShapeScale NegBinShapeScale::from_mean(double mean, double overdispersion) {
  if (!(overdispersion > 0.0)) throw ValidationError("overdispersion must be positive");
  return NegBinShapeScale(mean / overdispersion, overdispersion / (1.0 + overdispersion));
}

double negbin_logpmf(std::int64_t d, double shape, double scale) {
  check_count(d);
  check_params(shape, scale);
  return logpmf_unchecked(d, shape, scale);
}

LogDensityGrad negbin_logpmf_grad(std::int64_t d, double shape, double scale) {
  check_count(d);
  check_params(shape, scale);
  const double k = static_cast<double>(d);
  LogDensityGrad out;
  out.value = logpmf_unchecked(d, shape, scale);
  out.d_first = boost::math::digamma(k + shape) - boost::math::digamma(shape) + std::log1p(-scale);
  out.d_second = k / scale - shape / (1.0 - scale);
  return out;
}

double negbin_logcdf(std::int64_t d, double shape, double scale) {
  check_count(d);
  check_params(shape, scale);
  if (d > kSummationLimit) {
    const double upper_tail = boost::math::ibetac(shape, static_cast<double>(d) + 1.0, 1.0 - scale);
    if (upper_tail < 0.5) return std::log1p(-upper_tail);
    return std::log(boost::math::ibeta(shape, static_cast<double>(d) + 1.0, 1.0 - scale));
  }
  // log p(k+1) = log p(k) + log((k + shape) / (k + 1)) + log(scale)
  double log_term = shape * std::log1p(-scale);
  double running_max = log_term;
  double acc = 1.0;  // sum of exp(log_term - running_max)
  const double log_scale = std::log(scale);
  for (std::int64_t k = 0; k < d; ++k) {
    const double kk = static_cast<double>(k);
    log_term += std::log((kk + shape) / (kk + 1.0)) + log_scale;
    if (log_term > running_max) {
      acc = acc * std::exp(running_max - log_term) + 1.0;
      running_max = log_term;
    } else {
      acc += std::exp(log_term - running_max);
    }
  }
  return std::min(0.0, running_max + std::log(acc));
}

std::string_view scenario_name(CensorScenario scenario) {
  switch (scenario) {
    case CensorScenario::ExactSum: return "exact_sum";
    case CensorScenario::IntervalWithObservedEnd: return "interval_with_observed_end";
    case CensorScenario::TrailingCensored: return "trailing_censored";
    case CensorScenario::AllCensored: return "all_censored";
  }
  return "unknown";
}

CensoredSumBound CensoredSumBound::exact(std::int64_t first_uncensored) {
  CensoredSumBound b{CensorScenario::ExactSum, first_uncensored, first_uncensored};
  b.validate();
  return b;
}

CensoredSumBound CensoredSumBound::interval_with_observed_end(std::int64_t first_uncensored) {
  CensoredSumBound b{CensorScenario::IntervalWithObservedEnd,
                     std::max<std::int64_t>(0, first_uncensored - 9), first_uncensored - 1};
  b.validate();
  return b;
}

CensoredSumBound CensoredSumBound::trailing_censored() {
  return {CensorScenario::TrailingCensored, 1, 9};
}

CensoredSumBound CensoredSumBound::all_censored() { return {CensorScenario::AllCensored, 0, 8}; }

void CensoredSumBound::validate() const {
  std::ostringstream msg;
  if (lower < 0 || upper < lower) {
    msg << "inconsistent censored-sum bounds [" << lower << ", " << upper << "]";
    throw ValidationError(msg.str());
  }
  bool ok = true;
  switch (scenario) {
    case CensorScenario::ExactSum: ok = lower == upper; break;
    case CensorScenario::IntervalWithObservedEnd:
      ok = upper >= 0 && upper - lower <= 8 && (lower == 0 || upper - lower == 8);
      break;
    case CensorScenario::TrailingCensored: ok = lower == 1 && upper == 9; break;
    case CensorScenario::AllCensored: ok = lower == 0 && upper == 8; break;
  }
  if (!ok) {
    msg << "bounds [" << lower << ", " << upper << "] do not match scenario "
        << scenario_name(scenario);
    throw ValidationError(msg.str());
  }
}

LogDensityGrad censored_block_loglik_grad(const CensoredSumBound& bound, double shape_sum,
                                          double scale) {
  if (!(shape_sum > 0.0)) {
    throw ValidationError("censored block needs a non-empty set of non-retrievable weeks");
  }
  check_params(shape_sum, scale);
  bound.validate();
  // Sum the pmf over the (at most nine-wide) window rather than differencing
  // two CDFs; this stays accurate deep in either tail.
  const auto width = static_cast<std::size_t>(bound.upper - bound.lower + 1);
  std::vector<double> logp(width);
  double max_logp = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < width; ++i) {
    logp[i] = logpmf_unchecked(bound.lower + static_cast<std::int64_t>(i), shape_sum, scale);
    max_logp = std::max(max_logp, logp[i]);
  }
  double total = 0.0;
  for (double lp : logp) total += std::exp(lp - max_logp);
  LogDensityGrad out;
  out.value = max_logp + std::log(total);
  const double psi_shape = boost::math::digamma(shape_sum);
  const double log1m = std::log1p(-scale);
  for (std::size_t i = 0; i < width; ++i) {
    const double weight = std::exp(logp[i] - out.value);
    const double k = static_cast<double>(bound.lower) + static_cast<double>(i);
    out.d_first += weight * (boost::math::digamma(k + shape_sum) - psi_shape + log1m);
    out.d_second += weight * (k / scale - shape_sum / (1.0 - scale));
  }
  return out;
}

double censored_block_loglik(const CensoredSumBound& bound, double shape_sum, double scale) {
  return censored_block_loglik_grad(bound, shape_sum, scale).value;
}

double gaussian_loglik(double y, double mean, double sigma) {
  return gaussian_loglik_grad(y, mean, sigma).value;
}

LogDensityGrad gaussian_loglik_grad(double y, double mean, double sigma) {
  if (!(sigma > 0.0)) throw ValidationError("gaussian sigma must be positive");
  const double z = (y - mean) / sigma;
  LogDensityGrad out;
  out.value = -std::log(sigma) - 0.5 * std::log(2.0 * std::numbers::pi) - 0.5 * z * z;
  out.d_first = z / sigma;
  out.d_second = (z * z - 1.0) / sigma;
  return out;
}

}  // namespace splinegp::likelihoods
