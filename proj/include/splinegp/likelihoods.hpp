#pragma once

// Count and continuous observation models: the shape-scale Negative Binomial,
// the bounded-sum likelihood for blocks of censored weeks, and a Gaussian.

#include <cstdint>
#include <string_view>

namespace splinegp::likelihoods {

/// NegBin(shape, scale) with pmf Gamma(d + shape) / (Gamma(shape) d!) scale^d (1 - scale)^shape.
class NegBinShapeScale {
 public:
  NegBinShapeScale(double shape, double scale);

  /// shape = mean / overdispersion, scale = overdispersion / (1 + overdispersion).
  static NegBinShapeScale from_mean(double mean, double overdispersion);

  double shape() const { return shape_; }
  double scale() const { return scale_; }
  double mean() const { return shape_ * scale_ / (1.0 - scale_); }
  double variance() const { return shape_ * scale_ / ((1.0 - scale_) * (1.0 - scale_)); }

 private:
  double shape_;
  double scale_;
};

/// Value of a log density plus its partial derivatives in the two parameters.
struct LogDensityGrad {
  double value = 0.0;
  double d_first = 0.0;   // d/d shape (NegBin) or d/d mean (Gaussian)
  double d_second = 0.0;  // d/d scale (NegBin) or d/d sigma (Gaussian)
};

double negbin_logpmf(std::int64_t d, double shape, double scale);
LogDensityGrad negbin_logpmf_grad(std::int64_t d, double shape, double scale);

/// log P(X <= d), accumulated in log space.
double negbin_logcdf(std::int64_t d, double shape, double scale);

enum class CensorScenario { ExactSum, IntervalWithObservedEnd, TrailingCensored, AllCensored };

std::string_view scenario_name(CensorScenario scenario);

/// Inclusive bounds on the sum of deaths over a block of non-retrievable weeks.
struct CensoredSumBound {
  CensorScenario scenario = CensorScenario::ExactSum;
  std::int64_t lower = 0;
  std::int64_t upper = 0;

  /// Observed at both ends: the block sums to the first cumulative count seen after it.
  static CensoredSumBound exact(std::int64_t first_uncensored);
  /// Censored from week one, observed at the end: [D - 9, D - 1], floored at 0.
  static CensoredSumBound interval_with_observed_end(std::int64_t first_uncensored);
  /// Observed at week one, censored through the last week: [1, 9].
  static CensoredSumBound trailing_censored();
  /// Censored everywhere: [0, 8].
  static CensoredSumBound all_censored();

  /// Throws ValidationError when the bounds are inconsistent with the scenario.
  void validate() const;
};

/// log P(lower <= S <= upper) for S ~ NegBin(shape_sum, scale), where
/// shape_sum aggregates the shapes of the weeks in the block.
double censored_block_loglik(const CensoredSumBound& bound, double shape_sum, double scale);
LogDensityGrad censored_block_loglik_grad(const CensoredSumBound& bound, double shape_sum,
                                          double scale);

double gaussian_loglik(double y, double mean, double sigma);
LogDensityGrad gaussian_loglik_grad(double y, double mean, double sigma);

}  // namespace splinegp::likelihoods
