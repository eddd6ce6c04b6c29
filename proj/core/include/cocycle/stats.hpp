#pragma once

#include <cstddef>
#include <span>
#include <utility>
#include <vector>

namespace cocycle::stats {

double normal_cdf(double x);
double normal_pdf(double x);
double normal_quantile(double p);

/// Two-sided normal critical value at level `alpha`, Bonferroni-corrected
/// for `comparisons` simultaneous intervals.
double bonferroni_z(double alpha, std::size_t comparisons);

/// E[Z^a] for a standard normal Z.
double normal_moment(int a);

/// Neumaier-compensated running sum.
class CompensatedSum {
 public:
  void add(double x);
  double value() const { return sum_ + comp_; }

 private:
  double sum_ = 0.0;
  double comp_ = 0.0;
};

/// Welford accumulator; merge() combines partial results (Chan et al.).
struct RunningMoments {
  std::size_t count = 0;
  double mean = 0.0;
  double m2 = 0.0;

  void add(double x);
  void merge(const RunningMoments& other);
  /// Unbiased sample variance (0 when count < 2).
  double variance() const;
  double std_error() const;
};

RunningMoments moments_of(std::span<const double> values);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double slope_se = 0.0;
  double intercept_se = 0.0;
  double r2 = 0.0;
  std::size_t n = 0;

  /// Two-sided Student-t interval for the slope.
  std::pair<double, double> slope_ci(double level = 0.95) const;
};

/// Ordinary least squares y = intercept + slope * x. Requires n >= 3 and
/// non-constant x. r2 is 1 for an exact fit, including constant y.
LinearFit ols(std::span<const double> x, std::span<const double> y);

/// Exact binomial (Clopper-Pearson) interval for k successes in n trials.
std::pair<double, double> clopper_pearson(std::size_t k, std::size_t n, double alpha = 0.05);

/// Chi-square interval for a normal-theory variance estimate from m samples.
std::pair<double, double> variance_ci(double variance, std::size_t m, double alpha = 0.05);

/// Two-sample Kolmogorov-Smirnov statistic and asymptotic p-value.
std::pair<double, double> ks_two_sample(std::vector<double> a, std::vector<double> b);

/// Lag-k sample autocorrelation.
double autocorrelation(std::span<const double> series, std::size_t lag);

}  // namespace cocycle::stats
