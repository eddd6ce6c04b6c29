#include "cocycle/stats.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include <boost/math/distributions/beta.hpp>
#include <boost/math/distributions/chi_squared.hpp>
#include <boost/math/distributions/normal.hpp>
#include <boost/math/distributions/students_t.hpp>

#include "cocycle/errors.hpp"

namespace cocycle::stats {

namespace bm = boost::math;

double normal_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

double normal_pdf(double x) { return std::exp(-0.5 * x * x) / std::sqrt(2.0 * 3.14159265358979323846); }

double normal_quantile(double p) {
  if (!(p > 0.0 && p < 1.0)) throw DomainError("normal_quantile: p must lie in (0, 1)");
  return bm::quantile(bm::normal_distribution<double>(), p);
}

double bonferroni_z(double alpha, std::size_t comparisons) {
  const double k = static_cast<double>(std::max<std::size_t>(comparisons, 1));
  return normal_quantile(1.0 - alpha / (2.0 * k));
}

double normal_moment(int a) {
  if (a < 0) throw DomainError("normal_moment: negative order");
  if (a % 2 == 1) return 0.0;
  double m = 1.0;
  for (int k = a - 1; k > 1; k -= 2) m *= k;
  return m;
}

void CompensatedSum::add(double x) {
  const double t = sum_ + x;
  if (std::abs(sum_) >= std::abs(x)) {
    comp_ += (sum_ - t) + x;
  } else {
    comp_ += (x - t) + sum_;
  }
  sum_ = t;
}

void RunningMoments::add(double x) {
  ++count;
  const double delta = x - mean;
  mean += delta / static_cast<double>(count);
  m2 += delta * (x - mean);
}

void RunningMoments::merge(const RunningMoments& other) {
  if (other.count == 0) return;
  if (count == 0) {
    *this = other;
    return;
  }
  const double n1 = static_cast<double>(count);
  const double n2 = static_cast<double>(other.count);
  const double delta = other.mean - mean;
  const double n = n1 + n2;
  mean += delta * n2 / n;
  m2 += other.m2 + delta * delta * n1 * n2 / n;
  count += other.count;
}

double RunningMoments::variance() const {
  return count < 2 ? 0.0 : std::max(0.0, m2 / static_cast<double>(count - 1));
}

double RunningMoments::std_error() const {
  return count < 2 ? 0.0 : std::sqrt(variance() / static_cast<double>(count));
}

RunningMoments moments_of(std::span<const double> values) {
  RunningMoments m;
  for (double v : values) m.add(v);
  return m;
}

std::pair<double, double> LinearFit::slope_ci(double level) const {
  if (n < 3) return {-std::numeric_limits<double>::infinity(), std::numeric_limits<double>::infinity()};
  const bm::students_t dist(static_cast<double>(n - 2));
  const double t = bm::quantile(dist, 0.5 + level / 2.0);
  return {slope - t * slope_se, slope + t * slope_se};
}

LinearFit ols(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw DomainError("ols: x and y differ in length");
  const std::size_t n = x.size();
  if (n < 3) throw DomainError("ols: need at least 3 points");
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= static_cast<double>(n);
  my /= static_cast<double>(n);
  double sxx = 0.0, sxy = 0.0, syy = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (y[i] - my);
    syy += (y[i] - my) * (y[i] - my);
  }
  if (!(sxx > 0.0)) throw DomainError("ols: x values are constant");
  LinearFit fit;
  fit.n = n;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double sse = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double r = y[i] - fit.intercept - fit.slope * x[i];
    sse += r * r;
  }
  const double s2 = sse / static_cast<double>(n - 2);
  fit.slope_se = std::sqrt(s2 / sxx);
  double sum_x2 = 0.0;
  for (double xi : x) sum_x2 += xi * xi;
  fit.intercept_se = std::sqrt(s2 * sum_x2 / (static_cast<double>(n) * sxx));
  const double tiny = 1e-24 * std::max(1.0, my * my) * static_cast<double>(n);
  if (sse <= tiny) {
    fit.r2 = 1.0;
  } else {
    fit.r2 = syy > 0.0 ? std::max(0.0, 1.0 - sse / syy) : 0.0;
  }
  return fit;
}

std::pair<double, double> clopper_pearson(std::size_t k, std::size_t n, double alpha) {
  if (n == 0) throw DomainError("clopper_pearson: zero trials");
  if (k > n) throw DomainError("clopper_pearson: more successes than trials");
  const double kk = static_cast<double>(k);
  const double nn = static_cast<double>(n);
  const double lo = k == 0 ? 0.0 : bm::ibeta_inv(kk, nn - kk + 1.0, alpha / 2.0);
  const double hi = k == n ? 1.0 : bm::ibeta_inv(kk + 1.0, nn - kk, 1.0 - alpha / 2.0);
  return {lo, hi};
}

std::pair<double, double> variance_ci(double variance, std::size_t m, double alpha) {
  if (m < 2) throw DomainError("variance_ci: need at least 2 samples");
  const double dof = static_cast<double>(m - 1);
  const bm::chi_squared dist(dof);
  const double lo = dof * variance / bm::quantile(dist, 1.0 - alpha / 2.0);
  const double hi = dof * variance / bm::quantile(dist, alpha / 2.0);
  return {lo, hi};
}

std::pair<double, double> ks_two_sample(std::vector<double> a, std::vector<double> b) {
  if (a.empty() || b.empty()) throw DomainError("ks_two_sample: empty sample");
  std::sort(a.begin(), a.end());
  std::sort(b.begin(), b.end());
  const double na = static_cast<double>(a.size());
  const double nb = static_cast<double>(b.size());
  std::size_t i = 0, j = 0;
  double d = 0.0;
  while (i < a.size() && j < b.size()) {
    const double v = std::min(a[i], b[j]);
    while (i < a.size() && a[i] <= v) ++i;
    while (j < b.size() && b[j] <= v) ++j;
    d = std::max(d, std::abs(static_cast<double>(i) / na - static_cast<double>(j) / nb));
  }
  const double ne = na * nb / (na + nb);
  // Asymptotic Kolmogorov distribution with Stephens' small-sample correction.
  const double lambda = (std::sqrt(ne) + 0.12 + 0.11 / std::sqrt(ne)) * d;
  double p = 0.0;
  for (int k = 1; k <= 100; ++k) {
    const double term = 2.0 * ((k % 2 == 1) ? 1.0 : -1.0) * std::exp(-2.0 * k * k * lambda * lambda);
    p += term;
    if (std::abs(term) < 1e-12) break;
  }
  return {d, std::clamp(p, 0.0, 1.0)};
}

double autocorrelation(std::span<const double> series, std::size_t lag) {
  const std::size_t n = series.size();
  if (lag >= n) throw DomainError("autocorrelation: lag exceeds series length");
  double mean = 0.0;
  for (double v : series) mean += v;
  mean /= static_cast<double>(n);
  double num = 0.0, den = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double c = series[i] - mean;
    den += c * c;
    if (i + lag < n) num += c * (series[i + lag] - mean);
  }
  return den > 0.0 ? num / den : 0.0;
}

}  // namespace cocycle::stats
