#pragma once

// Distances between the law of normalized S_n and the standard normal, rate
// fits against sigma_n, and tail checks (concentration and moderate
// deviations).
//
// The distance functions take samples as given; standardize() produces
// the (x - mean) / sd input they expect.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cocycle/mclab.hpp"

namespace cocycle {

inline constexpr std::size_t kMinDistanceSamples = 100;
/// Extent of the fixed evaluation grid and of the weighted sup for s > 0.
inline constexpr double kKolmogorovRange = 10.0;
inline constexpr int kKolmogorovGridPoints = 2001;
inline constexpr double kLqRange = 12.0;
inline constexpr int kMaxMoment = 8;

struct Standardized {
  std::vector<double> z;
  double mean = 0.0;
  /// Population standard deviation.
  double sd = 0.0;
};

/// Throws DomainError when the sample is degenerate (sd = 0) or non-finite.
Standardized standardize(std::span<const double> samples);

/// sup over the sample points (both one-sided limits) and a fixed grid on
/// [-10, 10] of (1 + |t|^s) |F(t) - Phi(t)|; for s > 0 only |t| <= 10 counts.
double weighted_kolmogorov(std::span<const double> z, double s);

struct LqDistance {
  double value = 0.0;
  /// Upper bound on the contribution of |x| > 12 to the reported value.
  double tail_error = 0.0;
};

LqDistance lq_distance(std::span<const double> z, double q);

/// Quantile coupling against Phi^{-1}((i - 1/2) / m).
double wasserstein_p(std::span<const double> z, double p);

/// |mean z^a - E Z^a| for 1 <= a <= 8.
double moment_gap(std::span<const double> z, int a);

struct DistanceRequest {
  std::vector<double> s_grid{0.0};
  std::vector<double> q_grid{1.0, 2.0};
  std::vector<double> p_grid{1.0, 2.0};
  std::vector<int> a_grid{3, 4};

  void validate() const;
};

struct DistanceReport {
  std::uint64_t n = 0;
  /// sqrt of the streamed variance of S_n.
  double sigma_n = 0.0;
  /// Mean and sd used for standardization (stored samples).
  double sample_mean = 0.0;
  double sample_sd = 0.0;
  /// sd = 0: samples were centered but not scaled.
  bool degenerate = false;
  std::map<double, double> kolmogorov_s;
  std::map<double, double> lq;
  std::map<double, double> lq_tail_error;
  std::map<double, double> wasserstein_p;
  std::map<int, double> moment_gaps;
  std::size_t m = 0;

  nlohmann::json to_json() const;
};

DistanceReport distance_report(std::uint64_t n, double sigma_n, std::span<const double> samples,
                               const DistanceRequest& request);

/// One report per grid point of stats.
std::vector<DistanceReport> distance_reports(const TrajectoryStats& stats,
                                             const DistanceRequest& request,
                                             std::size_t workers = 1);

/// Columns n,sigma_n,metric,param,value,error,m.
std::string distances_csv(const std::vector<DistanceReport>& reports);

struct RateFit {
  /// (ln sigma_n, ln distance) pairs kept for the fit.
  std::vector<std::pair<double, double>> pairs;
  double slope = 0.0;
  double slope_ci_low = 0.0;
  double slope_ci_high = 0.0;
  double intercept = 0.0;
  double r2 = 0.0;
  /// Points dropped for a nonpositive or non-finite distance.
  std::size_t filtered = 0;
  /// The slope interval reaches 0.
  bool no_rate = false;

  nlohmann::json to_json() const;
};

/// OLS of ln distance on ln sigma_n. Needs >= 4 usable points with
/// increasing sigma_n.
RateFit rate_fit(const std::vector<std::pair<double, double>>& series);

/// (sigma_n, value) series of one metric across reports.
std::vector<std::pair<double, double>> metric_series(const std::vector<DistanceReport>& reports,
                                                     const std::string& metric, double param);

struct ConcentrationConfig {
  std::vector<double> t_grid;
  std::vector<double> c_grid;
  std::vector<double> C_grid{0.0, 0.5, 1.0, 2.0, 4.0, 8.0};
  /// Use |S_n - mean_n| instead of |S_n|.
  bool centered = false;
  double alpha = 0.05;

  void validate() const;
};

struct ConcentrationCell {
  std::uint64_t n = 0;
  double t = 0.0;
  std::uint64_t count = 0;
  std::size_t m = 0;
  double p_hat = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double bound = 0.0;
  bool pass = false;
};

struct ConcentrationReport {
  double c = 0.0;
  double C = 0.0;
  bool pass = false;
  bool centered = false;
  /// Per (t, n) table at the selected (c, C).
  std::vector<ConcentrationCell> cells;

  nlohmann::json to_json() const;
};

/// Largest c on the grid for which P(|S_n| >= t n + C) <= 2 exp(-c t^2 n)
/// is not contradicted (Clopper-Pearson lower bound) at every (t, n), for
/// some C on the grid; ties go to the smaller C.
ConcentrationReport concentration_check(const TrajectoryStats& stats,
                                        const ConcentrationConfig& config);

struct MdpConfig {
  /// a_n = n^exponent with 1/2 < exponent < 1.
  double a_exponent = 0.75;
  /// Intervals [u, v] with 0 < u < v.
  std::vector<std::pair<double, double>> gammas{{1.0, 2.0}};
  double alpha = 0.05;

  void validate() const;
};

struct MdpCell {
  std::uint64_t n = 0;
  double u = 0.0;
  double v = 0.0;
  double a_n = 0.0;
  double s_n = 0.0;
  std::uint64_t count = 0;
  std::size_t m = 0;
  /// (1 / s_n) ln P(T_n in [u, v]); for censored cells the value from the
  /// Clopper-Pearson upper bound.
  double value = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double target = 0.0;
  double gap = 0.0;
  bool censored = false;
};

struct MdpReport {
  std::string statistic;
  double a_exponent = 0.0;
  std::vector<MdpCell> cells;
  /// Per interval: gap at the largest n < gap at the smallest n.
  std::vector<bool> gap_shrinks;
  bool pass = false;
  std::string variance_class;
  bool prerequisite_ok = false;

  nlohmann::json to_json() const;
};

/// T_n = (S_n - mean_n) / (a_n sd_n / sqrt(n)) against the rate -u^2 / 2.
MdpReport mdp_check(const TrajectoryStats& stats, const MdpConfig& config);

/// Columns kind,n,t,u,v,count,m,estimate,ci_low,ci_high,reference,censored,pass.
std::string deviations_csv(const ConcentrationReport* concentration, const MdpReport* mdp);

}  // namespace cocycle
