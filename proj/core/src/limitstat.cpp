#include "cocycle/limitstat.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <limits>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "cocycle/errors.hpp"
#include "cocycle/parallel.hpp"
#include "cocycle/stats.hpp"

namespace cocycle {

namespace {

using nlohmann::json;
using stats::normal_cdf;

constexpr double kInf = std::numeric_limits<double>::infinity();

void check_samples(std::span<const double> z, const char* what, std::size_t min_count) {
  if (z.size() < min_count) {
    throw DomainError(std::string(what) + ": need at least " + std::to_string(min_count) + " samples");
  }
  for (double v : z) {
    if (!std::isfinite(v)) throw DomainError(std::string(what) + ": non-finite sample");
  }
}

std::vector<double> sorted_copy(std::span<const double> z) {
  std::vector<double> x(z.begin(), z.end());
  std::sort(x.begin(), x.end());
  return x;
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string param_key(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%g", v);
  return buf;
}

using GK = boost::math::quadrature::gauss_kronrod<double, 15>;

// Adaptive Gauss-Kronrod with an absolute error target.
template <class F>
double adaptive(const F& f, double a, double b, double tol, int depth) {
  double err = 0.0;
  const double v = GK::integrate(f, a, b, 0, 0.0, &err);
  if (err <= tol || depth == 0) return v;
  const double mid = 0.5 * (a + b);
  return adaptive(f, a, mid, 0.5 * tol, depth - 1) + adaptive(f, mid, b, 0.5 * tol, depth - 1);
}

// Integral of |c - Phi(x)|^q over [a, b], to 1e-10.
double piece_integral(double c, double a, double b, double q) {
  if (!(b > a)) return 0.0;
  auto f = [c, q](double x) {
    const double d = std::abs(c - normal_cdf(x));
    return q == 1.0 ? d : std::pow(d, q);
  };
  // Split at the crossing Phi(x) = c, where the integrand has a kink.
  if (c > 0.0 && c < 1.0) {
    const double cross = stats::normal_quantile(c);
    if (cross > a && cross < b) {
      return adaptive(f, a, cross, 0.5e-10, 30) + adaptive(f, cross, b, 0.5e-10, 30);
    }
  }
  return adaptive(f, a, b, 1e-10, 30);
}

// Integral of (1 - Phi(x))^q over [L, infinity).
double gaussian_tail_integral(double L, double q) {
  auto f = [q](double x) { return std::pow(normal_cdf(-x), q); };
  // Beyond L + 40 / q the integrand is below exp(-800).
  return adaptive(f, L, L + 40.0 / std::min(q, 1.0), 1e-15, 30);
}

}  // namespace

Standardized standardize(std::span<const double> samples) {
  check_samples(samples, "standardize", 2);
  stats::CompensatedSum s;
  for (double v : samples) s.add(v);
  Standardized out;
  out.mean = s.value() / static_cast<double>(samples.size());
  stats::CompensatedSum ss;
  for (double v : samples) ss.add((v - out.mean) * (v - out.mean));
  out.sd = std::sqrt(ss.value() / static_cast<double>(samples.size()));
  if (!(out.sd > 0.0)) throw DomainError("standardize: degenerate sample (sd = 0)");
  out.z.reserve(samples.size());
  for (double v : samples) out.z.push_back((v - out.mean) / out.sd);
  return out;
}

double weighted_kolmogorov(std::span<const double> z, double s) {
  if (!(s >= 0.0)) throw DomainError("weighted_kolmogorov: s must be >= 0");
  check_samples(z, "weighted_kolmogorov", kMinDistanceSamples);
  const std::vector<double> x = sorted_copy(z);
  const double m = static_cast<double>(x.size());
  auto weight = [s](double t) { return s == 0.0 ? 1.0 : 1.0 + std::pow(std::abs(t), s); };
  double best = 0.0;
  std::size_t i = 0;
  while (i < x.size()) {
    std::size_t j = i;
    while (j < x.size() && x[j] == x[i]) ++j;
    const double t = x[i];
    if (s == 0.0 || std::abs(t) <= kKolmogorovRange) {
      const double phi = normal_cdf(t);
      const double below = static_cast<double>(i) / m;
      const double at = static_cast<double>(j) / m;
      best = std::max(best, weight(t) * std::max(std::abs(below - phi), std::abs(at - phi)));
    }
    i = j;
  }
  for (int k = 0; k < kKolmogorovGridPoints; ++k) {
    const double t = -kKolmogorovRange + 2.0 * kKolmogorovRange * k / (kKolmogorovGridPoints - 1);
    const auto at = static_cast<double>(std::upper_bound(x.begin(), x.end(), t) - x.begin()) / m;
    best = std::max(best, weight(t) * std::abs(at - normal_cdf(t)));
  }
  return best;
}

LqDistance lq_distance(std::span<const double> z, double q) {
  if (!(q > 0.0)) throw DomainError("lq_distance: q must be > 0");
  check_samples(z, "lq_distance", kMinDistanceSamples);
  const std::vector<double> x = sorted_copy(z);
  const double m = static_cast<double>(x.size());
  const double lo = std::min(-kLqRange, x.front());
  const double hi = std::max(kLqRange, x.back());
  stats::CompensatedSum total;
  double left = lo;
  std::size_t i = 0;
  while (i < x.size()) {
    std::size_t j = i;
    while (j < x.size() && x[j] == x[i]) ++j;
    total.add(piece_integral(static_cast<double>(i) / m, left, x[i], q));
    left = x[i];
    i = j;
  }
  total.add(piece_integral(1.0, left, hi, q));
  const double integral = std::max(total.value(), 0.0);
  LqDistance out;
  out.value = std::pow(integral, 1.0 / q);
  // The remainder beyond [lo, hi] is a pure Gaussian tail on both sides.
  const double tail = gaussian_tail_integral(-lo, q) + gaussian_tail_integral(hi, q);
  out.tail_error = std::pow(integral + tail, 1.0 / q) - out.value;
  return out;
}

double wasserstein_p(std::span<const double> z, double p) {
  if (!(p >= 1.0)) throw DomainError("wasserstein_p: p must be >= 1");
  check_samples(z, "wasserstein_p", kMinDistanceSamples);
  const std::vector<double> x = sorted_copy(z);
  const double m = static_cast<double>(x.size());
  stats::CompensatedSum s;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double ref = stats::normal_quantile((static_cast<double>(i) + 0.5) / m);
    const double d = std::abs(x[i] - ref);
    s.add(p == 1.0 ? d : std::pow(d, p));
  }
  const double mean = s.value() / m;
  return p == 1.0 ? mean : std::pow(mean, 1.0 / p);
}

double moment_gap(std::span<const double> z, int a) {
  if (a < 1 || a > kMaxMoment) throw DomainError("moment_gap: a must be in [1, 8]");
  check_samples(z, "moment_gap", 1);
  std::vector<double> terms;
  terms.reserve(z.size());
  for (double v : z) {
    double t = 1.0;
    for (int k = 0; k < a; ++k) t *= v;
    terms.push_back(t);
  }
  // Sorting makes the sum independent of sample order.
  std::sort(terms.begin(), terms.end());
  stats::CompensatedSum s;
  for (double t : terms) s.add(t);
  return std::abs(s.value() / static_cast<double>(z.size()) - stats::normal_moment(a));
}

void DistanceRequest::validate() const {
  for (double s : s_grid) {
    if (!(s >= 0.0)) throw DomainError("analyses.distances.s: values must be >= 0");
  }
  for (double q : q_grid) {
    if (!(q > 0.0)) throw DomainError("analyses.distances.q: values must be > 0");
  }
  for (double p : p_grid) {
    if (!(p >= 1.0)) throw DomainError("analyses.distances.p: values must be >= 1");
  }
  for (int a : a_grid) {
    if (a < 1 || a > kMaxMoment) throw DomainError("analyses.distances.a: values must be in [1, 8]");
  }
}

json DistanceReport::to_json() const {
  auto table = [](const std::map<double, double>& mp) {
    json o = json::object();
    for (const auto& [k, v] : mp) o[param_key(k)] = num(v);
    return o;
  };
  json moments = json::object();
  for (const auto& [a, v] : moment_gaps) moments[std::to_string(a)] = num(v);
  return {{"n", n},
          {"sigma_n", num(sigma_n)},
          {"sample_mean", num(sample_mean)},
          {"sample_sd", num(sample_sd)},
          {"degenerate", degenerate},
          {"kolmogorov_s", table(kolmogorov_s)},
          {"lq", table(lq)},
          {"lq_tail_error", table(lq_tail_error)},
          {"wasserstein_p", table(wasserstein_p)},
          {"moment_gaps", moments},
          {"m", m}};
}

DistanceReport distance_report(std::uint64_t n, double sigma_n, std::span<const double> samples,
                               const DistanceRequest& request) {
  request.validate();
  check_samples(samples, "distance_report", kMinDistanceSamples);
  DistanceReport r;
  r.n = n;
  r.sigma_n = sigma_n;
  r.m = samples.size();
  std::vector<double> z;
  try {
    Standardized st = standardize(samples);
    r.sample_mean = st.mean;
    r.sample_sd = st.sd;
    z = std::move(st.z);
  } catch (const DomainError&) {
    // Point mass: centered samples are all zero.
    r.degenerate = true;
    r.sample_mean = samples[0];
    r.sample_sd = 0.0;
    z.assign(samples.size(), 0.0);
  }
  for (double s : request.s_grid) r.kolmogorov_s[s] = weighted_kolmogorov(z, s);
  for (double q : request.q_grid) {
    const LqDistance d = lq_distance(z, q);
    r.lq[q] = d.value;
    r.lq_tail_error[q] = d.tail_error;
  }
  for (double p : request.p_grid) r.wasserstein_p[p] = wasserstein_p(z, p);
  for (int a : request.a_grid) r.moment_gaps[a] = moment_gap(z, a);
  return r;
}

std::vector<DistanceReport> distance_reports(const TrajectoryStats& st, const DistanceRequest& request,
                                             std::size_t workers) {
  request.validate();
  if (st.samples.size() != st.n_grid.size()) throw DomainError("distance_reports: stats without samples");
  std::vector<DistanceReport> out(st.n_grid.size());
  parallel_for(st.n_grid.size(), workers, [&](std::size_t i) {
    const double sigma = i < st.var.size() ? std::sqrt(st.var[i]) : kInf;
    out[i] = distance_report(st.n_grid[i], sigma, st.samples[i], request);
  });
  return out;
}

std::string distances_csv(const std::vector<DistanceReport>& reports) {
  std::string out = "n,sigma_n,metric,param,value,error,m\n";
  for (const auto& r : reports) {
    const std::string head = std::to_string(r.n) + "," + fmt17(r.sigma_n) + ",";
    const std::string tail = "," + std::to_string(r.m) + "\n";
    for (const auto& [s, v] : r.kolmogorov_s) out += head + "kolmogorov," + param_key(s) + "," + fmt17(v) + ",0" + tail;
    for (const auto& [q, v] : r.lq) out += head + "lq," + param_key(q) + "," + fmt17(v) + "," + fmt17(r.lq_tail_error.at(q)) + tail;
    for (const auto& [p, v] : r.wasserstein_p) out += head + "wasserstein," + param_key(p) + "," + fmt17(v) + ",0" + tail;
    for (const auto& [a, v] : r.moment_gaps) out += head + "moment_gap," + std::to_string(a) + "," + fmt17(v) + ",0" + tail;
  }
  return out;
}

json RateFit::to_json() const {
  json pts = json::array();
  for (const auto& [x, y] : pairs) pts.push_back({x, y});
  return {{"pairs", pts},       {"slope", num(slope)}, {"slope_ci", {num(slope_ci_low), num(slope_ci_high)}},
          {"intercept", num(intercept)}, {"r2", num(r2)}, {"filtered", filtered}, {"no_rate", no_rate}};
}

RateFit rate_fit(const std::vector<std::pair<double, double>>& series) {
  RateFit rf;
  double last_sigma = -kInf;
  for (const auto& [sigma, dist] : series) {
    if (!(sigma > 0.0) || !std::isfinite(sigma)) throw DomainError("rate_fit: sigma_n must be positive and finite");
    if (!(sigma > last_sigma)) throw DomainError("rate_fit: sigma_n must be increasing");
    last_sigma = sigma;
    if (!(dist > 0.0) || !std::isfinite(dist)) {
      ++rf.filtered;
      continue;
    }
    rf.pairs.emplace_back(std::log(sigma), std::log(dist));
  }
  if (rf.pairs.size() < 4) throw DomainError("rate_fit: need at least 4 points with positive distance");
  std::vector<double> x, y;
  for (const auto& [a, b] : rf.pairs) {
    x.push_back(a);
    y.push_back(b);
  }
  const stats::LinearFit fit = stats::ols(x, y);
  const auto ci = fit.slope_ci();
  rf.slope = fit.slope;
  rf.slope_ci_low = ci.first;
  rf.slope_ci_high = ci.second;
  rf.intercept = fit.intercept;
  rf.r2 = fit.r2;
  rf.no_rate = rf.slope_ci_high >= 0.0;
  return rf;
}

std::vector<std::pair<double, double>> metric_series(const std::vector<DistanceReport>& reports,
                                                     const std::string& metric, double param) {
  std::vector<std::pair<double, double>> out;
  for (const auto& r : reports) {
    const std::map<double, double>* table = nullptr;
    if (metric == "kolmogorov") {
      table = &r.kolmogorov_s;
    } else if (metric == "lq") {
      table = &r.lq;
    } else if (metric == "wasserstein") {
      table = &r.wasserstein_p;
    } else if (metric == "moment_gap") {
      auto it = r.moment_gaps.find(static_cast<int>(param));
      if (it == r.moment_gaps.end()) throw DomainError("metric_series: moment not computed");
      out.emplace_back(r.sigma_n, it->second);
      continue;
    } else {
      throw DomainError("metric_series: unknown metric '" + metric + "'");
    }
    auto it = table->find(param);
    if (it == table->end()) throw DomainError("metric_series: parameter not computed");
    out.emplace_back(r.sigma_n, it->second);
  }
  return out;
}

// --- concentration -----------------------------------------------------------

void ConcentrationConfig::validate() const {
  if (t_grid.empty()) throw DomainError("analyses.concentration.t: empty grid");
  if (c_grid.empty()) throw DomainError("analyses.concentration.c: empty grid");
  if (C_grid.empty()) throw DomainError("analyses.concentration.C: empty grid");
  for (double t : t_grid) {
    if (!(t > 0.0)) throw DomainError("analyses.concentration.t: values must be > 0");
  }
  for (double c : c_grid) {
    if (!(c > 0.0)) throw DomainError("analyses.concentration.c: values must be > 0");
  }
  for (double c : C_grid) {
    if (!(c >= 0.0)) throw DomainError("analyses.concentration.C: values must be >= 0");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("analyses.concentration.alpha: must be in (0, 1)");
}

json ConcentrationReport::to_json() const {
  json rows = json::array();
  for (const auto& c : cells) {
    rows.push_back({{"n", c.n}, {"t", c.t}, {"count", c.count}, {"m", c.m}, {"p_hat", c.p_hat},
                    {"ci", {c.ci_low, c.ci_high}}, {"bound", c.bound}, {"pass", c.pass}});
  }
  return {{"c", c}, {"C", C}, {"pass", pass}, {"centered", centered},
          {"statistic", centered ? "|S_n - mean_n|" : "|S_n|"}, {"cells", rows}};
}

ConcentrationReport concentration_check(const TrajectoryStats& st, const ConcentrationConfig& cfg) {
  cfg.validate();
  if (st.samples.size() != st.n_grid.size() || st.n_grid.empty()) {
    throw DomainError("concentration_check: stats without samples");
  }
  // |S_n| (or centered) per grid point, sorted for counting.
  std::vector<std::vector<double>> absval(st.n_grid.size());
  for (std::size_t i = 0; i < st.n_grid.size(); ++i) {
    const auto& xs = st.samples[i];
    if (xs.empty()) throw DomainError("concentration_check: no samples at n = " + std::to_string(st.n_grid[i]));
    double centre = 0.0;
    if (cfg.centered) {
      stats::CompensatedSum s;
      for (double v : xs) s.add(v);
      centre = s.value() / static_cast<double>(xs.size());
    }
    for (double v : xs) absval[i].push_back(std::abs(v - centre));
    std::sort(absval[i].begin(), absval[i].end());
  }
  std::vector<double> cs = cfg.c_grid;
  std::sort(cs.begin(), cs.end());
  std::vector<double> Cs = cfg.C_grid;
  std::sort(Cs.begin(), Cs.end());

  auto cells_for = [&](double C) {
    std::vector<ConcentrationCell> cells;
    for (double t : cfg.t_grid) {
      for (std::size_t i = 0; i < st.n_grid.size(); ++i) {
        ConcentrationCell cell;
        cell.n = st.n_grid[i];
        cell.t = t;
        cell.m = absval[i].size();
        const double level = t * static_cast<double>(cell.n) + C;
        cell.count = static_cast<std::uint64_t>(absval[i].end() - std::lower_bound(absval[i].begin(), absval[i].end(), level));
        cell.p_hat = static_cast<double>(cell.count) / static_cast<double>(cell.m);
        const auto ci = stats::clopper_pearson(cell.count, cell.m, cfg.alpha);
        cell.ci_low = ci.first;
        cell.ci_high = ci.second;
        cells.push_back(cell);
      }
    }
    return cells;
  };
  auto passes = [](std::vector<ConcentrationCell>& cells, double c) {
    bool ok = true;
    for (auto& cell : cells) {
      cell.bound = 2.0 * std::exp(-c * cell.t * cell.t * static_cast<double>(cell.n));
      cell.pass = cell.ci_low <= cell.bound;
      ok = ok && cell.pass;
    }
    return ok;
  };

  ConcentrationReport best;
  best.centered = cfg.centered;
  best.c = 0.0;
  bool found = false;
  for (double C : Cs) {
    auto cells = cells_for(C);
    for (auto it = cs.rbegin(); it != cs.rend(); ++it) {
      if (found && *it <= best.c) break;
      if (passes(cells, *it)) {
        best.c = *it;
        best.C = C;
        best.cells = cells;
        found = true;
        break;
      }
    }
  }
  if (!found) {
    // Fall back to the empirical envelope C = max (|S_n| - t n).
    double env = 0.0;
    for (double t : cfg.t_grid) {
      for (std::size_t i = 0; i < st.n_grid.size(); ++i) {
        env = std::max(env, absval[i].back() - t * static_cast<double>(st.n_grid[i]));
      }
    }
    env = std::nextafter(env * (1.0 + 1e-12), kInf);
    auto cells = cells_for(env);
    for (auto it = cs.rbegin(); it != cs.rend(); ++it) {
      if (passes(cells, *it)) {
        best.c = *it;
        best.C = env;
        best.cells = cells;
        found = true;
        break;
      }
    }
  }
  if (!found) {
    best.C = Cs.front();
    best.cells = cells_for(best.C);
    passes(best.cells, cs.front());
  }
  best.pass = found && best.c > 0.0;
  return best;
}

// --- moderate deviations -----------------------------------------------------

void MdpConfig::validate() const {
  if (!(a_exponent > 0.5 && a_exponent < 1.0)) throw DomainError("analyses.mdp.a_exponent: must be in (0.5, 1)");
  if (gammas.empty()) throw DomainError("analyses.mdp.gammas: empty list");
  for (const auto& [u, v] : gammas) {
    if (!(u > 0.0)) throw DomainError("analyses.mdp.gammas: lower end must be > 0");
    if (!(v > u)) throw DomainError("analyses.mdp.gammas: upper end must exceed lower end");
  }
  if (!(alpha > 0.0 && alpha < 1.0)) throw DomainError("analyses.mdp.alpha: must be in (0, 1)");
}

json MdpReport::to_json() const {
  json rows = json::array();
  for (const auto& c : cells) {
    rows.push_back({{"n", c.n}, {"gamma", {c.u, num(c.v)}}, {"a_n", c.a_n}, {"s_n", c.s_n}, {"count", c.count},
                    {"m", c.m}, {"value", num(c.value)}, {"ci", {num(c.ci_low), num(c.ci_high)}},
                    {"target", c.target}, {"gap", num(c.gap)}, {"censored", c.censored}});
  }
  json shrink = json::array();
  for (bool b : gap_shrinks) shrink.push_back(b);
  return {{"statistic", statistic}, {"a_exponent", a_exponent}, {"cells", rows}, {"gap_shrinks", shrink},
          {"pass", pass}, {"variance_class", variance_class}, {"prerequisite_ok", prerequisite_ok}};
}

MdpReport mdp_check(const TrajectoryStats& st, const MdpConfig& cfg) {
  cfg.validate();
  if (st.samples.size() != st.n_grid.size() || st.n_grid.size() < 2) {
    throw DomainError("mdp_check: need samples at >= 2 grid points");
  }
  MdpReport rep;
  rep.statistic = "T_n = (S_n - mean_n) / (a_n * sd_n / sqrt(n))";
  rep.a_exponent = cfg.a_exponent;
  try {
    const VarianceProfile vp = variance_profile(st);
    rep.variance_class = to_string(vp.classification);
    rep.prerequisite_ok = vp.classification == VarianceClass::Divergent && vp.linear_growth > 0.0;
  } catch (const DomainError&) {
    rep.variance_class = "Undecided";
  }
  for (const auto& [u, v] : cfg.gammas) {
    for (std::size_t i = 0; i < st.n_grid.size(); ++i) {
      const auto& xs = st.samples[i];
      const double n = static_cast<double>(st.n_grid[i]);
      MdpCell cell;
      cell.n = st.n_grid[i];
      cell.u = u;
      cell.v = v;
      cell.a_n = std::pow(n, cfg.a_exponent);
      cell.s_n = cell.a_n * cell.a_n / n;
      cell.m = xs.size();
      cell.target = -0.5 * u * u;
      stats::CompensatedSum s;
      for (double x : xs) s.add(x);
      const double mean = s.value() / static_cast<double>(xs.size());
      stats::CompensatedSum ss;
      for (double x : xs) ss.add((x - mean) * (x - mean));
      const double sd = std::sqrt(ss.value() / static_cast<double>(xs.size()));
      if (!(sd > 0.0)) throw DomainError("mdp_check: degenerate sample at n = " + std::to_string(cell.n));
      const double scale = cell.a_n * sd / std::sqrt(n);
      for (double x : xs) {
        const double t = (x - mean) / scale;
        if (t >= u && t <= v) ++cell.count;
      }
      const auto ci = stats::clopper_pearson(cell.count, cell.m, cfg.alpha);
      cell.ci_low = ci.first > 0.0 ? std::log(ci.first) / cell.s_n : -kInf;
      cell.ci_high = std::log(ci.second) / cell.s_n;
      cell.censored = cell.count == 0;
      cell.value = cell.censored ? cell.ci_high
                                 : std::log(static_cast<double>(cell.count) / static_cast<double>(cell.m)) / cell.s_n;
      cell.gap = std::abs(cell.value - cell.target);
      rep.cells.push_back(cell);
    }
    const std::size_t base = rep.cells.size() - st.n_grid.size();
    rep.gap_shrinks.push_back(rep.cells.back().gap < rep.cells[base].gap);
  }
  rep.pass = std::all_of(rep.gap_shrinks.begin(), rep.gap_shrinks.end(), [](bool b) { return b; });
  return rep;
}

std::string deviations_csv(const ConcentrationReport* conc, const MdpReport* mdp) {
  std::string out = "kind,n,t,u,v,count,m,estimate,ci_low,ci_high,reference,censored,pass\n";
  if (conc != nullptr) {
    for (const auto& c : conc->cells) {
      out += "concentration," + std::to_string(c.n) + "," + fmt17(c.t) + ",,," + std::to_string(c.count) + "," +
             std::to_string(c.m) + "," + fmt17(c.p_hat) + "," + fmt17(c.ci_low) + "," + fmt17(c.ci_high) + "," +
             fmt17(c.bound) + "," + (c.count == 0 ? "1" : "0") + "," + (c.pass ? "1" : "0") + "\n";
    }
  }
  if (mdp != nullptr) {
    for (const auto& c : mdp->cells) {
      out += "mdp," + std::to_string(c.n) + ",," + fmt17(c.u) + "," + fmt17(c.v) + "," + std::to_string(c.count) + "," +
             std::to_string(c.m) + "," + fmt17(c.value) + "," + fmt17(c.ci_low) + "," + fmt17(c.ci_high) + "," +
             fmt17(c.target) + "," + (c.censored ? "1" : "0") + ",\n";
    }
  }
  return out;
}

}  // namespace cocycle
