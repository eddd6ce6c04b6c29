#include "cocycle/mclab.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <map>
#include <sstream>

#include "cocycle/parallel.hpp"
#include "cocycle/stats.hpp"

namespace cocycle {

namespace {

using nlohmann::json;
using stats::RunningMoments;

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void check_grid(const std::vector<std::uint64_t>& grid, const char* what) {
  if (grid.empty()) throw DomainError(std::string(what) + ": empty grid");
  for (std::size_t i = 0; i < grid.size(); ++i) {
    if (grid[i] < 1) throw DomainError(std::string(what) + ": grid entries must be >= 1");
    if (i > 0 && grid[i] <= grid[i - 1]) throw DomainError(std::string(what) + ": grid must be strictly increasing");
  }
}

std::size_t chunk_count(std::uint64_t m) { return static_cast<std::size_t>((m + kTrajectoryChunk - 1) / kTrajectoryChunk); }

// Deterministic uniform subsample: the `cap` trajectories with the smallest
// label hashes.
std::vector<std::uint64_t> reservoir(std::uint64_t m, std::size_t cap, std::uint64_t salt) {
  if (m <= cap) {
    std::vector<std::uint64_t> all(m);
    for (std::uint64_t t = 0; t < m; ++t) all[t] = t;
    return all;
  }
  std::vector<std::pair<std::uint64_t, std::uint64_t>> keyed(m);
  for (std::uint64_t t = 0; t < m; ++t) keyed[t] = {mix64(salt ^ mix64(t)), t};
  std::nth_element(keyed.begin(), keyed.begin() + static_cast<std::ptrdiff_t>(cap), keyed.end());
  std::vector<std::uint64_t> chosen(cap);
  for (std::size_t i = 0; i < cap; ++i) chosen[i] = keyed[i].second;
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

// Values at or below this are rounding noise of an exact zero.
constexpr double kZeroFloor = 1e-12;

// Fits ln y = a + b x by least squares; returns false with fewer than 3 points.
bool log_fit(const std::vector<double>& x, const std::vector<double>& y, stats::LinearFit& fit) {
  std::vector<double> fx, fy;
  for (std::size_t i = 0; i < x.size(); ++i) {
    if (y[i] > kZeroFloor && std::isfinite(y[i])) {
      fx.push_back(x[i]);
      fy.push_back(std::log(y[i]));
    }
  }
  if (fx.size() < 3) return false;
  fit = stats::ols(fx, fy);
  return true;
}

RateVerdict rate_verdict(bool fitted, double r2, double ci_high) {
  if (!fitted || r2 < 0.5) return RateVerdict::Undecided;
  return ci_high < 1.0 ? RateVerdict::Contracting : RateVerdict::NonContracting;
}

json num(double v) {
  if (std::isfinite(v)) return v;
  return nullptr;
}

}  // namespace

// --- TrajectoryStats -------------------------------------------------------

std::string TrajectoryStats::stats_csv() const {
  std::string out = "n,mean,var,m\n";
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    out += std::to_string(n_grid[i]) + "," + fmt17(mean[i]) + "," + fmt17(var[i]) + "," + std::to_string(m) + "\n";
  }
  return out;
}

std::string TrajectoryStats::samples_csv() const {
  std::string out = "n,traj,value\n";
  out.reserve(out.size() + samples.size() * sample_traj.size() * 32);
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    const std::string n = std::to_string(n_grid[i]) + ",";
    for (std::size_t r = 0; r < sample_traj.size(); ++r) {
      out += n;
      out += std::to_string(sample_traj[r]);
      out += ',';
      out += fmt17(samples[i][r]);
      out += '\n';
    }
  }
  return out;
}

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  return cells;
}

double parse_double(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DomainError(where + ": not a number: '" + s + "'");
  }
}

std::uint64_t parse_uint(const std::string& s, const std::string& where) {
  std::uint64_t v = 0;
  const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
    throw DomainError(where + ": not a non-negative integer: '" + s + "'");
  }
  return v;
}

}  // namespace

TrajectoryStats TrajectoryStats::from_csv(const std::string& stats_text, const std::string& samples_text) {
  TrajectoryStats st;
  std::istringstream in(stats_text);
  std::string line;
  if (!std::getline(in, line) || line != "n,mean,var,m") throw DomainError("stats.csv: unexpected header");
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    const std::string where = "stats.csv line " + std::to_string(row);
    if (c.size() != 4) throw DomainError(where + ": expected 4 columns");
    st.n_grid.push_back(parse_uint(c[0], where));
    st.mean.push_back(parse_double(c[1], where));
    st.var.push_back(parse_double(c[2], where));
    st.m = parse_uint(c[3], where);
  }
  std::map<std::uint64_t, std::size_t> index;
  for (std::size_t i = 0; i < st.n_grid.size(); ++i) index[st.n_grid[i]] = i;
  st.samples.assign(st.n_grid.size(), {});
  std::istringstream sin(samples_text);
  if (!std::getline(sin, line) || line != "n,traj,value") throw DomainError("samples.csv: unexpected header");
  row = 1;
  std::vector<std::vector<std::uint64_t>> trajs(st.n_grid.size());
  while (std::getline(sin, line)) {
    ++row;
    if (line.empty()) continue;
    const auto c = split_csv_line(line);
    const std::string where = "samples.csv line " + std::to_string(row);
    if (c.size() != 3) throw DomainError(where + ": expected 3 columns");
    const std::uint64_t n = parse_uint(c[0], where);
    auto it = index.find(n);
    if (it == index.end()) throw DomainError(where + ": n not present in stats.csv");
    trajs[it->second].push_back(parse_uint(c[1], where));
    st.samples[it->second].push_back(parse_double(c[2], where));
  }
  if (!trajs.empty()) {
    st.sample_traj = trajs[0];
    for (const auto& t : trajs) {
      if (t != st.sample_traj) throw DomainError("samples.csv: trajectories differ between n values");
    }
  }
  st.cap = st.sample_traj.size();
  return st;
}

// --- simulate --------------------------------------------------------------

TrajectoryStats simulate(const EnsembleSpec& spec, const Direction& x0,
                         const std::vector<std::uint64_t>& n_grid, std::uint64_t m,
                         const SeedPath& seed, const SimulateOptions& options) {
  check_grid(n_grid, "simulate");
  if (m < 2) throw DomainError("simulate: m must be >= 2");
  if (x0.dim() != spec.dim) throw DomainError("simulate: x0 dimension mismatch");
  if (options.sample_cap < 1) throw DomainError("simulate: sample_cap must be >= 1");
  const Sampler sampler(spec);

  TrajectoryStats st;
  st.n_grid = n_grid;
  st.m = m;
  st.cap = options.sample_cap;
  st.seed = seed.master_seed;
  st.spec_digest = spec.digest();
  st.sample_traj = reservoir(m, options.sample_cap, mix64(seed.master_seed ^ seed.experiment));
  const std::size_t stored = st.sample_traj.size();
  const bool all_stored = stored == m;
  std::vector<std::int64_t> slot;
  if (!all_stored) {
    slot.assign(m, -1);
    for (std::size_t r = 0; r < stored; ++r) slot[st.sample_traj[r]] = static_cast<std::int64_t>(r);
  }
  st.samples.assign(n_grid.size(), std::vector<double>(stored));

  const std::size_t chunks = chunk_count(m);
  std::vector<std::vector<RunningMoments>> partial(chunks, std::vector<RunningMoments>(n_grid.size()));
  const std::uint64_t n_max = n_grid.back();

  parallel_for(chunks, options.workers, [&](std::size_t c) {
    Matrix g;
    Vector v(spec.dim), w(spec.dim);
    const std::uint64_t first = c * kTrajectoryChunk;
    const std::uint64_t last = std::min<std::uint64_t>(m, first + kTrajectoryChunk);
    for (std::uint64_t t = first; t < last; ++t) {
      Cursor cursor(sampler, seed.with_trajectory(t), 1);
      v = x0.vector();
      stats::CompensatedSum s;
      std::size_t gi = 0;
      const std::int64_t r = all_stored ? static_cast<std::int64_t>(t) : slot[t];
      for (std::uint64_t k = 1; k <= n_max; ++k) {
        cursor.next(g);
        w.noalias() = g * v;
        const double nrm = w.norm();
        s.add(std::log(nrm));
        v = w / nrm;
        if (k == n_grid[gi]) {
          const double value = s.value();
          partial[c][gi].add(value);
          if (r >= 0) st.samples[gi][static_cast<std::size_t>(r)] = value;
          ++gi;
        }
      }
    }
  });

  st.mean.resize(n_grid.size());
  st.var.resize(n_grid.size());
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    RunningMoments total;
    for (std::size_t c = 0; c < chunks; ++c) total.merge(partial[c][i]);
    st.mean[i] = total.mean;
    st.var[i] = total.variance();
  }
  return st;
}

std::vector<double> increments(const EnsembleSpec& spec, const Direction& x0, std::uint64_t n,
                               const SeedPath& seed, std::uint64_t traj) {
  if (n < 1) throw DomainError("increments: n must be >= 1");
  if (x0.dim() != spec.dim) throw DomainError("increments: x0 dimension mismatch");
  const Sampler sampler(spec);
  Cursor cursor(sampler, seed.with_trajectory(traj), 1);
  std::vector<double> out;
  out.reserve(n);
  Matrix g;
  Vector v = x0.vector(), w(spec.dim);
  for (std::uint64_t k = 1; k <= n; ++k) {
    cursor.next(g);
    w.noalias() = g * v;
    const double nrm = w.norm();
    out.push_back(std::log(nrm));
    v = w / nrm;
  }
  return out;
}

// --- contraction tail --------------------------------------------------------

std::string to_string(RateVerdict v) {
  switch (v) {
    case RateVerdict::Contracting:
      return "Contracting";
    case RateVerdict::NonContracting:
      return "NonContracting";
    case RateVerdict::Undecided:
      return "Undecided";
  }
  return "";
}

json TailCurve::to_json() const {
  json rows = json::array();
  for (std::size_t i = 0; i < k_grid.size(); ++i) {
    rows.push_back({{"k", k_grid[i]}, {"prob", prob[i]}, {"count", count[i]}, {"censored", static_cast<bool>(censored[i])}, {"prob_upper", prob_upper[i]}});
  }
  return {{"ell", ell}, {"gamma", num(gamma)}, {"gamma_ci", {num(gamma_ci_low), num(gamma_ci_high)}},
          {"log_c", num(log_c)}, {"r2", r2}, {"fit_points", fit_points}, {"verdict", to_string(verdict)},
          {"mc", mc}, {"rows", rows}};
}

TailCurve contraction_tail(const EnsembleSpec& spec, std::uint64_t j,
                           const std::vector<std::pair<Direction, Direction>>& pairs, double ell,
                           const std::vector<std::uint64_t>& k_grid, std::uint64_t mc,
                           const SeedPath& seed, std::size_t workers) {
  if (!(ell > 0.0)) throw DomainError("contraction_tail: ell must be positive");
  if (pairs.empty()) throw DomainError("contraction_tail: no direction pairs");
  if (mc < 1 || j < 1) throw DomainError("contraction_tail: need mc >= 1 and j >= 1");
  check_grid(k_grid, "contraction_tail");
  for (const auto& p : pairs) {
    if (p.first.dim() != spec.dim || p.second.dim() != spec.dim) throw DomainError("contraction_tail: pair dimension mismatch");
    if (projective_distance(p.first, p.second) < 1e-6) throw DomainError("contraction_tail: pair distance below 1e-6");
  }
  const Sampler sampler(spec);
  const std::size_t np = pairs.size(), nk = k_grid.size();
  const std::size_t chunks = chunk_count(mc);
  std::vector<std::vector<std::uint64_t>> partial(chunks, std::vector<std::uint64_t>(np * nk, 0));
  const std::uint64_t k_max = k_grid.back();

  parallel_for(chunks, workers, [&](std::size_t c) {
    const int d = spec.dim;
    std::vector<Matrix> gs(k_max);
    Vector vx(d), w(d), gx(d), gw(d), r(d);
    const std::uint64_t first = c * kTrajectoryChunk;
    const std::uint64_t last = std::min<std::uint64_t>(mc, first + kTrajectoryChunk);
    for (std::uint64_t t = first; t < last; ++t) {
      Cursor cursor(sampler, seed.with_trajectory(t), j);
      for (auto& g : gs) cursor.next(g);
      for (std::size_t p = 0; p < np; ++p) {
        // y = cs * vx + exp(log_s) * w with w a unit vector orthogonal to vx.
        vx = pairs[p].first.vector();
        const Vector& y = pairs[p].second.vector();
        double cs = y.dot(vx);
        w = y - cs * vx;
        double log_s = std::log(w.norm());
        w /= w.norm();
        std::size_t gi = 0;
        for (std::uint64_t k = 1; k <= k_max; ++k) {
          const Matrix& g = gs[k - 1];
          gx.noalias() = g * vx;
          gw.noalias() = g * w;
          const double nx = gx.norm();
          vx = gx / nx;
          const double proj = gw.dot(vx);
          r = gw - proj * vx;
          const double nr = r.norm();
          const double s = std::exp(log_s);
          const double big = cs * nx + s * proj;
          const double small = s * nr;
          const double ny = std::hypot(big, small);
          cs = big / ny;
          log_s += std::log(nr) - std::log(ny);
          w = r / nr;
          if (k == k_grid[gi]) {
            if (log_s >= -ell * static_cast<double>(k)) ++partial[c][p * nk + gi];
            ++gi;
          }
        }
      }
    }
  });

  TailCurve tc;
  tc.k_grid = k_grid;
  tc.ell = ell;
  tc.mc = mc;
  tc.prob.assign(nk, 0.0);
  tc.count.assign(nk, 0);
  tc.censored.assign(nk, false);
  tc.prob_upper.assign(nk, 0.0);
  for (std::size_t i = 0; i < nk; ++i) {
    std::uint64_t best = 0;
    for (std::size_t p = 0; p < np; ++p) {
      std::uint64_t total = 0;
      for (std::size_t c = 0; c < chunks; ++c) total += partial[c][p * nk + i];
      best = std::max(best, total);
    }
    tc.count[i] = best;
    tc.prob[i] = static_cast<double>(best) / static_cast<double>(mc);
    tc.censored[i] = best == 0;
    tc.prob_upper[i] = stats::clopper_pearson(best, mc).second;
  }
  std::vector<double> ks(k_grid.begin(), k_grid.end());
  stats::LinearFit fit;
  const bool fitted = log_fit(ks, tc.prob, fit);
  if (fitted) {
    const auto ci = fit.slope_ci();
    tc.gamma = std::exp(fit.slope);
    tc.gamma_ci_low = std::exp(ci.first);
    tc.gamma_ci_high = std::exp(ci.second);
    tc.log_c = fit.intercept;
    tc.r2 = fit.r2;
    tc.fit_points = fit.n;
  } else {
    tc.gamma = tc.gamma_ci_low = tc.gamma_ci_high = tc.log_c = std::numeric_limits<double>::quiet_NaN();
  }
  tc.verdict = rate_verdict(fitted, tc.r2, tc.gamma_ci_high);
  return tc;
}

// --- approximation coefficients ---------------------------------------------

json ApproxCurve::to_json() const {
  json rows = json::array();
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    rows.push_back({{"r", r_grid[i]}, {"coef", coef[i]}, {"std_error", coef_std_error[i]}, {"boundary_coef", boundary_coef[i]}});
  }
  return {{"quantity", "approximation surrogate"}, {"rho", num(rho)}, {"rho_ci", {num(rho_ci_low), num(rho_ci_high)}},
          {"r2", r2}, {"fit_points", fit_points}, {"verdict", to_string(verdict)}, {"mc", mc}, {"rows", rows}};
}

ApproxCurve approx_coefficients(const EnsembleSpec& spec, std::uint64_t k,
                                const std::vector<std::uint64_t>& r_grid, std::uint64_t mc,
                                const SeedPath& seed, const Matrix& boundary,
                                const Direction& x0, int grid_size, std::size_t workers) {
  if (k < 1 || mc < 2) throw DomainError("approx_coefficients: need k >= 1 and mc >= 2");
  if (r_grid.empty()) throw DomainError("approx_coefficients: empty r grid");
  for (std::size_t i = 0; i < r_grid.size(); ++i) {
    if (r_grid[i] >= k) throw DomainError("approx_coefficients: r must be < k");
    if (i > 0 && r_grid[i] <= r_grid[i - 1]) throw DomainError("approx_coefficients: r grid must be strictly increasing");
  }
  if (boundary.rows() != spec.dim || boundary.cols() != spec.dim) throw DomainError("approx_coefficients: boundary dimension mismatch");
  if (x0.dim() != spec.dim) throw DomainError("approx_coefficients: x0 dimension mismatch");
  const int d = spec.dim;
  const Sampler sampler(spec);

  // Net directions as the columns of one matrix.
  std::vector<Vector> net;
  {
    const double pi = 3.14159265358979323846;
    if (d == 2) {
      for (int i = 0; i < grid_size; ++i) {
        Vector v(2);
        v << std::cos(pi * i / grid_size), std::sin(pi * i / grid_size);
        net.push_back(v);
      }
    } else {
      for (int i = 0; i < grid_size; ++i) {
        Stream s(SeedPath{0x617070ULL, 0, static_cast<std::uint64_t>(d)}, static_cast<std::uint64_t>(i));
        Vector v(d);
        for (int q = 0; q < d; ++q) v(q) = s.normal();
        net.push_back(v / v.norm());
      }
    }
  }
  Matrix X(d, grid_size);
  for (int i = 0; i < grid_size; ++i) X.col(i) = net[static_cast<std::size_t>(i)];
  const std::size_t npairs = static_cast<std::size_t>(grid_size) * static_cast<std::size_t>(grid_size - 1) / 2;
  const std::size_t nr = r_grid.size();

  // Powers A^p x0 for p = 0 .. k-1, normalized.
  std::vector<Vector> boundary_start(k);
  {
    Vector u = x0.vector();
    for (std::uint64_t p = 0; p < k; ++p) {
      boundary_start[p] = u;
      u = boundary * u;
      u /= u.norm();
    }
  }

  const std::size_t chunks = chunk_count(mc);
  std::vector<std::vector<RunningMoments>> pair_moments(chunks, std::vector<RunningMoments>(nr * npairs));
  std::vector<std::vector<RunningMoments>> bnd_moments(chunks, std::vector<RunningMoments>(nr));

  parallel_for(chunks, workers, [&](std::size_t c) {
    std::vector<Matrix> gs(k);
    Matrix P(d, d), PX(d, grid_size), GPX(d, grid_size);
    Vector u(d), tmp(d);
    const std::uint64_t first = c * kTrajectoryChunk;
    const std::uint64_t last = std::min<std::uint64_t>(mc, first + kTrajectoryChunk);
    std::vector<double> sig(static_cast<std::size_t>(grid_size));
    for (std::uint64_t t = first; t < last; ++t) {
      Cursor cursor(sampler, seed.with_trajectory(t), 1);
      for (auto& g : gs) cursor.next(g);
      const Matrix& gk = gs[k - 1];
      // X_k = sigma(g_k, g_{k-1} ... g_1 x0).
      u = x0.vector();
      for (std::uint64_t q = 0; q + 1 < k; ++q) {
        tmp.noalias() = gs[q] * u;
        u = tmp / tmp.norm();
      }
      const double xk = std::log((gk * u).norm());
      // P = g_{k-1} ... g_{k-r}, extended one factor at a time.
      P.setIdentity();
      std::uint64_t have = 0;
      for (std::size_t ri = 0; ri < nr; ++ri) {
        while (have < r_grid[ri]) {
          ++have;
          P = P * gs[k - 1 - have];
          P /= P.cwiseAbs().maxCoeff();
        }
        PX.noalias() = P * X;
        GPX.noalias() = gk * PX;
        for (int i = 0; i < grid_size; ++i) {
          sig[static_cast<std::size_t>(i)] = std::log(GPX.col(i).norm()) - std::log(PX.col(i).norm());
        }
        std::size_t pi = 0;
        for (int a = 0; a < grid_size; ++a) {
          for (int b = a + 1; b < grid_size; ++b) {
            pair_moments[c][ri * npairs + pi].add(std::abs(sig[static_cast<std::size_t>(a)] - sig[static_cast<std::size_t>(b)]));
            ++pi;
          }
        }
        const Vector& start = boundary_start[k - r_grid[ri] - 1];
        tmp.noalias() = P * start;
        const double approx = std::log((gk * tmp).norm()) - std::log(tmp.norm());
        bnd_moments[c][ri].add(std::abs(xk - approx));
      }
    }
  });

  ApproxCurve ac;
  ac.r_grid = r_grid;
  ac.mc = mc;
  ac.coef.assign(nr, 0.0);
  ac.coef_std_error.assign(nr, 0.0);
  ac.boundary_coef.assign(nr, 0.0);
  for (std::size_t ri = 0; ri < nr; ++ri) {
    double best = -1.0, best_se = 0.0;
    for (std::size_t p = 0; p < npairs; ++p) {
      RunningMoments total;
      for (std::size_t c = 0; c < chunks; ++c) total.merge(pair_moments[c][ri * npairs + p]);
      if (total.mean > best) {
        best = total.mean;
        best_se = total.std_error();
      }
    }
    ac.coef[ri] = std::max(best, 0.0);
    ac.coef_std_error[ri] = best_se;
    RunningMoments b;
    for (std::size_t c = 0; c < chunks; ++c) b.merge(bnd_moments[c][ri]);
    ac.boundary_coef[ri] = b.mean;
  }
  std::vector<double> rs(r_grid.begin(), r_grid.end());
  stats::LinearFit fit;
  const bool fitted = log_fit(rs, ac.coef, fit);
  if (fitted) {
    const auto ci = fit.slope_ci();
    ac.rho = std::exp(fit.slope);
    ac.rho_ci_low = std::exp(ci.first);
    ac.rho_ci_high = std::exp(ci.second);
    ac.r2 = fit.r2;
    ac.fit_points = fit.n;
  } else {
    ac.rho = ac.rho_ci_low = ac.rho_ci_high = std::numeric_limits<double>::quiet_NaN();
  }
  ac.verdict = rate_verdict(fitted, ac.r2, ac.rho_ci_high);
  return ac;
}

// --- variance profile --------------------------------------------------------

std::string to_string(VarianceClass c) {
  switch (c) {
    case VarianceClass::Bounded:
      return "Bounded";
    case VarianceClass::Divergent:
      return "Divergent";
    case VarianceClass::Undecided:
      return "Undecided";
  }
  return "";
}

json VarianceProfile::to_json() const {
  json rows = json::array();
  for (std::size_t i = 0; i < n_grid.size(); ++i) {
    rows.push_back({{"n", n_grid[i]}, {"var", var[i]}, {"ci", {ci_low[i], ci_high[i]}}});
  }
  return {{"classification", to_string(classification)}, {"linear_growth", linear_growth}, {"rows", rows}};
}

VarianceProfile variance_profile(const TrajectoryStats& st, const VarianceConfig& cfg) {
  if (st.m < 30) throw DomainError("variance_profile: need m >= 30");
  if (st.n_grid.empty()) throw DomainError("variance_profile: empty grid");
  if (!(cfg.factor >= 1.0) || !(cfg.quartile > 0.0 && cfg.quartile <= 0.5)) {
    throw DomainError("variance_profile: need factor >= 1 and quartile in (0, 0.5]");
  }
  VarianceProfile vp;
  vp.n_grid = st.n_grid;
  vp.var = st.var;
  const std::size_t n = st.n_grid.size();
  for (std::size_t i = 0; i < n; ++i) {
    const auto ci = stats::variance_ci(st.var[i], static_cast<std::size_t>(st.m), cfg.alpha);
    vp.ci_low.push_back(ci.first);
    vp.ci_high.push_back(ci.second);
  }
  const std::size_t q = std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(cfg.quartile * static_cast<double>(n))));
  double bottom_max = 0.0, bottom_hi = 0.0;
  for (std::size_t i = 0; i < q; ++i) {
    if (vp.var[i] >= bottom_max) {
      bottom_max = vp.var[i];
      bottom_hi = vp.ci_high[i];
    }
  }
  double top_min = std::numeric_limits<double>::infinity(), top_lo = 0.0;
  for (std::size_t i = n - q; i < n; ++i) {
    if (vp.var[i] <= top_min) {
      top_min = vp.var[i];
      top_lo = vp.ci_low[i];
    }
  }
  double max_low = 0.0, min_high = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    max_low = std::max(max_low, vp.ci_low[i]);
    min_high = std::min(min_high, vp.ci_high[i]);
  }
  if (n >= 2 && top_min > cfg.factor * bottom_max && top_lo > bottom_hi) {
    vp.classification = VarianceClass::Divergent;
  } else if (max_low <= min_high) {
    vp.classification = VarianceClass::Bounded;
  } else {
    vp.classification = VarianceClass::Undecided;
  }
  vp.linear_growth = std::numeric_limits<double>::infinity();
  for (std::size_t i = n / 2; i < n; ++i) {
    vp.linear_growth = std::min(vp.linear_growth, vp.var[i] / static_cast<double>(st.n_grid[i]));
  }
  return vp;
}

}  // namespace cocycle
