// Acceptance runner: one PASS/FAIL line per criterion.
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include <nlohmann/json.hpp>

#include "cocycle/certify.hpp"
#include "cocycle/limitstat.hpp"
#include "cocycle/mclab.hpp"
#include "cocycle/parallel.hpp"
#include "cocycle/stats.hpp"
#include "pipeline.hpp"
#include "support.hpp"

using namespace cocycle;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = false;
  std::string detail;
};

std::string fmt(const char* f, double a) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, a);
  return buf;
}

template <class... T>
std::string join(const T&... parts) {
  std::ostringstream ss;
  ((ss << parts << ' '), ...);
  std::string s = ss.str();
  if (!s.empty()) s.pop_back();
  return s;
}

const SeedPath kSeed{20240601, experiment_id("acceptance"), 0};
std::size_t g_workers = 1;

PairSearchConfig search(int mc) {
  PairSearchConfig s;
  s.grid_size = 16;
  s.refine_rounds = 4;
  s.mc_per_pair = mc;
  s.validate_top = 8;
  s.workers = static_cast<int>(g_workers);
  return s;
}

TrajectoryStats subset(const TrajectoryStats& s, const std::vector<std::uint64_t>& ns) {
  TrajectoryStats out = s;
  out.n_grid.clear();
  out.samples.clear();
  out.mean.clear();
  out.var.clear();
  for (std::size_t i = 0; i < s.n_grid.size(); ++i) {
    if (std::find(ns.begin(), ns.end(), s.n_grid[i]) == ns.end()) continue;
    out.n_grid.push_back(s.n_grid[i]);
    out.samples.push_back(s.samples[i]);
    out.mean.push_back(s.mean[i]);
    out.var.push_back(s.var[i]);
  }
  return out;
}

// --- exact suite --------------------------------------------------------------

Outcome c1_sl2_identity() {
  testing_support::Fixtures fx(101);
  double worst = 0.0;
  for (int t = 0; t < 500; ++t) {
    const SquareMatrix h(fx.unimodular2());
    const Vector x = fx.unit(2), y = fx.unit(2);
    const Vector hx = h.values() * x, hy = h.values() * y;
    const double lhs = projective_distance(Direction(hx), Direction(hy)) * hx.norm() * hy.norm();
    worst = std::max(worst, std::abs(lhs - projective_distance(Direction(x), Direction(y))));
  }
  return {worst <= 1e-10, "max_abs_error=" + fmt("%.3g", worst)};
}

Outcome c2_contraction_inequality() {
  testing_support::Fixtures fx(102);
  double worst_b = 1e300, worst_t = 1e300;
  int checked = 0;
  while (checked < 10000) {
    const int d = 2 + checked % 3;
    const Matrix a = fx.matrix(d), b = fx.matrix(d);
    const Vector x = fx.unit(d), y = fx.unit(d);
    const double dxy = projective_distance(Direction(x), Direction(y));
    if (dxy < 1e-4) continue;
    const double lhs = projective_distance(Direction(a * x), Direction(a * y)) / dxy;
    const double rhs = projective_distance(Direction(b * x), Direction(b * y)) / dxy;
    worst_b = std::min(worst_b, c_bound(SquareMatrix(a), SquareMatrix(b)) + rhs - lhs);
    worst_t = std::min(worst_t, c_tilde(SquareMatrix(a), SquareMatrix(b)) + rhs - lhs);
    ++checked;
  }
  return {worst_b >= -1e-9 && worst_t >= -1e-9,
          join("min_slack_c=" + fmt("%.3g", worst_b), "min_slack_c_tilde=" + fmt("%.3g", worst_t))};
}

Outcome c3_cocycle() {
  testing_support::Fixtures fx(103);
  double add_err = 0.0, bound_excess = -1e300;
  for (int t = 0; t < 10000; ++t) {
    const int d = 2 + t % 3;
    const SquareMatrix g(fx.matrix(d)), h(fx.matrix(d));
    const Vector y = fx.unit(d);
    const double lhs = cocycle_sigma(SquareMatrix(g.values() * h.values()), y);
    const double rhs = cocycle_sigma(g, h.values() * y) + cocycle_sigma(h, y);
    add_err = std::max(add_err, std::abs(lhs - rhs));
    bound_excess = std::max(bound_excess, std::abs(cocycle_sigma(g, y)) - std::log(norm_N(g)));
  }
  return {add_err <= 1e-10 && bound_excess <= 1e-10,
          join("additivity_max_error=" + fmt("%.3g", add_err), "max(|sigma|-lnN)=" + fmt("%.3g", bound_excess))};
}

Outcome c4_eps0() {
  auto holds = [](double e) {
    const double l2 = std::log(2.0);
    return 1 - 2 * e * std::log(1.5) + 4 * e * e * std::pow(2.0, 2 * e) * l2 * l2 < 1 - e / 2;
  };
  double lo = 1e-9, hi = 1.0;
  for (int k = 0; k < 200; ++k) {
    const double mid = 0.5 * (lo + hi);
    (holds(mid) ? lo : hi) = mid;
  }
  const double e = solve_eps0();
  const bool ok = std::abs(e - lo) <= 1e-6 && holds(e - 1e-6) && !holds(hi);
  return {ok, join("eps*=" + fmt("%.10f", e), "oracle=" + fmt("%.10f", lo), "fails_at=" + fmt("%.10f", hi))};
}

Outcome c5_r_bound() {
  const double bound = r_bound(0.55, 1.0);
  // sup eps ln^2 eps on (0, 1) is 4 e^{-2}.
  const bool tail_ok = 4.0 * std::exp(-2.0) <= 0.55;
  stats::RunningMoments m;
  Stream s(kSeed.with_experiment(experiment_id("r_bound")), 0);
  for (int i = 0; i < 1000000; ++i) m.add(-std::log(s.uniform_open()));
  const bool mc_ok = std::abs(m.mean - 1.0) <= 3.0 * m.std_error();
  return {tail_ok && mc_ok && 1.0 <= bound,
          join("r_bound=" + fmt("%g", bound), "empirical=" + fmt("%.5f", m.mean), "se=" + fmt("%.2g", m.std_error()))};
}

// --- statistical suite -------------------------------------------------------

Outcome c6_certification() {
  const CertificateReport r = estimate_log_contraction(make_rotation_spec(2.0), 1, 8, search(10000), kSeed);
  const EnsembleSpec iso = make_fixed_spec(SquareMatrix::rotation(0.7).values());
  const CertificateReport i = estimate_log_contraction(iso, 1, 8, search(2000), kSeed);
  const CertificateReport ih = estimate_holder_contraction(iso, 1, 8, 0.5, search(2000), kSeed);
  const bool ok = r.verdict == Verdict::Certified && r.ci_high < 0.0 && i.verdict != Verdict::Certified &&
                  ih.verdict != Verdict::Certified;
  return {ok, join("estimate=" + fmt("%.4f", r.estimate), "ci_high=" + fmt("%.4f", r.ci_high),
                   "isometry=" + to_string(i.verdict) + "/" + to_string(ih.verdict))};
}

Outcome c7_perturbation() {
  const EnsembleSpec base = make_rotation_spec(2.0);
  const EnsembleSpec pert = make_perturbed_spec(base, 0.02);
  const CertificateReport theta = perturbation_theta(pert, 1, 4, 8, 2000, kSeed);
  const CertificateReport theta0 = perturbation_theta(make_perturbed_spec(base, 0.0), 1, 4, 8, 2000, kSeed);
  const CertificateReport b = estimate_log_contraction(base, 1, 8, search(10000), kSeed);
  const CertificateReport p = estimate_log_contraction(pert, 1, 8, search(10000), kSeed);
  const bool ok = std::isfinite(theta.estimate) && theta0.estimate == 0.0 && b.verdict == Verdict::Certified &&
                  p.verdict == Verdict::Certified;
  return {ok, join("theta=" + fmt("%.4g", theta.estimate), "theta0=" + fmt("%g", theta0.estimate),
                   "perturbed_ci_high=" + fmt("%.4f", p.ci_high))};
}

Outcome c8_tail() {
  std::vector<std::uint64_t> ks;
  for (std::uint64_t k = 4; k <= 48; k += 4) ks.push_back(k);
  std::vector<std::pair<Direction, Direction>> pairs;
  const auto net = direction_net(2, 4);
  for (std::size_t a = 0; a < net.size(); ++a) {
    for (std::size_t b = a + 1; b < net.size(); ++b) pairs.emplace_back(Direction(net[a]), Direction(net[b]));
  }
  const TailCurve c = contraction_tail(make_rotation_spec(2.0), 1, pairs, 0.1, ks, 100000, kSeed, g_workers);
  const bool ok = c.gamma > 0.0 && c.gamma < 0.99 && c.r2 > 0.9;
  return {ok, join("gamma=" + fmt("%.4f", c.gamma), "r2=" + fmt("%.4f", c.r2),
                   "fit_points=" + std::to_string(c.fit_points))};
}

Outcome c9_approx() {
  std::vector<std::uint64_t> rs;
  for (std::uint64_t r = 2; r <= 24; r += 2) rs.push_back(r);
  const ApproxCurve c = approx_coefficients(make_rotation_spec(2.0), 32, rs, 10000, kSeed, Matrix::Identity(2, 2),
                                            Direction::basis(2, 0), 8, g_workers);
  const bool ok = c.rho < 1.0 && c.r2 > 0.9;
  return {ok, join("rho=" + fmt("%.4f", c.rho), "r2=" + fmt("%.4f", c.r2))};
}

struct RateRun {
  RateFit kolmogorov, wasserstein;
  double kolmogorov_last = 0.0;
};

const RateRun& rate_run() {
  static const RateRun run = [] {
    const std::vector<std::uint64_t> ns{256, 512, 1024, 2048, 4096};
    SimulateOptions o;
    o.workers = g_workers;
    const TrajectoryStats s = simulate(make_rotation_spec(4.0, 0.02), Direction::basis(2, 0), ns, 100000,
                                       kSeed.with_experiment(experiment_id("rates")), o);
    DistanceRequest req;
    req.s_grid = {0.0};
    req.p_grid = {1.0};
    const auto reports = distance_reports(s, req, g_workers);
    RateRun r;
    r.kolmogorov = rate_fit(metric_series(reports, "kolmogorov", 0.0));
    r.wasserstein = rate_fit(metric_series(reports, "wasserstein", 1.0));
    r.kolmogorov_last = reports.back().kolmogorov_s.at(0.0);
    return r;
  }();
  return run;
}

Outcome c10_berry_esseen() {
  const RateRun& r = rate_run();
  const bool ok = r.kolmogorov_last < 0.02 && r.kolmogorov.slope >= -1.4 && r.kolmogorov.slope <= -0.6 &&
                  r.kolmogorov.r2 > 0.8;
  return {ok, join("ks_at_4096=" + fmt("%.4f", r.kolmogorov_last), "slope=" + fmt("%.3f", r.kolmogorov.slope),
                   "r2=" + fmt("%.3f", r.kolmogorov.r2))};
}

Outcome c11_wasserstein() {
  const RateRun& r = rate_run();
  const bool ok = r.wasserstein.slope >= -1.4 && r.wasserstein.slope <= -0.6;
  return {ok, join("slope=" + fmt("%.3f", r.wasserstein.slope), "r2=" + fmt("%.3f", r.wasserstein.r2))};
}

const TrajectoryStats& iid_stats() {
  static const TrajectoryStats s = [] {
    SimulateOptions o;
    o.workers = g_workers;
    return simulate(make_rotation_spec(2.0), Direction::basis(2, 0), {16, 32, 64, 128, 256, 512, 1024}, 100000,
                    kSeed.with_experiment(experiment_id("iid")), o);
  }();
  return s;
}

Outcome c12_concentration() {
  const TrajectoryStats s = subset(iid_stats(), {64, 128, 256});
  const double slope = std::abs(s.mean.back() / static_cast<double>(s.n_grid.back()));
  ConcentrationConfig cfg;
  for (double f : {0.5, 1.0, 1.5}) cfg.t_grid.push_back(f * slope);
  for (int k = 0; k <= 40; ++k) cfg.c_grid.push_back(std::pow(10.0, -4.0 + 0.125 * k));
  cfg.centered = true;
  const ConcentrationReport r = concentration_check(s, cfg);
  return {r.pass && r.c > 0.0, join("c=" + fmt("%.4g", r.c), "C=" + fmt("%g", r.C), "mean_slope=" + fmt("%.4f", slope))};
}

Outcome c13_variance() {
  EnsembleSpec cob;
  cob.family = Family::ContractingNorm;
  ContractingParams p;
  p.scale = 1.0;
  p.orthogonal = ContractingParams::Orthogonal::Conjugate;
  p.matrix = SquareMatrix::diagonal({3.0, 1.0 / 3.0}).values();
  p.alternate_inverse = true;
  cob.params = p;
  cob.validate();
  SimulateOptions o;
  o.workers = g_workers;
  const TrajectoryStats cs = simulate(cob, Direction::basis(2, 0), {65, 129, 257, 513, 1025}, 20000,
                                      kSeed.with_experiment(experiment_id("coboundary")), o);
  const VarianceProfile vc = variance_profile(cs);
  const VarianceProfile vi = variance_profile(subset(iid_stats(), {64, 128, 256, 512, 1024}));
  const bool ok = vc.classification == VarianceClass::Bounded && vi.classification == VarianceClass::Divergent &&
                  vi.linear_growth > 0.0;
  return {ok, join("coboundary=" + to_string(vc.classification), "iid=" + to_string(vi.classification),
                   "min_var_over_n=" + fmt("%.4f", vi.linear_growth))};
}

Outcome c14_mdp() {
  const TrajectoryStats s = subset(iid_stats(), {16, 32, 64, 128});
  MdpConfig cfg;
  cfg.a_exponent = 0.75;
  cfg.gammas = {{1.0, 2.0}};
  const MdpReport r = mdp_check(s, cfg);
  const MdpCell& first = r.cells.front();
  const MdpCell& last = r.cells.back();
  return {r.pass && last.gap < first.gap,
          join("gap_n16=" + fmt("%.4f", first.gap), "gap_n128=" + fmt("%.4f", last.gap),
               std::string("censored_n128=") + (last.censored ? "yes" : "no"))};
}

Outcome c15_markov() {
  EnsembleSpec indep;
  indep.family = Family::MarkovChain;
  MarkovParams ip;
  ip.modes = {{2.0, MarkovMode::Input::Uniform, 0.0}};
  ip.transition = {{1.0}};
  ip.initial = {1.0};
  indep.params = ip;
  indep.validate();
  const CertificateReport m = check_markov_contraction(indep, 2, 4, search(4000), 16, 4000, kSeed);
  const CertificateReport i = estimate_log_contraction(make_rotation_spec(2.0), 2, 4, search(4000), kSeed);
  const bool match = m.ci_low <= i.ci_high && i.ci_low <= m.ci_high;

  EnsembleSpec two;
  two.family = Family::MarkovChain;
  MarkovParams tp;
  tp.modes = {{4.0, MarkovMode::Input::Uniform, 0.0}, {1.2, MarkovMode::Input::Aligned, 0.0}};
  tp.transition = {{0.0, 1.0}, {1.0, 0.0}};
  tp.initial = {0.5, 0.5};
  two.params = tp;
  two.validate();
  const CertificateReport cond = check_markov_contraction(two, 2, 1, search(4000), 32, 4000, kSeed);
  const CertificateReport uncond = estimate_log_contraction(two, 2, 1, search(4000), kSeed);
  const bool ok = match && cond.verdict == Verdict::Refuted && uncond.ci_high < 0.0;
  return {ok, join("indep_markov=[" + fmt("%.3f", m.ci_low) + "," + fmt("%.3f", m.ci_high) + "]",
                   "indep_iid=[" + fmt("%.3f", i.ci_low) + "," + fmt("%.3f", i.ci_high) + "]",
                   "two_state=" + to_string(cond.verdict) + "(" + fmt("%.3f", cond.estimate) + ")",
                   "unconditional_ci_high=" + fmt("%.3f", uncond.ci_high))};
}

Outcome c16_determinism() {
  const fs::path dir = fs::temp_directory_path() / "cocycle_acceptance_determinism";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::vector<std::string> outputs;
  for (int workers : {1, 8}) {
    const fs::path out = dir / ("w" + std::to_string(workers));
    const nlohmann::json cfg = {{"schema", 1},
                                {"ensemble", make_rotation_spec(2.0, 0.5).to_json()},
                                {"n_grid", {8, 64, 256}},
                                {"m", 20000},
                                {"seed", 99},
                                {"workers", workers},
                                {"output_dir", out.string()}};
    const fs::path path = dir / ("cfg" + std::to_string(workers) + ".json");
    std::ofstream(path) << cfg.dump();
    std::ostringstream log;
    if (cli::cmd_simulate(path, log) != 0) return {false, "simulate failed: " + log.str()};
    std::ifstream in(out / "stats.csv", std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    outputs.push_back(ss.str());
  }
  fs::remove_all(dir);
  return {!outputs[0].empty() && outputs[0] == outputs[1], "bytes=" + std::to_string(outputs[0].size())};
}

struct Criterion {
  int id;
  const char* name;
  std::function<Outcome()> run;
};

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"cocycle acceptance runner"};
  std::string suite = "all";
  app.add_option("--suite", suite, "exact | statistical | all")->check(CLI::IsMember({"exact", "statistical", "all"}));
  app.add_option("--workers", g_workers, "worker threads")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);
  g_workers = resolve_workers(g_workers);

  const std::vector<Criterion> exact{
      {1, "sl2_projective_identity", c1_sl2_identity},
      {2, "contraction_inequality", c2_contraction_inequality},
      {3, "cocycle_additivity_and_bound", c3_cocycle},
      {4, "eps0_bisection", c4_eps0},
      {5, "r_bound_log_moment", c5_r_bound},
  };
  const std::vector<Criterion> statistical{
      {6, "certification", c6_certification},
      {7, "perturbation_closure", c7_perturbation},
      {8, "contraction_tail", c8_tail},
      {9, "approximation_surrogate", c9_approx},
      {10, "berry_esseen_rate", c10_berry_esseen},
      {11, "wasserstein_rate", c11_wasserstein},
      {12, "concentration", c12_concentration},
      {13, "variance_dichotomy", c13_variance},
      {14, "mdp_trend", c14_mdp},
      {15, "markov_checker", c15_markov},
      {16, "determinism", c16_determinism},
  };
  std::vector<Criterion> selected;
  if (suite != "statistical") selected.insert(selected.end(), exact.begin(), exact.end());
  if (suite != "exact") selected.insert(selected.end(), statistical.begin(), statistical.end());

  int failures = 0;
  for (const Criterion& c : selected) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = c.run();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    failures += o.pass ? 0 : 1;
    std::cout << (o.pass ? "PASS" : "FAIL") << " criterion " << c.id << " " << c.name << ": " << o.detail << " ("
              << fmt("%.1f", secs) << " s)" << std::endl;
  }
  std::cout << (failures == 0 ? "ACCEPTANCE PASS" : "ACCEPTANCE FAIL") << " " << selected.size() - failures << "/"
            << selected.size() << std::endl;
  return failures == 0 ? 0 : 1;
}
