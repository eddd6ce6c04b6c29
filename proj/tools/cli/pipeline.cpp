#include "pipeline.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>

#include "cocycle/digest.hpp"
#include "cocycle/errors.hpp"
#include "cocycle/parallel.hpp"

#ifndef COCYCLE_LAB_VERSION
#define COCYCLE_LAB_VERSION "0.0.0"
#endif

namespace cocycle::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;
using Clock = std::chrono::steady_clock;

constexpr const char* kManifest = "manifest.json";

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  return buf.str();
}

void write_file(const fs::path& path, const std::string& content) {
  std::error_code ec;
  if (path.has_parent_path()) fs::create_directories(path.parent_path(), ec);
  if (ec) throw std::runtime_error("cannot create directory " + path.parent_path().string() + ": " + ec.message());
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
  out.close();
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

std::string pretty(const json& j) { return j.dump(2) + "\n"; }

double seconds_since(Clock::time_point start) {
  return std::chrono::duration<double>(Clock::now() - start).count();
}

SeedPath stage_seed(const ExperimentConfig& c, const std::string& name) {
  return SeedPath{c.seed, experiment_id(name.c_str()), 0};
}

// Manifest of the output directory, merged across commands of one config.
class Manifest {
 public:
  Manifest(const ExperimentConfig& c, const fs::path& dir) : dir_(dir) {
    const fs::path path = dir / kManifest;
    if (fs::exists(path)) {
      try {
        json old = json::parse(read_file(path));
        if (old.value("config_digest", "") == c.digest()) doc_ = old;
      } catch (const std::exception&) {
        doc_ = json();
      }
    }
    if (doc_.is_null()) doc_ = {{"files", json::object()}, {"stages", json::object()}};
    doc_["schema"] = 1;
    doc_["tool"] = "cocycle_lab";
    doc_["version"] = tool_version();
    doc_["config_digest"] = c.digest();
    doc_["spec_digest"] = c.ensemble.digest();
    doc_["seed"] = c.seed;
  }

  void add(const std::string& name, const std::string& content) {
    write_file(dir_ / name, content);
    doc_["files"][name] = sha256_hex(content);
  }
  void stage(const std::string& name, double secs) { doc_["stages"][name] = secs; }
  void save() const { write_file(dir_ / kManifest, pretty(doc_)); }

 private:
  fs::path dir_;
  json doc_;
};

template <class Fn>
int guarded(const char* command, std::ostream& log, Fn&& body) {
  try {
    return body();
  } catch (const DigestMismatch& e) {
    log << command << ": " << e.what() << "\n";
    return kExitDigestMismatch;
  } catch (const std::exception& e) {
    log << command << ": " << e.what() << "\n";
    return kExitInputError;
  }
}

TrajectoryStats restrict_grid(const TrajectoryStats& st, const std::vector<std::uint64_t>& ns, const std::string& path) {
  if (ns.empty()) return st;
  TrajectoryStats out = st;
  out.n_grid.clear();
  out.samples.clear();
  out.mean.clear();
  out.var.clear();
  for (std::uint64_t n : ns) {
    std::size_t i = 0;
    while (i < st.n_grid.size() && st.n_grid[i] != n) ++i;
    if (i == st.n_grid.size()) throw DomainError(path + ": n = " + std::to_string(n) + " is not in the stats grid");
    out.n_grid.push_back(n);
    out.samples.push_back(st.samples[i]);
    out.mean.push_back(st.mean[i]);
    out.var.push_back(st.var[i]);
  }
  return out;
}

void check_digest(const json& manifest, const fs::path& file) {
  const std::string name = file.filename().string();
  const json& files = manifest.at("files");
  if (!files.contains(name)) throw DigestMismatch(name + " is not listed in the manifest");
  const std::string expect = files.at(name).get<std::string>();
  const std::string got = sha256_file(file);
  if (got != expect) throw DigestMismatch("digest mismatch for " + file.string());
}

int run_certify(const ExperimentConfig& c, std::ostream& log) {
  const auto start = Clock::now();
  const std::size_t workers = resolve_workers(c.workers);
  std::vector<CertificateReport> reports;
  json certs = json::array();
  for (const auto& req : c.certifications) {
    CertificateReport r = run_certification(req, c, workers);
    log << "certify: " << req.label << " " << to_string(r.verdict) << " estimate " << r.estimate << " ci ["
        << r.ci_low << ", " << r.ci_high << "] threshold " << r.threshold << "\n";
    json entry = r.to_json();
    entry["id"] = req.id;
    entry["label"] = req.label;
    certs.push_back(entry);
    reports.push_back(std::move(r));
  }
  Manifest man(c, c.output_dir);
  man.add("certificates.json", pretty({{"schema", 1}, {"config_digest", c.digest()},
                                       {"spec_digest", c.ensemble.digest()}, {"certificates", certs}}));
  man.stage("certify", seconds_since(start));
  man.save();
  return certification_exit_code(reports);
}

int run_simulate(const ExperimentConfig& c, std::ostream& log) {
  if (c.n_grid.empty()) throw DomainError("n_grid: missing required field");
  if (c.m < 2) throw DomainError("m: missing required field");
  const auto start = Clock::now();
  SimulateOptions opt;
  opt.workers = resolve_workers(c.workers);
  opt.sample_cap = c.sample_cap;
  const TrajectoryStats st = simulate(c.ensemble, c.x0, c.n_grid, c.m, stage_seed(c, "simulate"), opt);
  Manifest man(c, c.output_dir);
  man.add("stats.csv", st.stats_csv());
  man.add("samples.csv", st.samples_csv());
  man.stage("simulate", seconds_since(start));
  man.save();
  log << "simulate: " << c.m << " trajectories, n up to " << c.n_grid.back() << ", " << opt.workers
      << " workers\n";
  return kExitOk;
}

int run_analyze(const ExperimentConfig& c, const std::optional<fs::path>& stats_arg, std::ostream& log) {
  const auto start = Clock::now();
  const fs::path stats_path = stats_arg ? *stats_arg : c.output_dir / "stats.csv";
  const fs::path dir = stats_path.has_parent_path() ? stats_path.parent_path() : fs::path(".");
  const fs::path samples_path = dir / "samples.csv";
  const fs::path manifest_path = dir / kManifest;
  for (const fs::path& p : {stats_path, samples_path, manifest_path}) {
    if (!fs::exists(p)) throw std::runtime_error("missing file " + p.string());
  }
  const json manifest = json::parse(read_file(manifest_path));
  check_digest(manifest, stats_path);
  check_digest(manifest, samples_path);
  if (manifest.value("spec_digest", "") != c.ensemble.digest()) {
    throw DigestMismatch("stats were produced by a different ensemble (spec digest mismatch)");
  }
  const TrajectoryStats st = TrajectoryStats::from_csv(read_file(stats_path), read_file(samples_path));
  const std::size_t workers = resolve_workers(c.workers);
  const AnalysisConfig& a = c.analyses;
  json report = {{"schema", 1}, {"config_digest", c.digest()}, {"spec_digest", c.ensemble.digest()}};

  const TrajectoryStats dist_stats = restrict_grid(st, a.distance_n, "analyses.distances.n");
  const auto distances = distance_reports(dist_stats, a.distances, workers);
  json dj = json::array();
  for (const auto& d : distances) dj.push_back(d.to_json());
  report["distances"] = dj;
  report["standardization"] = "per-n sample mean and population sd of the stored samples";

  json fits = json::array();
  for (const auto& rf : a.rate_fits) {
    json entry = {{"metric", rf.metric}, {"param", rf.param}};
    try {
      entry["fit"] = rate_fit(metric_series(distances, rf.metric, rf.param)).to_json();
    } catch (const DomainError& e) {
      entry["error"] = e.what();
    }
    fits.push_back(entry);
  }

  std::optional<ConcentrationReport> conc;
  if (a.concentration) {
    ConcentrationConfig cc = a.concentration->config;
    const TrajectoryStats cs = restrict_grid(st, a.concentration->n, "analyses.concentration.n");
    if (a.concentration->t_relative) {
      const double slope = cs.mean.back() / static_cast<double>(cs.n_grid.back());
      for (double& t : cc.t_grid) t *= std::abs(slope);
    }
    conc = concentration_check(cs, cc);
    report["concentration"] = conc->to_json();
  }
  std::optional<MdpReport> mdp;
  if (a.mdp) {
    mdp = mdp_check(restrict_grid(st, a.mdp->n, "analyses.mdp.n"), a.mdp->config);
    report["mdp"] = mdp->to_json();
  }
  if (a.variance) report["variance"] = variance_profile(st, *a.variance).to_json();
  if (a.tail) {
    const auto net = direction_net(c.ensemble.dim, a.tail->grid_size);
    std::vector<std::pair<Direction, Direction>> pairs;
    for (std::size_t i = 0; i < net.size(); ++i) {
      for (std::size_t k = i + 1; k < net.size(); ++k) pairs.emplace_back(Direction(net[i]), Direction(net[k]));
    }
    report["tail"] = contraction_tail(c.ensemble, a.tail->j, pairs, a.tail->ell, a.tail->k_grid, a.tail->mc,
                                      stage_seed(c, "tail"), workers)
                         .to_json();
  }
  if (a.approx) {
    report["approx"] = approx_coefficients(c.ensemble, a.approx->k, a.approx->r_grid, a.approx->mc,
                                           stage_seed(c, "approx"), c.ensemble.boundary_matrix(), c.x0,
                                           a.approx->grid_size, workers)
                           .to_json();
  }

  Manifest man(c, c.output_dir);
  man.add("distances.csv", distances_csv(distances));
  man.add("ratefit.json", pretty({{"schema", 1}, {"fits", fits}}));
  man.add("deviations.csv", deviations_csv(conc ? &*conc : nullptr, mdp ? &*mdp : nullptr));
  man.add("report.json", pretty(report));
  man.stage("analyze", seconds_since(start));
  man.save();
  log << "analyze: " << distances.size() << " grid points";
  if (conc) log << ", concentration " << (conc->pass ? "pass" : "fail") << " c = " << conc->c;
  if (mdp) log << ", mdp " << (mdp->pass ? "pass" : "fail");
  log << "\n";
  return kExitOk;
}

}  // namespace

std::string tool_version() { return COCYCLE_LAB_VERSION; }

CertificateReport run_certification(const CertificationRequest& r, const ExperimentConfig& c,
                                    std::size_t workers) {
  const EnsembleSpec& spec = c.ensemble;
  const SeedPath seed = stage_seed(c, "certify:" + r.label);
  PairSearchConfig search = r.search;
  search.workers = static_cast<int>(workers);
  const double eps0 = r.eps0 ? *r.eps0 : solve_eps0();
  const int n0 = r.n0;
  if (r.id == "log_contraction") return estimate_log_contraction(spec, r.j, n0, search, seed);
  if (r.id == "holder_contraction") return estimate_holder_contraction(spec, r.j, n0, r.alpha, search, seed);
  if (r.id == "decay") return check_decay_condition(spec, r.j_first, r.j_last, r.mc, seed);
  if (r.id == "sl2_moment") return check_sl2_moment(spec, r.j, n0, r.epsilon, search, seed);
  if (r.id == "lemma_bounded") return check_lemma_bounded(r.A, r.B, r.C, r.alpha, eps0);
  if (r.id == "lemma_unbounded") return check_lemma_unbounded(r.A, r.B, r.C, r.D, r.alpha, r.q, eps0);
  if (r.id == "svd_condition") return check_svd_condition(spec, r.j, r.delta, r.mc, search, seed);
  if (r.id == "u1_regularity") return check_u1_regularity(spec, r.j, r.C, r.alpha, r.law, r.mc, seed);
  if (r.id == "perturbation_theta") return perturbation_theta(spec, r.j_first, r.j_last, n0, r.mc, seed);
  if (r.id == "markov_contraction") {
    return check_markov_contraction(spec, r.j, n0, search, r.mc_outer, r.mc_inner, seed);
  }
  throw DomainError("unknown condition '" + r.id + "'");
}

int certification_exit_code(const std::vector<CertificateReport>& reports) {
  bool inconclusive = false;
  for (const auto& r : reports) {
    if (r.verdict == Verdict::Refuted) return kExitRefuted;
    if (r.verdict == Verdict::Inconclusive) inconclusive = true;
  }
  return inconclusive ? kExitInconclusive : kExitOk;
}

int cmd_certify(const fs::path& config_path, std::ostream& log) {
  return guarded("certify", log, [&] { return run_certify(ExperimentConfig::load(config_path), log); });
}

int cmd_simulate(const fs::path& config_path, std::ostream& log) {
  return guarded("simulate", log, [&] { return run_simulate(ExperimentConfig::load(config_path), log); });
}

int cmd_analyze(const fs::path& config_path, const std::optional<fs::path>& stats_path, std::ostream& log) {
  return guarded("analyze", log, [&] { return run_analyze(ExperimentConfig::load(config_path), stats_path, log); });
}

int cmd_all(const fs::path& config_path, std::ostream& log) {
  return guarded("all", log, [&] {
    const ExperimentConfig c = ExperimentConfig::load(config_path);
    const int certify_code = run_certify(c, log);
    run_simulate(c, log);
    run_analyze(c, std::nullopt, log);
    return certify_code;
  });
}

}  // namespace cocycle::cli
