#include "cocycle/certify.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <numbers>

#include "cocycle/parallel.hpp"
#include "cocycle/stats.hpp"

namespace cocycle {

namespace {

using nlohmann::json;
using stats::RunningMoments;

constexpr double kAlpha = 0.05;
constexpr double kMinPairDistance = 1e-6;
// Per-step allowance for rounding in log ratios of exact isometries.
constexpr double kRoundingPerStep = 1e-12;

std::uint64_t label(const char* name) { return experiment_id(name); }

SeedPath child(const SeedPath& seed, const char* name) {
  return seed.with_experiment(mix64(seed.experiment ^ label(name)));
}

struct Candidate {
  Vector x;
  Vector y;  // empty for single-direction searches
};

json candidate_json(const Candidate& c) {
  json j;
  j["x"] = std::vector<double>(c.x.data(), c.x.data() + c.x.size());
  if (c.y.size() > 0) j["y"] = std::vector<double>(c.y.data(), c.y.data() + c.y.size());
  return j;
}

// Evaluates a functional over one fixed sample set.
using Evaluator = std::function<RunningMoments(const Candidate&)>;

struct Validated {
  Candidate candidate;
  RunningMoments train;
  RunningMoments fresh;
};

struct SearchOutcome {
  std::vector<Validated> top;
  std::vector<RunningMoments> net;  // training moments of the net candidates
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  std::size_t evaluated = 0;
  Candidate worst;
};

Vector perturb(const Vector& v, double scale, Stream& s) {
  Vector w = v;
  for (int i = 0; i < w.size(); ++i) w(i) += scale * s.normal();
  const double n = w.norm();
  return n > 0.0 ? Vector(w / n) : v;
}

double unit_distance(const Vector& x, const Vector& y) { return wedge_norm(x, y); }

SearchOutcome search_sup(int dim, bool pairs, const PairSearchConfig& cfg, const SeedPath& seed,
                         const Evaluator& train, const Evaluator& fresh, double rounding) {
  const std::vector<Vector> net = direction_net(dim, cfg.grid_size);
  std::vector<Candidate> cands;
  if (pairs) {
    for (std::size_t a = 0; a < net.size(); ++a) {
      for (std::size_t b = a + 1; b < net.size(); ++b) cands.push_back({net[a], net[b]});
    }
  } else {
    for (const Vector& v : net) cands.push_back({v, Vector()});
  }
  const std::size_t net_count = cands.size();
  std::vector<RunningMoments> moments(cands.size());
  parallel_for(cands.size(), static_cast<std::size_t>(cfg.workers),
               [&](std::size_t i) { moments[i] = train(cands[i]); });

  auto best_index = [&] {
    std::size_t best = 0;
    for (std::size_t i = 1; i < moments.size(); ++i) {
      if (moments[i].mean > moments[best].mean) best = i;
    }
    return best;
  };

  const double base_scale = std::numbers::pi / cfg.grid_size;
  for (int round = 0; round < cfg.refine_rounds; ++round) {
    const Candidate centre = cands[best_index()];
    Stream rs(child(seed, "refine"), static_cast<std::uint64_t>(round));
    const double scale = base_scale * std::pow(0.5, round);
    std::vector<Candidate> proposals;
    for (int k = 0; k < cfg.grid_size; ++k) {
      Candidate c{perturb(centre.x, scale, rs), pairs ? perturb(centre.y, scale, rs) : Vector()};
      if (pairs && unit_distance(c.x, c.y) < kMinPairDistance) continue;
      proposals.push_back(std::move(c));
    }
    std::vector<RunningMoments> pm(proposals.size());
    parallel_for(proposals.size(), static_cast<std::size_t>(cfg.workers),
                 [&](std::size_t i) { pm[i] = train(proposals[i]); });
    for (std::size_t i = 0; i < proposals.size(); ++i) {
      cands.push_back(std::move(proposals[i]));
      moments.push_back(pm[i]);
    }
  }

  std::vector<std::size_t> order(cands.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return moments[a].mean > moments[b].mean; });
  const std::size_t k = std::min<std::size_t>(order.size(), static_cast<std::size_t>(cfg.validate_top));

  SearchOutcome out;
  out.evaluated = cands.size();
  out.net.assign(moments.begin(), moments.begin() + static_cast<std::ptrdiff_t>(net_count));
  out.top.resize(k);
  parallel_for(k, static_cast<std::size_t>(cfg.workers), [&](std::size_t i) {
    out.top[i] = {cands[order[i]], moments[order[i]], fresh(cands[order[i]])};
  });
  const double z = stats::bonferroni_z(kAlpha, k);
  out.estimate = -std::numeric_limits<double>::infinity();
  out.ci_low = -std::numeric_limits<double>::infinity();
  out.ci_high = -std::numeric_limits<double>::infinity();
  for (const auto& v : out.top) {
    const double half = z * v.fresh.std_error() + rounding;
    if (v.fresh.mean > out.estimate) {
      out.estimate = v.fresh.mean;
      out.worst = v.candidate;
    }
    out.ci_low = std::max(out.ci_low, v.fresh.mean - half);
    out.ci_high = std::max(out.ci_high, v.fresh.mean + half);
  }
  return out;
}

json search_json(const SearchOutcome& s) {
  json top = json::array();
  for (const auto& v : s.top) {
    json c = candidate_json(v.candidate);
    c["train_mean"] = v.train.mean;
    c["mean"] = v.fresh.mean;
    c["std_error"] = v.fresh.std_error();
    top.push_back(c);
  }
  return {{"worst", candidate_json(s.worst)}, {"validated", top}, {"candidates_evaluated", s.evaluated}};
}

// n0-block products of one sample set, stored with their log |det|.
struct Blocks {
  std::vector<Matrix> product;
  std::vector<double> log_det;
};

Blocks sample_blocks(const Sampler& sampler, std::uint64_t j, int n0, int mc, const SeedPath& path,
                     int workers) {
  Blocks b;
  b.product.resize(static_cast<std::size_t>(mc));
  b.log_det.resize(static_cast<std::size_t>(mc));
  parallel_for(static_cast<std::size_t>(mc), static_cast<std::size_t>(workers), [&](std::size_t t) {
    Cursor cursor(sampler, path.with_trajectory(t), j);
    Matrix g, p;
    double ld = 0.0;
    for (int k = 0; k < n0; ++k) {
      cursor.next(g);
      ld += std::log(std::abs(g.determinant()));
      p = k == 0 ? g : Matrix(g * p);
    }
    b.product[t] = std::move(p);
    b.log_det[t] = ld;
  });
  return b;
}

double log_ratio(const Matrix& p, double log_det, const Vector& x, const Vector& y) {
  return kernels::log_projective_ratio(p, log_det, x, y) ;
}

RunningMoments over_blocks(const Blocks& b, const std::function<double(std::size_t)>& value) {
  RunningMoments m;
  for (std::size_t i = 0; i < b.product.size(); ++i) m.add(value(i));
  return m;
}

CertificateReport base_report(const std::string& condition, const SeedPath& seed,
                              const std::string& digest) {
  CertificateReport r;
  r.condition = condition;
  r.seed = seed.master_seed;
  r.spec_digest = digest;
  return r;
}

void require_pairs_dim(const EnsembleSpec& spec) { spec.validate(); }

}  // namespace

std::string to_string(Verdict v) {
  switch (v) {
    case Verdict::Certified:
      return "Certified";
    case Verdict::Refuted:
      return "Refuted";
    case Verdict::Inconclusive:
      return "Inconclusive";
  }
  return "";
}

json CertificateReport::to_json() const {
  auto num = [](double v) -> json {
    if (std::isfinite(v)) return v;
    return v > 0 ? "inf" : (v < 0 ? "-inf" : "nan");
  };
  return {{"condition", condition},
          {"estimate", num(estimate)},
          {"ci", {num(ci_low), num(ci_high)}},
          {"threshold", num(threshold)},
          {"margin", num(margin)},
          {"verdict", to_string(verdict)},
          {"samples", samples},
          {"seed", seed},
          {"spec_digest", spec_digest},
          {"notes", notes},
          {"extra", extra}};
}

void decide_upper(CertificateReport& r) {
  r.margin = r.threshold - r.ci_high;
  if (r.margin > 0.0) {
    r.verdict = Verdict::Certified;
  } else if (r.ci_low >= r.threshold) {
    r.verdict = Verdict::Refuted;
  } else {
    r.verdict = Verdict::Inconclusive;
  }
}

void PairSearchConfig::validate() const {
  if (grid_size < 2 || refine_rounds < 0 || mc_per_pair < 2 || validate_top < 1) {
    throw DomainError("PairSearchConfig: grid_size >= 2, refine_rounds >= 0, mc_per_pair >= 2 and validate_top >= 1 required");
  }
}

std::vector<Vector> direction_net(int dim, int count) {
  if (dim < 2 || count < 1) throw DomainError("direction_net: need dim >= 2 and count >= 1");
  std::vector<Vector> net;
  net.reserve(static_cast<std::size_t>(count));
  if (dim == 2) {
    for (int i = 0; i < count; ++i) {
      const double t = std::numbers::pi * i / count;
      Vector v(2);
      v << std::cos(t), std::sin(t);
      net.push_back(v);
    }
  } else if (dim == 3) {
    const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
    for (int i = 0; i < count; ++i) {
      const double z = 1.0 - (i + 0.5) / count;  // upper half sphere
      const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
      Vector v(3);
      v << r * std::cos(golden * i), r * std::sin(golden * i), z;
      net.push_back(v);
    }
  } else {
    Stream s(SeedPath{0x6e6574ULL, label("direction_net"), static_cast<std::uint64_t>(dim)}, 0);
    for (int i = 0; i < count; ++i) {
      Vector v(dim);
      for (int k = 0; k < dim; ++k) v(k) = s.normal();
      net.push_back(v / v.norm());
    }
  }
  return net;
}

double c_bound(const SquareMatrix& A, const SquareMatrix& B) {
  if (A.dim() != B.dim()) throw DomainError("c_bound: dimension mismatch");
  const double diff = kernels::singular_values(A.values() - B.values())(0);
  const double sa = A.sigma_min(), sb = B.sigma_min();
  return (A.norm() + B.norm()) * diff * (1.0 / (sa * sa) + B.norm() * B.norm() / (sa * sa * sb * sb));
}

double c_tilde(const SquareMatrix& A, const SquareMatrix& B) {
  if (A.dim() != B.dim()) throw DomainError("c_tilde: dimension mismatch");
  const double diff = kernels::singular_values(A.values() - B.values())(0);
  const double ia = A.inverse().norm(), ib = B.inverse().norm();
  return (A.norm() + B.norm()) * diff * (ia * ia + B.norm() * B.norm() * ia * ia * ib * ib);
}

CertificateReport estimate_log_contraction(const EnsembleSpec& spec, std::uint64_t j, int n0,
                                           const PairSearchConfig& search, const SeedPath& seed) {
  if (n0 < 1) throw DomainError("estimate_log_contraction: n0 must be >= 1");
  if (j < 1) throw DomainError("estimate_log_contraction: j must be >= 1");
  search.validate();
  require_pairs_dim(spec);
  const Sampler sampler(spec);
  const Blocks train = sample_blocks(sampler, j, n0, search.mc_per_pair, child(seed, "train"), search.workers);
  const Blocks fresh = sample_blocks(sampler, j, n0, search.mc_per_pair, child(seed, "validate"), search.workers);
  auto eval = [](const Blocks& b) {
    return [&b](const Candidate& c) {
      return over_blocks(b, [&](std::size_t i) { return log_ratio(b.product[i], b.log_det[i], c.x, c.y); });
    };
  };
  const SearchOutcome s = search_sup(spec.dim, true, search, seed, eval(train), eval(fresh), kRoundingPerStep * n0);

  CertificateReport r = base_report("log_contraction", seed, spec.digest());
  r.estimate = s.estimate;
  r.ci_low = s.ci_low;
  r.ci_high = s.ci_high;
  r.threshold = 0.0;
  r.samples = 2ULL * static_cast<std::uint64_t>(search.mc_per_pair);
  decide_upper(r);
  r.extra = search_json(s);
  r.extra["j"] = j;
  r.extra["n0"] = n0;
  r.extra["delta"] = -r.ci_high;
  r.notes.push_back("estimate is a lower bound on the supremum over direction pairs (net plus local refinement)");
  return r;
}

CertificateReport estimate_holder_contraction(const EnsembleSpec& spec, std::uint64_t j, int n0,
                                              double alpha, const PairSearchConfig& search,
                                              const SeedPath& seed) {
  if (!(alpha > 0.0 && alpha <= 1.0)) throw DomainError("estimate_holder_contraction: alpha must lie in (0, 1]");
  if (n0 < 1) throw DomainError("estimate_holder_contraction: n0 must be >= 1");
  search.validate();
  const Sampler sampler(spec);
  const Blocks train = sample_blocks(sampler, j, n0, search.mc_per_pair, child(seed, "train"), search.workers);
  const Blocks fresh = sample_blocks(sampler, j, n0, search.mc_per_pair, child(seed, "validate"), search.workers);
  auto eval = [alpha](const Blocks& b) {
    return [&b, alpha](const Candidate& c) {
      return over_blocks(b, [&](std::size_t i) {
        return std::exp(alpha * log_ratio(b.product[i], b.log_det[i], c.x, c.y));
      });
    };
  };
  const SearchOutcome s = search_sup(spec.dim, true, search, seed, eval(train), eval(fresh), kRoundingPerStep * n0);

  // Jensen cross-check on the shared validation sample of each validated pair.
  bool jensen_ok = true;
  double worst_slack = std::numeric_limits<double>::infinity();
  for (const auto& v : s.top) {
    const RunningMoments logs = over_blocks(fresh, [&](std::size_t i) {
      return log_ratio(fresh.product[i], fresh.log_det[i], v.candidate.x, v.candidate.y);
    });
    const double slack = std::log(v.fresh.mean) - alpha * logs.mean;
    worst_slack = std::min(worst_slack, slack);
    jensen_ok = jensen_ok && slack >= -1e-12;
  }

  CertificateReport r = base_report("holder_contraction", seed, spec.digest());
  r.estimate = s.estimate;
  r.ci_low = s.ci_low;
  r.ci_high = s.ci_high;
  r.threshold = 1.0;
  r.samples = 2ULL * static_cast<std::uint64_t>(search.mc_per_pair);
  decide_upper(r);
  r.extra = search_json(s);
  r.extra["alpha"] = alpha;
  r.extra["n0"] = n0;
  r.extra["jensen_ok"] = jensen_ok;
  r.extra["jensen_min_slack"] = worst_slack;
  return r;
}

CertificateReport check_decay_condition(const EnsembleSpec& spec, std::uint64_t j_first,
                                        std::uint64_t j_last, int mc, const SeedPath& seed) {
  if (mc < 100) throw DomainError("check_decay_condition: mc must be >= 100");
  if (j_first < 1 || j_last < j_first) throw DomainError("check_decay_condition: invalid index range");
  const Sampler sampler(spec);
  const std::size_t count = j_last - j_first + 1;
  std::vector<RunningMoments> per_j(count);
  for (std::size_t k = 0; k < count; ++k) {
    const std::uint64_t j = j_first + k;
    for (int t = 0; t < mc; ++t) {
      Cursor cursor(sampler, seed.with_trajectory(static_cast<std::uint64_t>(t)), j);
      Matrix g;
      cursor.next(g);
      const Vector sv = kernels::singular_values(g);
      per_j[k].add(std::log(sv(0)) - std::log(sv(sv.size() - 1)));
    }
  }
  const double z = stats::bonferroni_z(kAlpha, count);
  CertificateReport r = base_report("decay", seed, spec.digest());
  r.estimate = r.ci_low = r.ci_high = -std::numeric_limits<double>::infinity();
  json table = json::array();
  for (std::size_t k = 0; k < count; ++k) {
    const double half = z * per_j[k].std_error();
    r.estimate = std::max(r.estimate, per_j[k].mean);
    r.ci_low = std::max(r.ci_low, per_j[k].mean - half);
    r.ci_high = std::max(r.ci_high, per_j[k].mean + half);
    table.push_back({{"j", j_first + k}, {"mean", per_j[k].mean}, {"std_error", per_j[k].std_error()}});
  }
  r.threshold = 0.5;
  r.samples = static_cast<std::uint64_t>(mc) * count;
  decide_upper(r);
  r.extra["per_j"] = table;
  r.notes.push_back("quantity is sup_j E ln||g_j|| + E ln||g_j^{-1}||");
  return r;
}

CertificateReport check_sl2_moment(const EnsembleSpec& spec, std::uint64_t j, int n0,
                                   double epsilon, const PairSearchConfig& search,
                                   const SeedPath& seed) {
  if (spec.dim != 2) throw DomainError("check_sl2_moment: dim must be 2");
  if (!spec.unimodular()) throw DomainError("check_sl2_moment: family must have |det| = 1 (set det_normalize)");
  if (!(epsilon > 0.0)) throw DomainError("check_sl2_moment: epsilon must be positive");
  if (n0 < 1) throw DomainError("check_sl2_moment: n0 must be >= 1");
  search.validate();
  const Sampler sampler(spec);
  const Blocks train = sample_blocks(sampler, j, n0, search.mc_per_pair, child(seed, "train"), search.workers);
  const Blocks fresh = sample_blocks(sampler, j, n0, search.mc_per_pair, child(seed, "validate"), search.workers);
  auto eval = [epsilon](const Blocks& b) {
    return [&b, epsilon](const Candidate& c) {
      return over_blocks(b, [&](std::size_t i) {
        return std::exp(-2.0 * epsilon * std::log((b.product[i] * c.x).norm()));
      });
    };
  };
  const SearchOutcome s = search_sup(2, false, search, seed, eval(train), eval(fresh), kRoundingPerStep * n0);
  CertificateReport r = base_report("sl2_moment", seed, spec.digest());
  r.estimate = s.estimate;
  r.ci_low = s.ci_low;
  r.ci_high = s.ci_high;
  r.threshold = 1.0;
  r.samples = 2ULL * static_cast<std::uint64_t>(search.mc_per_pair);
  decide_upper(r);
  r.extra = search_json(s);
  r.extra["epsilon"] = epsilon;
  r.extra["n0"] = n0;
  return r;
}

double eps0_gap(double e) {
  const double ln2 = std::numbers::ln2;
  return 1.0 - 2.0 * e * std::log(1.5) + 4.0 * e * e * std::pow(2.0, 2.0 * e) * ln2 * ln2 - (1.0 - e / 2.0);
}

double solve_eps0() {
  // gap(e) / e = -2 ln(3/2) + 1/2 + 4 e 2^{2e} ln^2 2 is increasing in e.
  auto h = [](double e) {
    const double ln2 = std::numbers::ln2;
    return -2.0 * std::log(1.5) + 0.5 + 4.0 * e * std::pow(2.0, 2.0 * e) * ln2 * ln2;
  };
  double lo = 0.0, hi = 1.0;
  while (hi - lo > 1e-15) {
    const double mid = 0.5 * (lo + hi);
    if (h(mid) < 0.0) {
      lo = mid;
    } else {
      hi = mid;
    }
  }
  return lo;
}

CertificateReport check_lemma_bounded(double A, double B, double C, double alpha, double eps0) {
  if (!(A > 2.0 && B >= A)) throw DomainError("check_lemma_bounded: need 2 < A <= B");
  if (!(C > 0.0 && alpha > 0.0)) throw DomainError("check_lemma_bounded: C and alpha must be positive");
  if (!(eps0 > 0.0 && eps0 <= solve_eps0())) throw DomainError("check_lemma_bounded: eps0 must lie in (0, eps*]");
  CertificateReport r;
  r.condition = "lemma_bounded";
  const double rhs = std::log(C) + alpha * std::numbers::ln2 + 2.0 * eps0 * std::log(B) - std::log(eps0);
  r.estimate = rhs - alpha * std::log(A);
  r.ci_low = r.ci_high = r.estimate;
  r.threshold = 0.0;
  r.margin = -r.estimate;
  r.verdict = r.margin > 0.0 ? Verdict::Certified : Verdict::Refuted;
  r.extra = {{"A", A}, {"B", B}, {"C", C}, {"alpha", alpha}, {"eps0", eps0}};
  if (r.verdict == Verdict::Certified) {
    r.extra["claim_bound"] = 1.0 - eps0 / 4.0;
    r.notes.push_back("claim: sup_x E||Gx||^{-2 eps0} <= 1 - eps0/4");
  }
  r.notes.push_back("estimate is ln(C 2^alpha B^{2 eps0} / eps0) - alpha ln A");
  return r;
}

CertificateReport check_lemma_unbounded(double A, double B, double C, double D, double alpha,
                                        double q, double eps0) {
  if (!(A > 2.0)) throw DomainError("check_lemma_unbounded: need A > 2");
  if (!(B > 0.0 && C > 0.0 && alpha > 0.0)) throw DomainError("check_lemma_unbounded: B, C and alpha must be positive");
  if (!(D >= 0.0)) throw DomainError("check_lemma_unbounded: D must be >= 0");
  if (!(q > 1.0) || !std::isfinite(q)) throw DomainError("check_lemma_unbounded: q must lie in (1, inf)");
  if (!(eps0 > 0.0 && eps0 <= solve_eps0())) throw DomainError("check_lemma_unbounded: eps0 must lie in (0, eps*]");
  CertificateReport r;
  r.condition = "lemma_unbounded";
  const double inner = std::pow(D, 1.0 / q) + std::pow(2.0, alpha / q) * std::pow(C, 1.0 / q);
  r.estimate = std::log(4.0) + 2.0 * eps0 * std::log(B) + std::log(inner) - std::log(eps0) -
               (alpha / q) * std::log(A);
  r.ci_low = r.ci_high = r.estimate;
  r.threshold = 0.0;
  r.margin = -r.estimate;
  r.verdict = r.margin > 0.0 ? Verdict::Certified : Verdict::Refuted;
  r.extra = {{"A", A}, {"B", B}, {"C", C}, {"D", D}, {"alpha", alpha}, {"q", q}, {"p", q / (q - 1.0)}, {"eps0", eps0}};
  if (r.verdict == Verdict::Certified) {
    r.extra["claim_bound"] = 1.0 - eps0 / 4.0;
    r.notes.push_back("claim: sup_x E||Gx||^{-2 eps0} <= 1 - eps0/4");
  }
  return r;
}

double r_bound(double C, double alpha) {
  if (!(C > 0.0 && alpha > 0.0)) throw DomainError("r_bound: C and alpha must be positive");
  return 1.0 + C / alpha;
}

CertificateReport check_svd_condition(const EnsembleSpec& spec, std::uint64_t j, double delta,
                                      int mc, const PairSearchConfig& search, const SeedPath& seed) {
  if (mc < 2) throw DomainError("check_svd_condition: mc must be >= 2");
  search.validate();
  const Sampler sampler(spec);
  struct Factors {
    std::vector<Vector> v1;
    std::vector<double> log_gap;
  };
  auto draw = [&](const SeedPath& path) {
    Factors f;
    f.v1.resize(static_cast<std::size_t>(mc));
    f.log_gap.resize(static_cast<std::size_t>(mc));
    parallel_for(static_cast<std::size_t>(mc), static_cast<std::size_t>(search.workers), [&](std::size_t t) {
      Cursor cursor(sampler, path.with_trajectory(t), j);
      Matrix g;
      cursor.next(g);
      const SvdTriple s = svd(SquareMatrix(g));
      f.v1[t] = s.V.row(0).transpose();
      f.log_gap[t] = std::log(s.sigma(0)) - std::log(s.sigma(1));
    });
    return f;
  };
  const Factors train = draw(child(seed, "train"));
  const Factors fresh = draw(child(seed, "validate"));
  auto term = [delta](const Factors& f, std::size_t i, const Vector& x) {
    return 2.0 * std::abs(std::log(std::abs(f.v1[i].dot(x)))) - f.log_gap[i] + delta;
  };
  auto eval = [&](const Factors& f) {
    return [&f, &term](const Candidate& c) {
      RunningMoments m;
      for (std::size_t i = 0; i < f.v1.size(); ++i) m.add(term(f, i, c.x));
      return m;
    };
  };
  const SearchOutcome s = search_sup(spec.dim, false, search, seed, eval(train), eval(fresh), 0.0);

  CertificateReport r = base_report("svd_condition", seed, spec.digest());
  r.threshold = 0.0;
  r.samples = 2ULL * static_cast<std::uint64_t>(mc);
  r.extra = search_json(s);
  r.extra["delta"] = delta;
  r.extra["mean_log_gap"] = stats::moments_of(fresh.log_gap).mean;

  // Divergence guard on the worst direction: infinite samples, or running
  // means that keep growing by more than 20% per doubling.
  std::vector<double> abs_log(fresh.v1.size());
  bool infinite = false;
  for (std::size_t i = 0; i < fresh.v1.size(); ++i) {
    abs_log[i] = std::abs(std::log(std::abs(fresh.v1[i].dot(s.worst.x))));
    infinite = infinite || !std::isfinite(abs_log[i]);
  }
  json running = json::array();
  double sum = 0.0;
  std::size_t next = 1024;
  double prev_mean = 0.0, last_growth = 0.0;
  for (std::size_t i = 0; i < abs_log.size(); ++i) {
    sum += abs_log[i];
    if (i + 1 == next) {
      const double mean = sum / static_cast<double>(next);
      if (prev_mean > 0.0) last_growth = mean / prev_mean - 1.0;
      running.push_back({{"samples", next}, {"mean", mean}});
      prev_mean = mean;
      next *= 2;
    }
  }
  r.extra["running_means"] = running;
  r.extra["mean_abs_log_inner"] = stats::moments_of(abs_log).mean;

  if (infinite || !std::isfinite(s.estimate)) {
    r.estimate = std::numeric_limits<double>::infinity();
    r.ci_low = r.ci_high = r.estimate;
    r.margin = -r.estimate;
    r.verdict = Verdict::Refuted;
    r.notes.push_back("divergent: |<v1, x>| = 0 on a sample, so E|ln|<v1, x>|| is infinite");
    return r;
  }
  r.estimate = s.estimate;
  r.ci_low = s.ci_low;
  r.ci_high = s.ci_high;
  decide_upper(r);
  if (last_growth > 0.2) {
    r.verdict = Verdict::Inconclusive;
    r.margin = std::min(r.margin, 0.0);
    r.notes.push_back("divergent: running mean grew by more than 20% over the last doubling");
  }
  r.notes.push_back("v1 is the top right singular direction (first row of V)");
  return r;
}

CertificateReport check_u1_regularity(const EnsembleSpec& spec, std::uint64_t j, double C,
                                      double alpha, TailLaw mode, int mc, const SeedPath& seed) {
  if (mode == TailLaw::PowerLaw && spec.dim != 2) throw DomainError("check_u1_regularity: PowerLaw requires dim 2");
  if (!(C > 0.0 && alpha > 0.0)) throw DomainError("check_u1_regularity: C and alpha must be positive");
  if (mc < 2) throw DomainError("check_u1_regularity: mc must be >= 2");
  const Sampler sampler(spec);
  std::vector<Vector> v1(static_cast<std::size_t>(mc));
  for (std::size_t t = 0; t < v1.size(); ++t) {
    Cursor cursor(sampler, seed.with_trajectory(t), j);
    Matrix g;
    cursor.next(g);
    v1[t] = svd(SquareMatrix(g)).V.row(0).transpose();
  }
  const int n_delta = 25;
  std::vector<double> deltas(n_delta);
  for (int k = 0; k < n_delta; ++k) {
    deltas[k] = std::exp(std::log(1e-6) + (std::log(0.5) - std::log(1e-6)) * k / (n_delta - 1));
  }
  const std::vector<Vector> net = direction_net(spec.dim, 32);
  const double m = static_cast<double>(mc);
  double worst = -std::numeric_limits<double>::infinity();
  json worst_cell;
  std::vector<double> inner(v1.size());
  for (std::size_t xi = 0; xi < net.size(); ++xi) {
    for (std::size_t t = 0; t < v1.size(); ++t) inner[t] = std::abs(v1[t].dot(net[xi]));
    std::sort(inner.begin(), inner.end());
    for (double d : deltas) {
      const double p = static_cast<double>(std::upper_bound(inner.begin(), inner.end(), d) - inner.begin()) / m;
      const double se = std::sqrt(p * (1.0 - p) / m);
      const double bound = mode == TailLaw::PowerLaw ? C * std::pow(d, alpha)
                                                      : C * std::pow(std::abs(std::log(d)), -1.0 - alpha);
      const double excess = p - bound - 3.0 * se;
      if (excess > worst) {
        worst = excess;
        worst_cell = {{"x_index", xi}, {"delta", d}, {"probability", p}, {"bound", bound}, {"std_error", se}};
      }
    }
  }
  CertificateReport r = base_report(mode == TailLaw::PowerLaw ? "u1_regularity_power" : "u1_regularity_log",
                                    seed, spec.digest());
  r.estimate = r.ci_low = r.ci_high = worst;
  r.threshold = 0.0;
  r.margin = -worst;
  r.verdict = r.margin > 0.0 ? Verdict::Certified : Verdict::Refuted;
  r.samples = static_cast<std::uint64_t>(mc);
  r.extra = {{"worst_cell", worst_cell}, {"C", C}, {"alpha", alpha}};
  r.notes.push_back("estimate is the largest excess P - bound - 3 SE over the delta and direction grids");
  return r;
}

CertificateReport perturbation_theta(const EnsembleSpec& spec, std::uint64_t j_first,
                                     std::uint64_t j_last, int n0, int mc, const SeedPath& seed) {
  if (spec.family != Family::PerturbedBase) throw DomainError("perturbation_theta: family must be PerturbedBase");
  if (n0 < 1 || mc < 2) throw DomainError("perturbation_theta: need n0 >= 1 and mc >= 2");
  if (j_first < 1 || j_last < j_first) throw DomainError("perturbation_theta: invalid index range");
  const Sampler sampler(spec);
  const std::size_t count = j_last - j_first + 1;
  std::vector<RunningMoments> per_j(count);
  for (std::size_t k = 0; k < count; ++k) {
    for (int t = 0; t < mc; ++t) {
      const SeedPath path = seed.with_trajectory(static_cast<std::uint64_t>(t));
      Matrix h, g, hp, gp;
      for (int s = 0; s < n0; ++s) {
        sampler.fill_coupled(j_first + k + static_cast<std::uint64_t>(s), path, h, g);
        hp = s == 0 ? h : Matrix(h * hp);
        gp = s == 0 ? g : Matrix(g * gp);
      }
      per_j[k].add(c_tilde(SquareMatrix(gp), SquareMatrix(hp)));
    }
  }
  const double z = stats::bonferroni_z(kAlpha, count);
  CertificateReport r = base_report("perturbation_theta", seed, spec.digest());
  r.estimate = r.ci_low = r.ci_high = -std::numeric_limits<double>::infinity();
  json table = json::array();
  for (std::size_t k = 0; k < count; ++k) {
    const double half = z * per_j[k].std_error();
    r.estimate = std::max(r.estimate, per_j[k].mean);
    r.ci_low = std::max(r.ci_low, per_j[k].mean - half);
    r.ci_high = std::max(r.ci_high, per_j[k].mean + half);
    table.push_back({{"j", j_first + k}, {"mean", per_j[k].mean}, {"std_error", per_j[k].std_error()}});
  }
  r.threshold = solve_eps0();
  r.samples = static_cast<std::uint64_t>(mc) * count;
  decide_upper(r);
  r.extra["per_j"] = table;
  r.extra["epsilon"] = spec.as<PerturbedParams>().epsilon;
  r.extra["n0"] = n0;
  r.notes.push_back("threshold is eps*; the smallness level needed for a given delta and n0 is not derived");
  return r;
}

CertificateReport check_markov_contraction(const EnsembleSpec& spec, std::uint64_t j, int n0,
                                           const PairSearchConfig& search, int mc_outer,
                                           int mc_inner, const SeedPath& seed) {
  if (!spec.markov()) throw DomainError("check_markov_contraction: family must be MarkovChain");
  if (n0 < 1 || j < 1 || mc_outer < 2 || mc_inner < 2) {
    throw DomainError("check_markov_contraction: need n0, j >= 1 and mc_outer, mc_inner >= 2");
  }
  search.validate();
  const Sampler sampler(spec);
  const std::vector<Vector> net = direction_net(spec.dim, search.grid_size);
  std::vector<Candidate> cands;
  for (std::size_t a = 0; a < net.size(); ++a) {
    for (std::size_t b = a + 1; b < net.size(); ++b) cands.push_back({net[a], net[b]});
  }

  struct StateResult {
    std::size_t mode = 0;
    std::size_t pair = 0;
    RunningMoments fresh;
  };
  std::vector<StateResult> results(static_cast<std::size_t>(mc_outer));
  const SeedPath outer = child(seed, "outer");

  parallel_for(results.size(), static_cast<std::size_t>(search.workers), [&](std::size_t s) {
    // State g_{j-1}: replay the chain from the start up to index j - 1.
    MarkovState state = sampler.markov_start(outer.with_trajectory(s));
    Matrix scratch;
    while (state.j + 1 < j) sampler.markov_step(state, outer.with_trajectory(s), scratch);

    auto blocks = [&](const char* name) {
      Blocks b;
      b.product.resize(static_cast<std::size_t>(mc_inner));
      b.log_det.resize(static_cast<std::size_t>(mc_inner));
      const SeedPath inner = child(seed, name);
      for (int i = 0; i < mc_inner; ++i) {
        MarkovState st = state;
        const SeedPath path = inner.with_trajectory(s * static_cast<std::uint64_t>(mc_inner) + static_cast<std::uint64_t>(i));
        Matrix g, p;
        double ld = 0.0;
        for (int k = 0; k < n0; ++k) {
          sampler.markov_step(st, path, g);
          ld += std::log(std::abs(g.determinant()));
          p = k == 0 ? g : Matrix(g * p);
        }
        b.product[static_cast<std::size_t>(i)] = std::move(p);
        b.log_det[static_cast<std::size_t>(i)] = ld;
      }
      return b;
    };
    const Blocks train = blocks("inner_train");
    const Blocks fresh = blocks("inner_validate");
    std::size_t best = 0;
    double best_mean = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < cands.size(); ++c) {
      const RunningMoments m = over_blocks(train, [&](std::size_t i) {
        return log_ratio(train.product[i], train.log_det[i], cands[c].x, cands[c].y);
      });
      if (m.mean > best_mean) {
        best_mean = m.mean;
        best = c;
      }
    }
    results[s].mode = state.mode;
    results[s].pair = best;
    results[s].fresh = over_blocks(fresh, [&](std::size_t i) {
      return log_ratio(fresh.product[i], fresh.log_det[i], cands[best].x, cands[best].y);
    });
  });

  const double z = stats::bonferroni_z(kAlpha, results.size());
  const double rounding = kRoundingPerStep * n0;
  CertificateReport r = base_report("markov_contraction", seed, spec.digest());
  r.estimate = r.ci_low = r.ci_high = -std::numeric_limits<double>::infinity();
  json per_state = json::array();
  double mean_sum = 0.0, var_sum = 0.0;
  for (const auto& res : results) {
    const double se = res.fresh.std_error();
    const double half = z * se + rounding;
    r.estimate = std::max(r.estimate, res.fresh.mean);
    r.ci_low = std::max(r.ci_low, res.fresh.mean - half);
    r.ci_high = std::max(r.ci_high, res.fresh.mean + half);
    mean_sum += res.fresh.mean;
    var_sum += se * se;
    per_state.push_back({{"mode", res.mode}, {"mean", res.fresh.mean}, {"std_error", se}});
  }
  const double k = static_cast<double>(results.size());
  const double state_mean = mean_sum / k;
  double chi2 = 0.0;
  bool all_exact = true;
  for (const auto& res : results) {
    const double se = res.fresh.std_error();
    if (se > 0.0) {
      chi2 += std::pow(res.fresh.mean - state_mean, 2) / (se * se);
      all_exact = false;
    }
  }
  r.threshold = 0.0;
  r.samples = static_cast<std::uint64_t>(mc_outer) * static_cast<std::uint64_t>(mc_inner) * 2ULL;
  decide_upper(r);
  r.extra["per_state"] = per_state;
  r.extra["state_mean"] = state_mean;
  r.extra["state_mean_std_error"] = std::sqrt(var_sum) / k;
  r.extra["spread_chi2"] = all_exact ? 0.0 : chi2;
  r.extra["spread_dof"] = results.size() - 1;
  r.extra["n0"] = n0;
  r.extra["j"] = j;
  r.notes.push_back("per-state worst pair chosen on one inner sample and re-estimated on a fresh one");
  return r;
}

}  // namespace cocycle
