#include "config.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <set>
#include <sstream>

#include "cocycle/digest.hpp"
#include "cocycle/errors.hpp"
#include "cocycle/json_fields.hpp"

namespace cocycle::cli {

namespace {

using nlohmann::json;
namespace f = cocycle::fields;

std::string at(const std::string& path, std::size_t i) { return path + "[" + std::to_string(i) + "]"; }

void reject_unknown(const json& obj, const std::string& path, const std::set<std::string>& known) {
  for (auto it = obj.begin(); it != obj.end(); ++it) {
    if (!known.count(it.key())) f::fail(f::join(path, it.key()), "unknown field");
  }
}

std::uint64_t as_uint(const json& v, const std::string& path) {
  if (!v.is_number_unsigned() && !(v.is_number_integer() && v.get<std::int64_t>() >= 0)) {
    f::fail(path, "expected a non-negative integer");
  }
  return v.get<std::uint64_t>();
}

std::vector<std::uint64_t> uint_grid(const json& obj, const std::string& key, const std::string& path,
                                     bool required) {
  const json* v = f::find(obj, key);
  const std::string p = f::join(path, key);
  if (v == nullptr) {
    if (required) f::fail(p, "missing required field");
    return {};
  }
  if (!v->is_array() || v->empty()) f::fail(p, "expected a nonempty array of integers");
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < v->size(); ++i) {
    const std::uint64_t x = as_uint((*v)[i], at(p, i));
    if (x < 1) f::fail(at(p, i), "must be >= 1");
    if (!out.empty() && x <= out.back()) f::fail(at(p, i), "grid must be strictly increasing");
    out.push_back(x);
  }
  return out;
}

int small_int(const json& obj, const std::string& key, const std::string& path, int fallback, int min) {
  const std::uint64_t v = f::unsigned_integer(obj, key, path, static_cast<std::uint64_t>(fallback));
  if (v < static_cast<std::uint64_t>(min) || v > 1'000'000'000ULL) {
    f::fail(f::join(path, key), "must be >= " + std::to_string(min));
  }
  return static_cast<int>(v);
}

PairSearchConfig parse_search(const json& obj, const std::string& path) {
  PairSearchConfig s;
  const json* v = f::find(obj, "search");
  if (v == nullptr) return s;
  const std::string p = f::join(path, "search");
  f::object(*v, p);
  reject_unknown(*v, p, {"grid_size", "refine_rounds", "mc_per_pair", "validate_top"});
  s.grid_size = small_int(*v, "grid_size", p, s.grid_size, 2);
  s.refine_rounds = small_int(*v, "refine_rounds", p, s.refine_rounds, 0);
  s.mc_per_pair = small_int(*v, "mc_per_pair", p, s.mc_per_pair, 2);
  s.validate_top = small_int(*v, "validate_top", p, s.validate_top, 1);
  return s;
}

CertificationRequest parse_certification(const json& obj, const std::string& path) {
  f::object(obj, path);
  CertificationRequest r;
  r.id = f::string(obj, "id", path);
  const auto& ids = condition_ids();
  if (std::find(ids.begin(), ids.end(), r.id) == ids.end()) f::fail(f::join(path, "id"), "unknown condition '" + r.id + "'");
  r.label = f::string(obj, "label", path, r.id);
  reject_unknown(obj, path, {"id", "label", "j", "j_first", "j_last", "n0", "alpha", "epsilon", "delta", "A", "B",
                             "C", "D", "q", "eps0", "law", "mc", "mc_outer", "mc_inner", "search"});
  r.j = f::unsigned_integer(obj, "j", path, r.j);
  r.j_first = f::unsigned_integer(obj, "j_first", path, r.j_first);
  r.j_last = f::unsigned_integer(obj, "j_last", path, r.j_last);
  if (r.j < 1) f::fail(f::join(path, "j"), "must be >= 1");
  if (r.j_first < 1 || r.j_last < r.j_first) f::fail(f::join(path, "j_last"), "need 1 <= j_first <= j_last");
  r.n0 = small_int(obj, "n0", path, r.n0, 1);
  r.alpha = f::number(obj, "alpha", path, r.alpha);
  r.epsilon = f::number(obj, "epsilon", path, r.epsilon);
  r.delta = f::number(obj, "delta", path, r.delta);
  r.A = f::number(obj, "A", path, r.A);
  r.B = f::number(obj, "B", path, r.B);
  r.C = f::number(obj, "C", path, r.C);
  r.D = f::number(obj, "D", path, r.D);
  r.q = f::number(obj, "q", path, r.q);
  if (f::find(obj, "eps0") != nullptr) r.eps0 = f::number(obj, "eps0", path);
  const std::string law = f::string(obj, "law", path, "power");
  if (law == "power") {
    r.law = TailLaw::PowerLaw;
  } else if (law == "log") {
    r.law = TailLaw::LogLaw;
  } else {
    f::fail(f::join(path, "law"), "expected \"power\" or \"log\"");
  }
  r.mc = small_int(obj, "mc", path, r.mc, 2);
  r.mc_outer = small_int(obj, "mc_outer", path, r.mc_outer, 1);
  r.mc_inner = small_int(obj, "mc_inner", path, r.mc_inner, 2);
  r.search = parse_search(obj, path);
  return r;
}

DistanceRequest parse_distances(const json& obj, const std::string& path, std::vector<std::uint64_t>& ns) {
  f::object(obj, path);
  reject_unknown(obj, path, {"s", "q", "p", "a", "n"});
  DistanceRequest d;
  d.s_grid = f::numbers(obj, "s", path, d.s_grid);
  d.q_grid = f::numbers(obj, "q", path, d.q_grid);
  d.p_grid = f::numbers(obj, "p", path, d.p_grid);
  if (const json* a = f::find(obj, "a")) {
    d.a_grid.clear();
    const std::string p = f::join(path, "a");
    if (!a->is_array()) f::fail(p, "expected an array of integers");
    for (std::size_t i = 0; i < a->size(); ++i) {
      const std::uint64_t v = as_uint((*a)[i], at(p, i));
      if (v < 1 || v > static_cast<std::uint64_t>(kMaxMoment)) f::fail(at(p, i), "must be in [1, 8]");
      d.a_grid.push_back(static_cast<int>(v));
    }
  }
  ns = uint_grid(obj, "n", path, false);
  d.validate();
  return d;
}

ConcentrationRequest parse_concentration(const json& obj, const std::string& path) {
  f::object(obj, path);
  reject_unknown(obj, path, {"t", "t_relative", "c", "C", "centered", "alpha", "n"});
  ConcentrationRequest r;
  r.config.t_grid = f::numbers(obj, "t", path);
  std::vector<double> c_default;
  for (int k = 0; k <= 40; ++k) c_default.push_back(std::pow(10.0, -4.0 + 0.125 * k));
  r.config.c_grid = f::numbers(obj, "c", path, c_default);
  r.config.C_grid = f::numbers(obj, "C", path, r.config.C_grid);
  r.config.centered = f::boolean(obj, "centered", path, false);
  r.config.alpha = f::number(obj, "alpha", path, r.config.alpha);
  r.t_relative = f::boolean(obj, "t_relative", path, false);
  r.n = uint_grid(obj, "n", path, false);
  r.config.validate();
  return r;
}

MdpRequest parse_mdp(const json& obj, const std::string& path) {
  f::object(obj, path);
  reject_unknown(obj, path, {"a_exponent", "gammas", "alpha", "n"});
  MdpRequest r;
  r.config.a_exponent = f::number(obj, "a_exponent", path, r.config.a_exponent);
  r.config.alpha = f::number(obj, "alpha", path, r.config.alpha);
  if (const json* g = f::find(obj, "gammas")) {
    const std::string p = f::join(path, "gammas");
    if (!g->is_array()) f::fail(p, "expected an array of [u, v] pairs");
    r.config.gammas.clear();
    for (std::size_t i = 0; i < g->size(); ++i) {
      const auto uv = f::numbers((*g)[i], at(p, i));
      if (uv.size() != 2) f::fail(at(p, i), "expected [u, v]");
      if (!(uv[0] > 0.0)) f::fail(at(p, i), "u must be > 0");
      if (!(uv[1] > uv[0])) f::fail(at(p, i), "v must exceed u");
      r.config.gammas.emplace_back(uv[0], uv[1]);
    }
  }
  r.n = uint_grid(obj, "n", path, false);
  r.config.validate();
  return r;
}

AnalysisConfig parse_analyses(const json& obj, const std::string& path) {
  f::object(obj, path);
  reject_unknown(obj, path, {"distances", "rate_fits", "concentration", "mdp", "variance", "tail", "approx"});
  AnalysisConfig a;
  if (const json* d = f::find(obj, "distances")) a.distances = parse_distances(*d, f::join(path, "distances"), a.distance_n);
  if (const json* r = f::find(obj, "rate_fits")) {
    const std::string p = f::join(path, "rate_fits");
    if (!r->is_array()) f::fail(p, "expected an array");
    a.rate_fits.clear();
    for (std::size_t i = 0; i < r->size(); ++i) {
      const json& e = f::object((*r)[i], at(p, i));
      reject_unknown(e, at(p, i), {"metric", "param"});
      RateFitRequest rf;
      rf.metric = f::string(e, "metric", at(p, i));
      if (rf.metric != "kolmogorov" && rf.metric != "lq" && rf.metric != "wasserstein" && rf.metric != "moment_gap") {
        f::fail(f::join(at(p, i), "metric"), "expected kolmogorov, lq, wasserstein or moment_gap");
      }
      rf.param = f::number(e, "param", at(p, i));
      a.rate_fits.push_back(rf);
    }
  }
  if (const json* c = f::find(obj, "concentration")) a.concentration = parse_concentration(*c, f::join(path, "concentration"));
  if (const json* m = f::find(obj, "mdp")) a.mdp = parse_mdp(*m, f::join(path, "mdp"));
  if (const json* v = f::find(obj, "variance")) {
    const std::string p = f::join(path, "variance");
    f::object(*v, p);
    reject_unknown(*v, p, {"factor", "quartile", "alpha"});
    VarianceConfig vc;
    vc.factor = f::number(*v, "factor", p, vc.factor);
    vc.quartile = f::number(*v, "quartile", p, vc.quartile);
    vc.alpha = f::number(*v, "alpha", p, vc.alpha);
    a.variance = vc;
  }
  if (const json* t = f::find(obj, "tail")) {
    const std::string p = f::join(path, "tail");
    f::object(*t, p);
    reject_unknown(*t, p, {"j", "ell", "k", "mc", "grid_size"});
    TailRequest tr;
    tr.j = f::unsigned_integer(*t, "j", p, tr.j);
    if (tr.j < 1) f::fail(f::join(p, "j"), "must be >= 1");
    tr.ell = f::number(*t, "ell", p, tr.ell);
    if (!(tr.ell > 0.0)) f::fail(f::join(p, "ell"), "must be > 0");
    tr.k_grid = uint_grid(*t, "k", p, true);
    tr.mc = f::unsigned_integer(*t, "mc", p, tr.mc);
    if (tr.mc < 1) f::fail(f::join(p, "mc"), "must be >= 1");
    tr.grid_size = small_int(*t, "grid_size", p, tr.grid_size, 2);
    a.tail = tr;
  }
  if (const json* r = f::find(obj, "approx")) {
    const std::string p = f::join(path, "approx");
    f::object(*r, p);
    reject_unknown(*r, p, {"k", "r", "mc", "grid_size"});
    ApproxRequest ar;
    ar.k = f::unsigned_integer(*r, "k", p, ar.k);
    ar.r_grid = uint_grid(*r, "r", p, true);
    if (ar.r_grid.back() >= ar.k) f::fail(f::join(p, "r"), "values must be < k");
    ar.mc = f::unsigned_integer(*r, "mc", p, ar.mc);
    if (ar.mc < 2) f::fail(f::join(p, "mc"), "must be >= 2");
    ar.grid_size = small_int(*r, "grid_size", p, ar.grid_size, 2);
    a.approx = ar;
  }
  return a;
}

}  // namespace

const std::vector<std::string>& condition_ids() {
  static const std::vector<std::string> ids{
      "log_contraction", "holder_contraction", "decay",        "sl2_moment",         "lemma_bounded",
      "lemma_unbounded", "svd_condition",      "u1_regularity", "perturbation_theta", "markov_contraction"};
  return ids;
}

std::string ExperimentConfig::digest() const { return json_digest(raw); }

ExperimentConfig ExperimentConfig::from_json(const json& j) {
  f::object(j, "config");
  reject_unknown(j, "", {"schema", "ensemble", "x0", "n_grid", "m", "seed", "workers", "sample_cap",
                         "certifications", "analyses", "output_dir"});
  ExperimentConfig c;
  c.raw = j;
  const std::uint64_t schema = f::unsigned_integer(j, "schema", "");
  if (schema != kConfigSchema) f::fail("schema", "unsupported schema " + std::to_string(schema) + " (expected 1)");
  c.ensemble = EnsembleSpec::from_json(f::require(j, "ensemble", ""));
  if (const json* x = f::find(j, "x0")) {
    try {
      c.x0 = direction_from_json(*x);
    } catch (const DomainError& e) {
      f::fail("x0", e.what());
    }
    if (c.x0.dim() != c.ensemble.dim) f::fail("x0", "dimension does not match ensemble.dim");
  } else {
    c.x0 = Direction::basis(c.ensemble.dim, 0);
  }
  c.n_grid = uint_grid(j, "n_grid", "", false);
  c.m = f::unsigned_integer(j, "m", "", 0);
  if (f::find(j, "m") != nullptr && c.m < 2) f::fail("m", "must be >= 2");
  c.seed = f::unsigned_integer(j, "seed", "", c.seed);
  c.workers = f::unsigned_integer(j, "workers", "", 0);
  c.sample_cap = f::unsigned_integer(j, "sample_cap", "", kDefaultSampleCap);
  if (c.sample_cap < 1) f::fail("sample_cap", "must be >= 1");
  if (const json* certs = f::find(j, "certifications")) {
    if (!certs->is_array()) f::fail("certifications", "expected an array");
    for (std::size_t i = 0; i < certs->size(); ++i) {
      c.certifications.push_back(parse_certification((*certs)[i], at("certifications", i)));
    }
  }
  if (const json* a = f::find(j, "analyses")) c.analyses = parse_analyses(*a, "analyses");
  c.output_dir = f::string(j, "output_dir", "", "out");
  return c;
}

ExperimentConfig ExperimentConfig::load(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read config file " + path.string());
  std::stringstream buf;
  buf << in.rdbuf();
  json j;
  try {
    j = json::parse(buf.str());
  } catch (const json::parse_error& e) {
    throw DomainError(path.string() + ": " + e.what());
  }
  return from_json(j);
}

}  // namespace cocycle::cli
