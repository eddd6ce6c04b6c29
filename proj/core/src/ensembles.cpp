#include "cocycle/ensembles.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>

#include "cocycle/digest.hpp"
#include "cocycle/json_fields.hpp"
#include "cocycle/stats.hpp"

namespace cocycle {

namespace {

using nlohmann::json;
namespace f = fields;

constexpr double kTwoPi = 2.0 * std::numbers::pi;

enum Substream : std::uint32_t { kMain = 0, kNoise = 1, kTransition = 2, kOrthogonal = 3 };

constexpr int kMaxNoiseRetries = 16;

// R(phi2) diag(a, 1/a) R(phi1), written out for d = 2.
void rotation_product(double a, double phi1, double phi2, Matrix& out) {
  const double c = std::cos(phi1), s = std::sin(phi1);
  const double c2 = std::cos(phi2), s2 = std::sin(phi2);
  const double ia = 1.0 / a;
  out.resize(2, 2);
  out(0, 0) = c2 * a * c - s2 * s * ia;
  out(0, 1) = -c2 * a * s - s2 * c * ia;
  out(1, 0) = s2 * a * c + c2 * s * ia;
  out(1, 1) = -s2 * a * s + c2 * c * ia;
}

double sample_angle(const AngleLaw& law, Stream& s) {
  const double u_mix = s.uniform();
  const double u = s.uniform_open();
  const double u_sign = s.uniform();
  switch (law.kind) {
    case AngleLaw::Kind::Haar:
      return kTwoPi * u;
    case AngleLaw::Kind::Atom:
      return law.angle;
    case AngleLaw::Kind::LogConcentrated: {
      if (u_mix >= law.weight) return kTwoPi * u;
      const double offset = std::exp(-std::pow(u, -1.0 / (1.0 + law.alpha)));
      return law.angle + (u_sign < 0.5 ? offset : -offset);
    }
  }
  return 0.0;
}

double sample_sigma1(const NormLaw& law, Stream& s) {
  const double u = s.uniform();
  switch (law.kind) {
    case NormLaw::Kind::Fixed:
      return law.low;
    case NormLaw::Kind::LogUniform:
      return std::exp(std::log(law.low) + u * (std::log(law.high) - std::log(law.low)));
    case NormLaw::Kind::LogNormal: {
      const double lo = stats::normal_cdf((std::log(law.low) - law.mu) / law.sigma);
      const double hi = stats::normal_cdf((std::log(law.high) - law.mu) / law.sigma);
      const double p = std::clamp(lo + u * (hi - lo), 1e-300, 1.0 - 1e-16);
      const double z = stats::normal_quantile(p);
      return std::clamp(std::exp(law.mu + law.sigma * z), law.low, law.high);
    }
  }
  return 1.0;
}

Vector svd_values(const SvdParams& p, int dim, double s1) {
  Vector sigma(dim);
  sigma(0) = s1;
  const double rest = p.unimodular ? std::pow(s1, -1.0 / (dim - 1)) : s1 / p.gap;
  for (int k = 1; k < dim; ++k) sigma(k) = rest;
  return sigma;
}

double n_of_values(const Vector& sigma) {
  return std::max(sigma(0), 1.0 / sigma(sigma.size() - 1));
}

double normalized_n(Vector sigma) {
  double log_det = 0.0;
  for (int k = 0; k < sigma.size(); ++k) log_det += std::log(sigma(k));
  sigma *= std::exp(-log_det / static_cast<double>(sigma.size()));
  return n_of_values(sigma);
}

// Top left singular direction of a 2x2 matrix, as an angle.
double top_left_angle(const Matrix& g) {
  Eigen::JacobiSVD<Matrix> svd(g, Eigen::ComputeFullU);
  const auto u = svd.matrixU().col(0);
  return std::atan2(u(1), u(0));
}

json modulation_to_json(const Modulation& m) {
  return {{"amplitude", m.amplitude}, {"frequency", m.frequency}, {"phase", m.phase}};
}

Modulation modulation_from_json(const json& obj, const std::string& path) {
  Modulation m;
  const json* v = f::find(obj, "modulation");
  if (v == nullptr) return m;
  const std::string p = f::join(path, "modulation");
  f::object(*v, p);
  m.amplitude = f::number(*v, "amplitude", p, 0.0);
  m.frequency = f::number(*v, "frequency", p, 1.0);
  m.phase = f::number(*v, "phase", p, 0.0);
  return m;
}

json angle_to_json(const AngleLaw& a) {
  switch (a.kind) {
    case AngleLaw::Kind::Haar:
      return {{"law", "haar"}};
    case AngleLaw::Kind::Atom:
      return {{"law", "atom"}, {"angle", a.angle}};
    case AngleLaw::Kind::LogConcentrated:
      return {{"law", "log_concentrated"}, {"angle", a.angle}, {"alpha", a.alpha}, {"weight", a.weight}};
  }
  return {};
}

AngleLaw angle_from_json(const json& obj, const std::string& key, const std::string& path) {
  AngleLaw a;
  const json* v = f::find(obj, key);
  if (v == nullptr) return a;
  const std::string p = f::join(path, key);
  f::object(*v, p);
  const std::string law = f::string(*v, "law", p, "haar");
  if (law == "haar") {
    a.kind = AngleLaw::Kind::Haar;
  } else if (law == "atom") {
    a.kind = AngleLaw::Kind::Atom;
    a.angle = f::number(*v, "angle", p);
  } else if (law == "log_concentrated") {
    a.kind = AngleLaw::Kind::LogConcentrated;
    a.angle = f::number(*v, "angle", p, 0.0);
    a.alpha = f::number(*v, "alpha", p, 1.0);
    a.weight = f::number(*v, "weight", p, 1.0);
  } else {
    f::fail(f::join(p, "law"), "unknown angle law '" + law + "'");
  }
  return a;
}

json norm_to_json(const NormLaw& n) {
  switch (n.kind) {
    case NormLaw::Kind::Fixed:
      return {{"law", "fixed"}, {"value", n.low}};
    case NormLaw::Kind::LogUniform:
      return {{"law", "log_uniform"}, {"low", n.low}, {"high", n.high}};
    case NormLaw::Kind::LogNormal:
      return {{"law", "log_normal"}, {"mu", n.mu}, {"sigma", n.sigma}, {"low", n.low}, {"high", n.high}};
  }
  return {};
}

NormLaw norm_from_json(const json& obj, const std::string& path) {
  NormLaw n;
  const std::string p = f::join(path, "sigma1");
  const json& v = f::object(f::require(obj, "sigma1", path), p);
  const std::string law = f::string(v, "law", p, "fixed");
  if (law == "fixed") {
    n.kind = NormLaw::Kind::Fixed;
    n.low = n.high = f::number(v, "value", p);
  } else if (law == "log_uniform") {
    n.kind = NormLaw::Kind::LogUniform;
    n.low = f::number(v, "low", p);
    n.high = f::number(v, "high", p);
  } else if (law == "log_normal") {
    n.kind = NormLaw::Kind::LogNormal;
    n.mu = f::number(v, "mu", p);
    n.sigma = f::number(v, "sigma", p);
    n.low = f::number(v, "low", p);
    n.high = f::number(v, "high", p);
  } else {
    f::fail(f::join(p, "law"), "unknown norm law '" + law + "'");
  }
  return n;
}

std::string orthogonal_name(ContractingParams::Orthogonal o) {
  switch (o) {
    case ContractingParams::Orthogonal::None:
      return "none";
    case ContractingParams::Orthogonal::Haar:
      return "haar";
    case ContractingParams::Orthogonal::Conjugate:
      return "conjugate";
  }
  return "";
}

std::string input_name(MarkovMode::Input in) {
  switch (in) {
    case MarkovMode::Input::Uniform:
      return "uniform";
    case MarkovMode::Input::Aligned:
      return "aligned";
    case MarkovMode::Input::Repeat:
      return "repeat";
  }
  return "";
}

void check_probabilities(const std::vector<double>& p, const std::string& what) {
  double sum = 0.0;
  for (double v : p) {
    if (!(v >= 0.0)) throw DomainError(what + ": negative probability");
    sum += v;
  }
  if (std::abs(sum - 1.0) > 1e-9) throw DomainError(what + ": probabilities must sum to 1");
}

}  // namespace

std::string to_string(Family fam) {
  switch (fam) {
    case Family::IidSl2Rotation:
      return "IidSl2Rotation";
    case Family::SvdStructured:
      return "SvdStructured";
    case Family::ContractingNorm:
      return "ContractingNorm";
    case Family::PerturbedBase:
      return "PerturbedBase";
    case Family::MarkovChain:
      return "MarkovChain";
  }
  return "";
}

Family family_from_string(const std::string& name) {
  for (Family fam : {Family::IidSl2Rotation, Family::SvdStructured, Family::ContractingNorm,
                     Family::PerturbedBase, Family::MarkovChain}) {
    if (to_string(fam) == name) return fam;
  }
  throw DomainError("unknown ensemble family '" + name + "'");
}

double Modulation::at(std::uint64_t j) const {
  if (amplitude == 0.0) return 0.0;
  return amplitude * std::sin(frequency * static_cast<double>(j) + phase);
}

Matrix EnsembleSpec::boundary_matrix() const {
  return boundary.size() == 0 ? Matrix::Identity(dim, dim) : boundary;
}

void EnsembleSpec::validate() const {
  if (dim < 2) throw DomainError("ensemble: dim must be at least 2");
  if (boundary.size() != 0) {
    if (boundary.rows() != dim || boundary.cols() != dim) {
      throw DomainError("ensemble.boundary: dimension mismatch");
    }
    SquareMatrix check(boundary);
  }
  switch (family) {
    case Family::IidSl2Rotation: {
      const auto& p = as<RotationParams>();
      if (dim != 2) throw DomainError("IidSl2Rotation: dim must be 2");
      if (!(p.a - std::abs(p.modulation.amplitude) >= 1.0)) {
        throw DomainError("IidSl2Rotation: a - |amplitude| must be at least 1");
      }
      if (!(p.burst_probability > 0.0 && p.burst_probability <= 1.0)) {
        throw DomainError("IidSl2Rotation: burst_probability must lie in (0, 1]");
      }
      break;
    }
    case Family::SvdStructured: {
      const auto& p = as<SvdParams>();
      const auto& n = p.sigma1;
      if (!(n.low > 0.0) || !(n.high >= n.low)) {
        throw DomainError("SvdStructured: need 0 < sigma1 low <= high");
      }
      if (n.kind == NormLaw::Kind::LogNormal && !(n.sigma > 0.0)) {
        throw DomainError("SvdStructured: log_normal sigma must be positive");
      }
      if (p.unimodular && !(n.low >= 1.0)) {
        throw DomainError("SvdStructured: unimodular families need sigma1 >= 1");
      }
      if (!p.unimodular && !(p.gap >= 1.0)) throw DomainError("SvdStructured: gap must be >= 1");
      for (const AngleLaw* a : {&p.left_angle, &p.right_angle}) {
        if (a->kind == AngleLaw::Kind::LogConcentrated &&
            (!(a->alpha > 0.0) || !(a->weight >= 0.0 && a->weight <= 1.0))) {
          throw DomainError("SvdStructured: log_concentrated needs alpha > 0, weight in [0, 1]");
        }
      }
      break;
    }
    case Family::ContractingNorm: {
      const auto& p = as<ContractingParams>();
      if (!(p.scale - std::abs(p.modulation.amplitude) > 0.0)) {
        throw DomainError("ContractingNorm: scale - |amplitude| must be positive");
      }
      if (!(p.scale_jitter >= 0.0)) throw DomainError("ContractingNorm: scale_jitter must be >= 0");
      if (p.matrix.size() != 0) {
        if (p.matrix.rows() != dim || p.matrix.cols() != dim) {
          throw DomainError("ContractingNorm: matrix dimension mismatch");
        }
        SquareMatrix check(p.matrix);
      }
      break;
    }
    case Family::PerturbedBase: {
      const auto& p = as<PerturbedParams>();
      if (!p.base) throw DomainError("PerturbedBase: missing base spec");
      if (p.base->dim != dim) throw DomainError("PerturbedBase: base dimension mismatch");
      if (p.base->family == Family::MarkovChain || p.base->family == Family::PerturbedBase) {
        throw DomainError("PerturbedBase: base must be an independent, unperturbed family");
      }
      if (!(p.epsilon >= 0.0)) throw DomainError("PerturbedBase: epsilon must be >= 0");
      if (det_normalize) throw DomainError("PerturbedBase: det_normalize would break the coupling bound");
      p.base->validate();
      break;
    }
    case Family::MarkovChain: {
      const auto& p = as<MarkovParams>();
      if (dim != 2) throw DomainError("MarkovChain: dim must be 2");
      if (p.modes.empty()) throw DomainError("MarkovChain: at least one mode required");
      const std::size_t k = p.modes.size();
      if (p.transition.size() != k) throw DomainError("MarkovChain: transition must be k x k");
      for (const auto& row : p.transition) {
        if (row.size() != k) throw DomainError("MarkovChain: transition must be k x k");
        check_probabilities(row, "MarkovChain.transition");
      }
      if (p.initial.size() != k) throw DomainError("MarkovChain: initial must have k entries");
      check_probabilities(p.initial, "MarkovChain.initial");
      for (const auto& m : p.modes) {
        if (!(m.a - std::abs(p.modulation.amplitude) >= 1.0)) {
          throw DomainError("MarkovChain: mode a - |amplitude| must be at least 1");
        }
      }
      break;
    }
  }
}

double EnsembleSpec::n_max() const {
  switch (family) {
    case Family::IidSl2Rotation: {
      const auto& p = as<RotationParams>();
      return p.a + std::abs(p.modulation.amplitude);
    }
    case Family::SvdStructured: {
      const auto& p = as<SvdParams>();
      double best = 0.0;
      for (double s1 : {p.sigma1.low, p.sigma1.high}) {
        const Vector sigma = svd_values(p, dim, s1);
        best = std::max(best, det_normalize ? normalized_n(sigma) : n_of_values(sigma));
      }
      return best;
    }
    case Family::ContractingNorm: {
      const auto& p = as<ContractingParams>();
      const Matrix m = p.matrix.size() == 0 ? Matrix::Identity(dim, dim) : p.matrix;
      std::vector<Vector> shapes{kernels::singular_values(m)};
      if (p.alternate_inverse) shapes.push_back(kernels::singular_values(m.inverse()));
      const double amp = std::abs(p.modulation.amplitude);
      const double jit = std::exp(p.scale_jitter);
      double best = 0.0;
      for (const Vector& sigma : shapes) {
        if (det_normalize) {
          best = std::max(best, normalized_n(sigma));
          continue;
        }
        for (double c : {(p.scale - amp) / jit, (p.scale + amp) * jit}) {
          best = std::max(best, std::max(c * sigma(0), 1.0 / (c * sigma(sigma.size() - 1))));
        }
      }
      return best;
    }
    case Family::PerturbedBase: {
      const auto& p = as<PerturbedParams>();
      const double nb = p.base->n_max();
      if (p.epsilon >= 1.0 / nb) return std::numeric_limits<double>::infinity();
      return std::max(nb + p.epsilon, 1.0 / (1.0 / nb - p.epsilon));
    }
    case Family::MarkovChain: {
      const auto& p = as<MarkovParams>();
      double best = 1.0;
      bool repeats = false;
      for (const auto& m : p.modes) {
        best = std::max(best, m.a + std::abs(p.modulation.amplitude));
        repeats = repeats || m.input == MarkovMode::Input::Repeat;
      }
      if (repeats) best = std::max(best, n_of_values(kernels::singular_values(boundary_matrix())));
      return best;
    }
  }
  return std::numeric_limits<double>::infinity();
}

bool EnsembleSpec::unimodular() const {
  if (det_normalize) return true;
  switch (family) {
    case Family::IidSl2Rotation:
      return true;
    case Family::SvdStructured:
      return as<SvdParams>().unimodular;
    case Family::MarkovChain: {
      for (const auto& m : as<MarkovParams>().modes) {
        if (m.input == MarkovMode::Input::Repeat) {
          return std::abs(std::abs(boundary_matrix().determinant()) - 1.0) < 1e-12;
        }
      }
      return true;
    }
    default:
      return false;
  }
}

json EnsembleSpec::to_json() const {
  json j;
  j["schema"] = 1;
  j["family"] = to_string(family);
  j["dim"] = dim;
  j["det_normalize"] = det_normalize;
  if (boundary.size() != 0) j["boundary"] = matrix_to_json(boundary);
  json p;
  switch (family) {
    case Family::IidSl2Rotation: {
      const auto& r = as<RotationParams>();
      p = {{"a", r.a}, {"burst_probability", r.burst_probability}, {"modulation", modulation_to_json(r.modulation)}};
      break;
    }
    case Family::SvdStructured: {
      const auto& s = as<SvdParams>();
      p = {{"sigma1", norm_to_json(s.sigma1)},
           {"unimodular", s.unimodular},
           {"gap", s.gap},
           {"left_angle", angle_to_json(s.left_angle)},
           {"right_angle", angle_to_json(s.right_angle)}};
      break;
    }
    case Family::ContractingNorm: {
      const auto& c = as<ContractingParams>();
      p = {{"scale", c.scale},
           {"modulation", modulation_to_json(c.modulation)},
           {"scale_jitter", c.scale_jitter},
           {"orthogonal", orthogonal_name(c.orthogonal)},
           {"alternate_inverse", c.alternate_inverse}};
      if (c.matrix.size() != 0) p["matrix"] = matrix_to_json(c.matrix);
      break;
    }
    case Family::PerturbedBase: {
      const auto& q = as<PerturbedParams>();
      p = {{"base", q.base->to_json()}, {"epsilon", q.epsilon}};
      break;
    }
    case Family::MarkovChain: {
      const auto& m = as<MarkovParams>();
      json modes = json::array();
      for (const auto& mode : m.modes) {
        modes.push_back({{"a", mode.a}, {"input", input_name(mode.input)}, {"jitter", mode.jitter}});
      }
      p = {{"modes", modes},
           {"transition", m.transition},
           {"initial", m.initial},
           {"modulation", modulation_to_json(m.modulation)}};
      break;
    }
  }
  j["params"] = p;
  return j;
}

namespace {

EnsembleSpec spec_from_json(const json& j, const std::string& path) {
  f::object(j, path);
  const std::uint64_t schema = f::unsigned_integer(j, "schema", path, 1);
  if (schema != 1) f::fail(f::join(path, "schema"), "unsupported schema version");
  EnsembleSpec spec;
  const std::string fam = f::string(j, "family", path);
  try {
    spec.family = family_from_string(fam);
  } catch (const DomainError&) {
    f::fail(f::join(path, "family"), "unknown family '" + fam + "'");
  }
  spec.dim = static_cast<int>(f::unsigned_integer(j, "dim", path, 2));
  spec.det_normalize = f::boolean(j, "det_normalize", path, false);
  if (const json* b = f::find(j, "boundary")) {
    try {
      spec.boundary = matrix_from_json(*b);
    } catch (const DomainError& e) {
      f::fail(f::join(path, "boundary"), e.what());
    }
  }
  const std::string pp = f::join(path, "params");
  static const json kEmpty = json::object();
  const json& p = f::find(j, "params") ? f::object(j.at("params"), pp) : kEmpty;
  switch (spec.family) {
    case Family::IidSl2Rotation: {
      RotationParams r;
      r.a = f::number(p, "a", pp, 2.0);
      r.burst_probability = f::number(p, "burst_probability", pp, 1.0);
      r.modulation = modulation_from_json(p, pp);
      spec.params = r;
      break;
    }
    case Family::SvdStructured: {
      SvdParams s;
      s.sigma1 = norm_from_json(p, pp);
      s.unimodular = f::boolean(p, "unimodular", pp, true);
      s.gap = f::number(p, "gap", pp, 4.0);
      s.left_angle = angle_from_json(p, "left_angle", pp);
      s.right_angle = angle_from_json(p, "right_angle", pp);
      spec.params = s;
      break;
    }
    case Family::ContractingNorm: {
      ContractingParams c;
      c.scale = f::number(p, "scale", pp, 0.5);
      c.modulation = modulation_from_json(p, pp);
      c.scale_jitter = f::number(p, "scale_jitter", pp, 0.0);
      const std::string orth = f::string(p, "orthogonal", pp, "haar");
      if (orth == "none") {
        c.orthogonal = ContractingParams::Orthogonal::None;
      } else if (orth == "haar") {
        c.orthogonal = ContractingParams::Orthogonal::Haar;
      } else if (orth == "conjugate") {
        c.orthogonal = ContractingParams::Orthogonal::Conjugate;
      } else {
        f::fail(f::join(pp, "orthogonal"), "expected none, haar or conjugate");
      }
      if (const json* m = f::find(p, "matrix")) {
        try {
          c.matrix = matrix_from_json(*m);
        } catch (const DomainError& e) {
          f::fail(f::join(pp, "matrix"), e.what());
        }
      }
      c.alternate_inverse = f::boolean(p, "alternate_inverse", pp, false);
      spec.params = c;
      break;
    }
    case Family::PerturbedBase: {
      PerturbedParams q;
      q.base = std::make_shared<const EnsembleSpec>(
          spec_from_json(f::require(p, "base", pp), f::join(pp, "base")));
      q.epsilon = f::number(p, "epsilon", pp);
      spec.params = q;
      break;
    }
    case Family::MarkovChain: {
      MarkovParams m;
      const json& modes = f::require(p, "modes", pp);
      if (!modes.is_array()) f::fail(f::join(pp, "modes"), "expected an array");
      for (std::size_t i = 0; i < modes.size(); ++i) {
        const std::string mp = f::join(pp, "modes[" + std::to_string(i) + "]");
        f::object(modes[i], mp);
        MarkovMode mode;
        mode.a = f::number(modes[i], "a", mp, 2.0);
        const std::string in = f::string(modes[i], "input", mp, "uniform");
        if (in == "uniform") {
          mode.input = MarkovMode::Input::Uniform;
        } else if (in == "aligned") {
          mode.input = MarkovMode::Input::Aligned;
        } else if (in == "repeat") {
          mode.input = MarkovMode::Input::Repeat;
        } else {
          f::fail(f::join(mp, "input"), "expected uniform, aligned or repeat");
        }
        mode.jitter = f::number(modes[i], "jitter", mp, 0.0);
        m.modes.push_back(mode);
      }
      const json& tr = f::require(p, "transition", pp);
      if (!tr.is_array()) f::fail(f::join(pp, "transition"), "expected an array of rows");
      for (std::size_t i = 0; i < tr.size(); ++i) {
        m.transition.push_back(f::numbers(tr[i], f::join(pp, "transition[" + std::to_string(i) + "]")));
      }
      m.initial = f::numbers(p, "initial", pp,
                             std::vector<double>(m.modes.size(), 1.0 / std::max<std::size_t>(1, m.modes.size())));
      m.modulation = modulation_from_json(p, pp);
      spec.params = m;
      break;
    }
  }
  try {
    spec.validate();
  } catch (const DomainError& e) {
    f::fail(path, e.what());
  }
  return spec;
}

}  // namespace

EnsembleSpec EnsembleSpec::from_json(const json& j) { return spec_from_json(j, "ensemble"); }

std::string EnsembleSpec::digest() const { return json_digest(to_json()); }

EnsembleSpec make_rotation_spec(double a, double burst_probability) {
  EnsembleSpec spec;
  spec.family = Family::IidSl2Rotation;
  spec.dim = 2;
  RotationParams p;
  p.a = a;
  p.burst_probability = burst_probability;
  spec.params = p;
  spec.validate();
  return spec;
}

EnsembleSpec make_fixed_spec(const Matrix& m) {
  EnsembleSpec spec;
  spec.family = Family::ContractingNorm;
  spec.dim = static_cast<int>(m.rows());
  ContractingParams p;
  p.scale = 1.0;
  p.orthogonal = ContractingParams::Orthogonal::None;
  p.matrix = m;
  spec.params = p;
  spec.validate();
  return spec;
}

EnsembleSpec make_perturbed_spec(const EnsembleSpec& base, double epsilon) {
  EnsembleSpec spec;
  spec.family = Family::PerturbedBase;
  spec.dim = base.dim;
  PerturbedParams p;
  p.base = std::make_shared<const EnsembleSpec>(base);
  p.epsilon = epsilon;
  spec.params = p;
  spec.validate();
  return spec;
}

// ---------------------------------------------------------------------------

Sampler::Sampler(const EnsembleSpec& spec) : spec_(std::make_shared<const EnsembleSpec>(spec)) {
  spec_->validate();
  if (spec_->family == Family::ContractingNorm) {
    const auto& p = spec_->as<ContractingParams>();
    fixed_ = p.matrix.size() == 0 ? Matrix::Identity(spec_->dim, spec_->dim) : p.matrix;
    fixed_inverse_ = fixed_.inverse();
  } else if (spec_->family == Family::PerturbedBase) {
    base_ = std::make_shared<const Sampler>(*spec_->as<PerturbedParams>().base);
  }
}

void Sampler::finish(Matrix& out) const {
  if (!spec_->det_normalize) return;
  const double det = std::abs(out.determinant());
  out /= std::pow(det, 1.0 / static_cast<double>(spec_->dim));
}

void Sampler::fill_rotation(const RotationParams& p, std::uint64_t j, Stream& s,
                            Matrix& out) const {
  const double u = s.uniform();
  const double phi1 = kTwoPi * s.uniform();
  const double phi2 = kTwoPi * s.uniform();
  const double a = (p.burst_probability < 1.0 && u >= p.burst_probability) ? 1.0 : p.a + p.modulation.at(j);
  rotation_product(a, phi1, phi2, out);
}

void Sampler::fill_svd(const SvdParams& p, Stream& s, Matrix& out) const {
  const int d = spec_->dim;
  const Vector sigma = svd_values(p, d, sample_sigma1(p.sigma1, s));
  if (d == 2) {
    const double tl = sample_angle(p.left_angle, s);
    const double tr = sample_angle(p.right_angle, s);
    Matrix U(2, 2), V(2, 2);
    U << std::cos(tl), -std::sin(tl), std::sin(tl), std::cos(tl);
    V << std::cos(tr), std::sin(tr), -std::sin(tr), std::cos(tr);
    out = U * sigma.asDiagonal() * V;
    return;
  }
  Matrix U, V;
  haar_orthogonal(d, s, U);
  haar_orthogonal(d, s, V);
  out = U * sigma.asDiagonal() * V;
}

void Sampler::fill_contracting(const ContractingParams& p, std::uint64_t j, const SeedPath& path,
                               Matrix& out) const {
  Stream s(path, j, kMain);
  double c = p.scale + p.modulation.at(j);
  const double u = s.uniform();
  if (p.scale_jitter > 0.0) c *= std::exp(p.scale_jitter * (2.0 * u - 1.0));
  const Matrix& m = (p.alternate_inverse && j % 2 == 0) ? fixed_inverse_ : fixed_;
  switch (p.orthogonal) {
    case ContractingParams::Orthogonal::None:
      out = c * m;
      break;
    case ContractingParams::Orthogonal::Haar: {
      Stream so(path, j, kOrthogonal);
      Matrix o;
      haar_orthogonal(spec_->dim, so, o);
      out = c * (o * m);
      break;
    }
    case ContractingParams::Orthogonal::Conjugate: {
      Stream so(path, j, kOrthogonal);
      Stream sp(path, j - 1, kOrthogonal);
      Matrix o, prev;
      haar_orthogonal(spec_->dim, so, o);
      haar_orthogonal(spec_->dim, sp, prev);
      out = c * (o * m * prev.transpose());
      break;
    }
  }
}

void Sampler::fill(std::uint64_t j, const SeedPath& path, Matrix& out) const {
  switch (spec_->family) {
    case Family::IidSl2Rotation: {
      Stream s(path, j, kMain);
      fill_rotation(spec_->as<RotationParams>(), j, s, out);
      break;
    }
    case Family::SvdStructured: {
      Stream s(path, j, kMain);
      fill_svd(spec_->as<SvdParams>(), s, out);
      break;
    }
    case Family::ContractingNorm:
      fill_contracting(spec_->as<ContractingParams>(), j, path, out);
      break;
    case Family::PerturbedBase: {
      Matrix base;
      fill_coupled(j, path, base, out);
      return;
    }
    case Family::MarkovChain:
      throw DomainError("fill: MarkovChain samples depend on the previous state");
  }
  finish(out);
}

void Sampler::fill_coupled(std::uint64_t j, const SeedPath& path, Matrix& base,
                           Matrix& perturbed) const {
  if (spec_->family != Family::PerturbedBase) {
    throw DomainError("sample_coupled: family is not PerturbedBase");
  }
  const double eps = spec_->as<PerturbedParams>().epsilon;
  base_->fill(j, path, base);
  if (eps == 0.0) {
    perturbed = base;
    return;
  }
  const int d = spec_->dim;
  Stream s(path, j, kNoise);
  Matrix w(d, d);
  for (int attempt = 0; attempt < kMaxNoiseRetries; ++attempt) {
    for (int r = 0; r < d; ++r) {
      for (int c = 0; c < d; ++c) w(r, c) = s.normal();
    }
    const double u = s.uniform() * (1.0 - 1e-9);
    const double wn = kernels::singular_values(w)(0);
    perturbed = base + (eps * u / wn) * w;
    if (!kernels::near_singular(perturbed)) return;
  }
  throw NumericalError("sample_coupled: perturbation stayed near-singular after retries");
}

MarkovState Sampler::markov_start(const SeedPath& path) const {
  if (!spec_->markov()) throw DomainError("sample_markov_step: family is not MarkovChain");
  const auto& p = spec_->as<MarkovParams>();
  Stream s(path, 0, kTransition);
  const double u = s.uniform();
  MarkovState st;
  st.current = spec_->boundary_matrix();
  st.j = 0;
  double acc = 0.0;
  st.mode = p.modes.size() - 1;
  for (std::size_t k = 0; k < p.initial.size(); ++k) {
    acc += p.initial[k];
    if (u < acc) {
      st.mode = k;
      break;
    }
  }
  return st;
}

void Sampler::markov_step(MarkovState& state, const SeedPath& path, Matrix& out) const {
  if (!spec_->markov()) throw DomainError("sample_markov_step: family is not MarkovChain");
  const auto& p = spec_->as<MarkovParams>();
  const std::uint64_t j = state.j + 1;
  Stream tr(path, j, kTransition);
  const double u = tr.uniform();
  const auto& row = p.transition.at(state.mode);
  std::size_t next = row.size() - 1;
  double acc = 0.0;
  for (std::size_t k = 0; k < row.size(); ++k) {
    acc += row[k];
    if (u < acc) {
      next = k;
      break;
    }
  }
  const MarkovMode& mode = p.modes[next];
  Stream s(path, j, kMain);
  const double phi2 = kTwoPi * s.uniform();
  const double v = s.uniform();
  const double a = mode.a + p.modulation.at(j);
  switch (mode.input) {
    case MarkovMode::Input::Repeat:
      out = state.current;
      break;
    case MarkovMode::Input::Uniform:
      rotation_product(a, kTwoPi * v, phi2, out);
      break;
    case MarkovMode::Input::Aligned: {
      const double phi = 0.5 * std::numbers::pi - top_left_angle(state.current) +
                         mode.jitter * (2.0 * v - 1.0);
      rotation_product(a, phi, phi2, out);
      break;
    }
  }
  finish(out);
  state.current = out;
  state.mode = next;
  state.j = j;
}

Cursor::Cursor(const Sampler& sampler, const SeedPath& path, std::uint64_t start)
    : sampler_(&sampler), path_(path), j_(start) {
  if (start < 1) throw DomainError("cursor: matrix indices start at 1");
  if (sampler.spec().markov()) {
    state_ = sampler.markov_start(path);
    Matrix scratch;
    while (state_.j + 1 < start) sampler.markov_step(state_, path, scratch);
  }
}

void Cursor::next(Matrix& out) {
  if (sampler_->spec().markov()) {
    sampler_->markov_step(state_, path_, out);
  } else {
    sampler_->fill(j_, path_, out);
  }
  ++j_;
}

SquareMatrix sample_matrix(const EnsembleSpec& spec, std::uint64_t j, const SeedPath& seed) {
  if (j < 1) throw DomainError("sample_matrix: j must be >= 1");
  Sampler sampler(spec);
  Matrix out;
  if (spec.markov()) {
    Cursor cursor(sampler, seed, j);
    cursor.next(out);
  } else {
    sampler.fill(j, seed, out);
  }
  return SquareMatrix(out);
}

CoupledSample sample_coupled(const EnsembleSpec& spec, std::uint64_t j, const SeedPath& seed) {
  if (j < 1) throw DomainError("sample_coupled: j must be >= 1");
  Sampler sampler(spec);
  Matrix base, perturbed;
  sampler.fill_coupled(j, seed, base, perturbed);
  return CoupledSample{SquareMatrix(base), SquareMatrix(perturbed), j};
}

std::pair<SquareMatrix, MarkovState> sample_markov_step(const EnsembleSpec& spec,
                                                        const MarkovState& state,
                                                        const SeedPath& seed) {
  Sampler sampler(spec);
  MarkovState next = state;
  if (next.current.size() == 0) next.current = spec.boundary_matrix();
  Matrix out;
  sampler.markov_step(next, seed, out);
  return {SquareMatrix(out), next};
}

SquareMatrix ScaledProduct::value() const {
  const Matrix m = mantissa * std::exp(log_scale);
  if (!m.allFinite()) throw NumericalError("product_range: product overflows double range");
  try {
    return SquareMatrix(m);
  } catch (const DomainError& e) {
    throw NumericalError(std::string("product_range: product not representable: ") + e.what());
  }
}

ScaledProduct product_range(const EnsembleSpec& spec, std::uint64_t j, std::uint64_t n,
                            const SeedPath& seed) {
  if (n < 1) throw DomainError("product_range: n must be >= 1");
  if (j < 1) throw DomainError("product_range: j must be >= 1");
  Sampler sampler(spec);
  Cursor cursor(sampler, seed, j);
  ScaledProduct out;
  Matrix g;
  cursor.next(g);
  out.mantissa = g;
  out.log_abs_det = std::log(std::abs(g.determinant()));
  for (std::uint64_t k = 1; k < n; ++k) {
    cursor.next(g);
    out.mantissa = g * out.mantissa;
    out.log_abs_det += std::log(std::abs(g.determinant()));
    const double size = out.mantissa.cwiseAbs().maxCoeff();
    if (size > kRescaleAbove || size < 1.0 / kRescaleAbove) {
      const double norm = kernels::singular_values(out.mantissa)(0);
      out.mantissa /= norm;
      out.log_scale += std::log(norm);
    }
  }
  return out;
}

void haar_orthogonal(int dim, Stream& s, Matrix& out) {
  Matrix z(dim, dim);
  for (int r = 0; r < dim; ++r) {
    for (int c = 0; c < dim; ++c) z(r, c) = s.normal();
  }
  Eigen::HouseholderQR<Matrix> qr(z);
  Matrix q = qr.householderQ();
  const Matrix& rr = qr.matrixQR();
  for (int c = 0; c < dim; ++c) {
    if (rr(c, c) < 0.0) q.col(c) = -q.col(c);
  }
  out = std::move(q);
}

SvdWeights svd_weights(const Matrix& V, const Vector& x, const Vector& y) {
  const int d = static_cast<int>(V.rows());
  const Vector px = V * x;
  const Vector py = V * y;
  SvdWeights w;
  double total = 0.0;
  for (int i = 0; i < d; ++i) {
    for (int k = i + 1; k < d; ++k) {
      const double m = px(i) * py(k) - py(i) * px(k);
      w.wedge.push_back(m * m);
      total += m * m;
    }
  }
  if (!(total > 0.0)) throw DomainError("svd_weights: x and y must be distinct directions");
  for (double& v : w.wedge) v /= total;
  w.product.resize(d, d);
  for (int i = 0; i < d; ++i) {
    for (int k = 0; k < d; ++k) w.product(i, k) = px(i) * px(i) * py(k) * py(k);
  }
  return w;
}

}  // namespace cocycle
