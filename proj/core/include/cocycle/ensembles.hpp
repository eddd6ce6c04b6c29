#pragma once

// Declarative generators of inhomogeneous random matrix sequences.
//
// Every sample is a pure function of (spec, matrix index j, seed path): the
// counter-based streams in rng.hpp remove any dependence on evaluation
// order. Markov families are sequential along a trajectory but still pure
// in (spec, seed path, j) when replayed from the start.

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "cocycle/matcore.hpp"
#include "cocycle/rng.hpp"

namespace cocycle {

enum class Family { IidSl2Rotation, SvdStructured, ContractingNorm, PerturbedBase, MarkovChain };

std::string to_string(Family f);
Family family_from_string(const std::string& name);

/// Deterministic schedule amplitude * sin(frequency * j + phase).
struct Modulation {
  double amplitude = 0.0;
  double frequency = 1.0;
  double phase = 0.0;

  double at(std::uint64_t j) const;
  bool active() const { return amplitude != 0.0; }
};

/// g = R(phi') diag(a, 1/a) R(phi), phi and phi' uniform. With
/// burst_probability p < 1 the diagonal factor is present only with
/// probability p and g is a pure rotation otherwise.
struct RotationParams {
  double a = 2.0;
  Modulation modulation;
  double burst_probability = 1.0;
};

/// Law of a planar angle.
struct AngleLaw {
  enum class Kind { Haar, Atom, LogConcentrated };
  Kind kind = Kind::Haar;
  /// Atom location, or the centre of the concentrated component.
  double angle = 0.0;
  /// Tail exponent of the concentrated component: the offset t from
  /// `angle` satisfies P(|t| <= delta) = |ln delta|^{-1-alpha}.
  double alpha = 1.0;
  /// Mixture weight of the concentrated component (rest is Haar).
  double weight = 1.0;
};

/// Law of the top singular value.
struct NormLaw {
  enum class Kind { Fixed, LogUniform, LogNormal };
  Kind kind = Kind::Fixed;
  double low = 2.0;   // Fixed value, or lower bound
  double high = 2.0;  // upper bound (truncation point for LogNormal)
  double mu = 0.0;    // LogNormal location of ln sigma_1
  double sigma = 1.0;
};

/// g = U diag(s_1, ..., s_d) V. In d = 2, U = R(theta_left) and the first
/// row of V is (cos theta_right, sin theta_right); in higher dimensions both
/// factors are Haar on O(d). Unimodular families use s_k = s_1^{-1/(d-1)}
/// for k >= 2, otherwise s_k = s_1 / gap.
struct SvdParams {
  NormLaw sigma1;
  bool unimodular = true;
  double gap = 4.0;
  AngleLaw left_angle;
  AngleLaw right_angle;
};

/// g = c_j O_j M^{+-1} O_{j-1}^{-1} (Conjugate) or c_j O_j M^{+-1}.
struct ContractingParams {
  enum class Orthogonal { None, Haar, Conjugate };
  double scale = 0.5;
  Modulation modulation;
  /// c_j is multiplied by exp(jitter * (2u - 1)), u uniform.
  double scale_jitter = 0.0;
  Orthogonal orthogonal = Orthogonal::Haar;
  Matrix matrix;  // empty means identity
  /// Odd j use M, even j use M^{-1}.
  bool alternate_inverse = false;
};

struct EnsembleSpec;

/// Base family plus additive noise E with ||E|| <= epsilon.
struct PerturbedParams {
  std::shared_ptr<const EnsembleSpec> base;
  double epsilon = 0.0;
};

struct MarkovMode {
  enum class Input { Uniform, Aligned, Repeat };
  double a = 2.0;
  /// Uniform: phi uniform. Aligned: R(phi) maps the top left singular
  /// direction of g_{j-1} to e2. Repeat: g_j = g_{j-1}.
  Input input = Input::Uniform;
  /// Uniform offset in [-jitter, jitter] added to an aligned phi.
  double jitter = 0.0;
};

struct MarkovParams {
  std::vector<MarkovMode> modes;
  std::vector<std::vector<double>> transition;
  std::vector<double> initial;
  Modulation modulation;
};

struct EnsembleSpec {
  Family family = Family::IidSl2Rotation;
  int dim = 2;
  /// Rescale every sample to |det| = 1.
  bool det_normalize = false;
  /// g_k for k < 1 (and the Markov chain's g_0). Empty means identity.
  Matrix boundary;
  std::variant<RotationParams, SvdParams, ContractingParams, PerturbedParams, MarkovParams> params;

  /// Throws DomainError on inconsistent parameters.
  void validate() const;

  /// A priori bound on N(g_j) over all j. May be +inf for perturbations
  /// whose amplitude exceeds the base's smallest singular value.
  double n_max() const;

  /// Every sample has |det| = 1.
  bool unimodular() const;

  bool markov() const { return family == Family::MarkovChain; }

  Matrix boundary_matrix() const;

  nlohmann::json to_json() const;
  static EnsembleSpec from_json(const nlohmann::json& j);
  std::string digest() const;

  template <class P>
  const P& as() const {
    return std::get<P>(params);
  }
};

/// Convenience constructors.
EnsembleSpec make_rotation_spec(double a, double burst_probability = 1.0);
EnsembleSpec make_fixed_spec(const Matrix& m);
EnsembleSpec make_perturbed_spec(const EnsembleSpec& base, double epsilon);

struct CoupledSample {
  SquareMatrix base;
  SquareMatrix perturbed;
  std::uint64_t j;
};

struct MarkovState {
  Matrix current;  // g_{j-1}
  std::size_t mode = 0;
  std::uint64_t j = 0;  // index of `current`
};

/// Compiled sampler. Cheap to copy; immutable and thread-safe.
class Sampler {
 public:
  explicit Sampler(const EnsembleSpec& spec);

  const EnsembleSpec& spec() const { return *spec_; }
  int dim() const { return spec_->dim; }

  /// g_j for independent families. Throws DomainError for Markov chains.
  void fill(std::uint64_t j, const SeedPath& path, Matrix& out) const;

  /// (h_j, g_j) for PerturbedBase.
  void fill_coupled(std::uint64_t j, const SeedPath& path, Matrix& base, Matrix& perturbed) const;

  /// Initial Markov state (g_0 = boundary, mode from the initial law).
  MarkovState markov_start(const SeedPath& path) const;
  /// Advances `state` to index state.j + 1, writing the new matrix.
  void markov_step(MarkovState& state, const SeedPath& path, Matrix& out) const;

 private:
  void fill_rotation(const RotationParams& p, std::uint64_t j, Stream& s, Matrix& out) const;
  void fill_svd(const SvdParams& p, Stream& s, Matrix& out) const;
  void fill_contracting(const ContractingParams& p, std::uint64_t j, const SeedPath& path,
                        Matrix& out) const;
  void finish(Matrix& out) const;

  std::shared_ptr<const EnsembleSpec> spec_;
  std::shared_ptr<const Sampler> base_;
  Matrix fixed_;
  Matrix fixed_inverse_;
};

/// Sequential access to g_start, g_start+1, ... for any family.
///
/// Markov cursors replay the chain from g_1, so the matrices equal those a
/// trajectory started at index 1 would see.
class Cursor {
 public:
  Cursor(const Sampler& sampler, const SeedPath& path, std::uint64_t start = 1);

  /// Writes g_j for the current j and advances.
  void next(Matrix& out);
  std::uint64_t index() const { return j_; }
  const MarkovState& markov_state() const { return state_; }

 private:
  const Sampler* sampler_;
  SeedPath path_;
  std::uint64_t j_;
  MarkovState state_;
};

SquareMatrix sample_matrix(const EnsembleSpec& spec, std::uint64_t j, const SeedPath& seed);
CoupledSample sample_coupled(const EnsembleSpec& spec, std::uint64_t j, const SeedPath& seed);
std::pair<SquareMatrix, MarkovState> sample_markov_step(const EnsembleSpec& spec,
                                                        const MarkovState& state,
                                                        const SeedPath& seed);

/// g_{j+n-1} ... g_j stored as mantissa * exp(log_scale).
struct ScaledProduct {
  Matrix mantissa;
  double log_scale = 0.0;
  double log_abs_det = 0.0;

  /// The product itself; throws NumericalError if it is not representable
  /// as an invertible SquareMatrix.
  SquareMatrix value() const;
};

inline constexpr double kRescaleAbove = 1e150;

ScaledProduct product_range(const EnsembleSpec& spec, std::uint64_t j, std::uint64_t n,
                            const SeedPath& seed);

/// Samples a Haar-distributed orthogonal matrix.
void haar_orthogonal(int dim, Stream& s, Matrix& out);

/// Weights of the SVD expansion of the projective ratio for unit x, y,
/// taking u_i as the rows of V: A_{ij} over pairs i < j (row-major) and
/// a_{ij} = <u_i,x>^2 <u_j,y>^2. Both sum to 1.
struct SvdWeights {
  std::vector<double> wedge;  // A
  Matrix product;             // a
};
SvdWeights svd_weights(const Matrix& V, const Vector& x, const Vector& y);

}  // namespace cocycle
