#pragma once

// Checkers for sufficient conditions of projective contraction. Monte Carlo
// checkers estimate a supremum over directions by a deterministic net plus
// local refinement, then re-estimate the worst candidates on a fresh sample
// with a Bonferroni-corrected normal interval.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cocycle/ensembles.hpp"
#include "cocycle/matcore.hpp"
#include "cocycle/rng.hpp"

namespace cocycle {

enum class Verdict { Certified, Refuted, Inconclusive };
std::string to_string(Verdict v);

struct CertificateReport {
  std::string condition;
  double estimate = 0.0;
  double ci_low = 0.0;
  double ci_high = 0.0;
  double threshold = 0.0;
  /// threshold - ci_high for upper-bound conditions.
  double margin = 0.0;
  Verdict verdict = Verdict::Inconclusive;
  std::uint64_t samples = 0;
  std::uint64_t seed = 0;
  std::string spec_digest;
  std::vector<std::string> notes;
  /// Checker-specific values (worst pair, per-index estimates, ...).
  nlohmann::json extra = nlohmann::json::object();

  nlohmann::json to_json() const;
};

/// Fills margin and verdict for an upper-bound condition "quantity < threshold":
/// Certified iff ci_high < threshold, Refuted iff ci_low >= threshold.
void decide_upper(CertificateReport& r);

struct PairSearchConfig {
  int grid_size = 16;
  int refine_rounds = 4;
  int mc_per_pair = 10000;
  /// Worst candidates re-estimated on a fresh sample.
  int validate_top = 8;
  int workers = 1;

  void validate() const;
};

/// Deterministic net of `count` directions on P(R^d): equally spaced angles
/// in [0, pi) for d = 2, a Fibonacci spiral on the upper half sphere for
/// d = 3 and a fixed pseudo-random net otherwise.
std::vector<Vector> direction_net(int dim, int count);

double c_bound(const SquareMatrix& A, const SquareMatrix& B);
double c_tilde(const SquareMatrix& A, const SquareMatrix& B);

CertificateReport estimate_log_contraction(const EnsembleSpec& spec, std::uint64_t j, int n0,
                                           const PairSearchConfig& search, const SeedPath& seed);

/// Also reports the Jensen cross-check alpha * E ln ratio <= ln E ratio^alpha
/// on the shared sample for every pair in extra["jensen_ok"].
CertificateReport estimate_holder_contraction(const EnsembleSpec& spec, std::uint64_t j, int n0,
                                              double alpha, const PairSearchConfig& search,
                                              const SeedPath& seed);

CertificateReport check_decay_condition(const EnsembleSpec& spec, std::uint64_t j_first,
                                        std::uint64_t j_last, int mc, const SeedPath& seed);

CertificateReport check_sl2_moment(const EnsembleSpec& spec, std::uint64_t j, int n0,
                                   double epsilon, const PairSearchConfig& search,
                                   const SeedPath& seed);

/// Largest eps0 with 1 - 2 eps0 ln(3/2) + 4 eps0^2 2^{2 eps0} ln^2 2 < 1 - eps0/2.
double solve_eps0();
/// Left minus right side of the inequality above (negative means it holds).
double eps0_gap(double eps0);

CertificateReport check_lemma_bounded(double A, double B, double C, double alpha, double eps0);
CertificateReport check_lemma_unbounded(double A, double B, double C, double D, double alpha,
                                        double q, double eps0);

double r_bound(double C, double alpha);

CertificateReport check_svd_condition(const EnsembleSpec& spec, std::uint64_t j, double delta,
                                      int mc, const PairSearchConfig& search, const SeedPath& seed);

enum class TailLaw { PowerLaw, LogLaw };

/// Empirical P(|<v1, x>| <= delta) against C delta^alpha (PowerLaw) or
/// C |ln delta|^{-1-alpha} (LogLaw) over a log-spaced delta grid and a
/// direction net; v1 is the top right singular direction.
CertificateReport check_u1_regularity(const EnsembleSpec& spec, std::uint64_t j, double C,
                                      double alpha, TailLaw mode, int mc, const SeedPath& seed);

/// sup over j in [j_first, j_last] of E c_tilde(g_{j,n0}, h_{j,n0}).
CertificateReport perturbation_theta(const EnsembleSpec& spec, std::uint64_t j_first,
                                     std::uint64_t j_last, int n0, int mc, const SeedPath& seed);

/// Worst conditional log contraction given g_{j-1} over mc_outer sampled
/// states and the direction net.
CertificateReport check_markov_contraction(const EnsembleSpec& spec, std::uint64_t j, int n0,
                                           const PairSearchConfig& search, int mc_outer,
                                           int mc_inner, const SeedPath& seed);

}  // namespace cocycle
