#pragma once

// Trajectory engine for S_n(x0) = ln ||g_n ... g_1 x0|| and related
// Monte Carlo estimands.
//
// Trajectories are split into fixed-size chunks; each chunk is reduced in
// trajectory order and chunks are merged in index order, so every result is
// independent of the worker count.

#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include <nlohmann/json.hpp>

#include "cocycle/ensembles.hpp"
#include "cocycle/matcore.hpp"
#include "cocycle/rng.hpp"

namespace cocycle {

inline constexpr std::size_t kDefaultSampleCap = 1'000'000;
inline constexpr std::size_t kTrajectoryChunk = 256;

struct SimulateOptions {
  std::size_t workers = 1;
  /// Stored samples per n; above this a deterministic uniform subsample of
  /// trajectories (smallest label hashes) is kept.
  std::size_t sample_cap = kDefaultSampleCap;
};

struct TrajectoryStats {
  std::vector<std::uint64_t> n_grid;
  /// samples[i][r] is S_{n_grid[i]} of trajectory sample_traj[r].
  std::vector<std::vector<double>> samples;
  std::vector<std::uint64_t> sample_traj;
  /// Streamed over all m trajectories; var is the unbiased estimate.
  std::vector<double> mean;
  std::vector<double> var;
  std::uint64_t m = 0;
  std::size_t cap = kDefaultSampleCap;
  std::uint64_t seed = 0;
  std::string spec_digest;

  bool subsampled() const { return sample_traj.size() < m; }

  /// Columns n,mean,var,m; 17 significant digits.
  std::string stats_csv() const;
  /// Columns n,traj,value; 17 significant digits.
  std::string samples_csv() const;
  /// Rebuilds stats from the two CSV files (seed and digest are not stored).
  static TrajectoryStats from_csv(const std::string& stats_csv, const std::string& samples_csv);
};

TrajectoryStats simulate(const EnsembleSpec& spec, const Direction& x0,
                         const std::vector<std::uint64_t>& n_grid, std::uint64_t m,
                         const SeedPath& seed, const SimulateOptions& options = {});

/// X_1, ..., X_n of one trajectory; partial sums reproduce simulate().
std::vector<double> increments(const EnsembleSpec& spec, const Direction& x0, std::uint64_t n,
                               const SeedPath& seed, std::uint64_t traj);

enum class RateVerdict { Contracting, NonContracting, Undecided };
std::string to_string(RateVerdict v);

struct TailCurve {
  std::vector<std::uint64_t> k_grid;
  /// Max over pairs of P(ln d(g_{j,k} x, g_{j,k} y) >= -ell k).
  std::vector<double> prob;
  std::vector<std::uint64_t> count;
  /// Zero counts; reported with their Clopper-Pearson upper bound in prob_upper.
  std::vector<bool> censored;
  std::vector<double> prob_upper;
  double ell = 0.0;
  double gamma = 0.0;
  double gamma_ci_low = 0.0;
  double gamma_ci_high = 0.0;
  double log_c = 0.0;
  double r2 = 0.0;
  std::size_t fit_points = 0;
  RateVerdict verdict = RateVerdict::Undecided;
  std::uint64_t mc = 0;

  nlohmann::json to_json() const;
};

TailCurve contraction_tail(const EnsembleSpec& spec, std::uint64_t j,
                           const std::vector<std::pair<Direction, Direction>>& pairs, double ell,
                           const std::vector<std::uint64_t>& k_grid, std::uint64_t mc,
                           const SeedPath& seed, std::size_t workers = 1);

struct ApproxCurve {
  std::vector<std::uint64_t> r_grid;
  /// Approximation surrogate: sup over net pairs (x, y) of
  /// E|sigma(g_k, g_{k-r,r} x) - sigma(g_k, g_{k-r,r} y)|.
  std::vector<double> coef;
  std::vector<double> coef_std_error;
  /// E|X_k - sigma(g_k, g_{k-r,r} A^{k-r-1} x0)| with the boundary matrix A.
  std::vector<double> boundary_coef;
  double rho = 0.0;
  double rho_ci_low = 0.0;
  double rho_ci_high = 0.0;
  double r2 = 0.0;
  std::size_t fit_points = 0;
  RateVerdict verdict = RateVerdict::Undecided;
  std::uint64_t mc = 0;

  nlohmann::json to_json() const;
};

ApproxCurve approx_coefficients(const EnsembleSpec& spec, std::uint64_t k,
                                const std::vector<std::uint64_t>& r_grid, std::uint64_t mc,
                                const SeedPath& seed, const Matrix& boundary,
                                const Direction& x0, int grid_size = 8, std::size_t workers = 1);

enum class VarianceClass { Bounded, Divergent, Undecided };
std::string to_string(VarianceClass c);

struct VarianceConfig {
  double factor = 2.0;
  double quartile = 0.25;
  double alpha = 0.05;
};

struct VarianceProfile {
  std::vector<std::uint64_t> n_grid;
  std::vector<double> var;
  std::vector<double> ci_low;
  std::vector<double> ci_high;
  VarianceClass classification = VarianceClass::Undecided;
  /// min over the top half of the grid of var_n / n.
  double linear_growth = 0.0;

  nlohmann::json to_json() const;
};

VarianceProfile variance_profile(const TrajectoryStats& stats, const VarianceConfig& config = {});

}  // namespace cocycle
