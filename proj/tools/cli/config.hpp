#pragma once

// Experiment configuration (schema 1). See docs/config.md.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "cocycle/certify.hpp"
#include "cocycle/ensembles.hpp"
#include "cocycle/limitstat.hpp"
#include "cocycle/matcore.hpp"
#include "cocycle/mclab.hpp"

namespace cocycle::cli {

inline constexpr int kConfigSchema = 1;

/// Condition ids accepted in "certifications".
const std::vector<std::string>& condition_ids();

struct CertificationRequest {
  std::string id;
  /// Label used in certificates.json and for the seed; defaults to id.
  std::string label;
  std::uint64_t j = 1;
  std::uint64_t j_first = 1;
  std::uint64_t j_last = 16;
  int n0 = 8;
  double alpha = 1.0;
  double epsilon = 0.1;
  double delta = 0.1;
  double A = 1.0;
  double B = 1.0;
  double C = 1.0;
  double D = 1.0;
  double q = 2.0;
  /// Unset means solve_eps0().
  std::optional<double> eps0;
  TailLaw law = TailLaw::PowerLaw;
  int mc = 10000;
  int mc_outer = 64;
  int mc_inner = 2000;
  PairSearchConfig search;
};

struct RateFitRequest {
  std::string metric = "kolmogorov";
  double param = 0.0;
};

struct TailRequest {
  std::uint64_t j = 1;
  double ell = 0.1;
  std::vector<std::uint64_t> k_grid;
  std::uint64_t mc = 10000;
  /// Net size for the direction pairs (all pairs of the net).
  int grid_size = 4;
};

struct ApproxRequest {
  std::uint64_t k = 32;
  std::vector<std::uint64_t> r_grid;
  std::uint64_t mc = 10000;
  int grid_size = 8;
};

struct ConcentrationRequest {
  ConcentrationConfig config;
  /// t values are multiples of mean_n / n at the largest grid point.
  bool t_relative = false;
  std::vector<std::uint64_t> n;
};

struct MdpRequest {
  MdpConfig config;
  std::vector<std::uint64_t> n;
};

struct AnalysisConfig {
  DistanceRequest distances;
  /// Restricts distances to these grid points (empty: all).
  std::vector<std::uint64_t> distance_n;
  std::vector<RateFitRequest> rate_fits{{"kolmogorov", 0.0}, {"wasserstein", 1.0}};
  std::optional<ConcentrationRequest> concentration;
  std::optional<MdpRequest> mdp;
  std::optional<VarianceConfig> variance;
  std::optional<TailRequest> tail;
  std::optional<ApproxRequest> approx;
};

struct ExperimentConfig {
  int schema = kConfigSchema;
  EnsembleSpec ensemble;
  Direction x0 = Direction::basis(2, 0);
  std::vector<std::uint64_t> n_grid;
  std::uint64_t m = 0;
  std::uint64_t seed = 1;
  /// 0: machine parallelism. COCYCLE_LAB_WORKERS overrides.
  std::size_t workers = 0;
  std::size_t sample_cap = kDefaultSampleCap;
  std::vector<CertificationRequest> certifications;
  AnalysisConfig analyses;
  std::filesystem::path output_dir = "out";
  nlohmann::json raw;

  std::string digest() const;

  static ExperimentConfig from_json(const nlohmann::json& j);
  /// Throws DomainError with line/column for malformed JSON and the field
  /// path for schema errors; std::runtime_error for unreadable files.
  static ExperimentConfig load(const std::filesystem::path& path);
};

}  // namespace cocycle::cli
