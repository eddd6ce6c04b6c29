#pragma once

// Counter-based random streams.
//
// Every draw is a pure function of (master seed, experiment id, trajectory,
// matrix index, substream, position), so results never depend on evaluation
// order or on how work is split across threads.

#include <array>
#include <cstdint>

namespace cocycle {

/// Philox4x32-10 block function (Salmon et al. 2011).
struct Philox4x32 {
  using Counter = std::array<std::uint32_t, 4>;
  using Key = std::array<std::uint32_t, 2>;

  static Counter apply(Counter ctr, Key key);
};

/// SplitMix64 finalizer, used to derive keys and labels.
std::uint64_t mix64(std::uint64_t x);

/// Labels that identify one stream family.
struct SeedPath {
  std::uint64_t master_seed = 0;
  std::uint64_t experiment = 0;
  std::uint64_t trajectory = 0;

  SeedPath with_trajectory(std::uint64_t t) const {
    SeedPath p = *this;
    p.trajectory = t;
    return p;
  }
  SeedPath with_experiment(std::uint64_t e) const {
    SeedPath p = *this;
    p.experiment = e;
    return p;
  }
};

/// Stable 64-bit id for a named experiment (FNV-1a), so stream families can
/// be labeled with readable strings.
std::uint64_t experiment_id(const char* name);

/// Sequential draws for one (seed path, matrix index, substream) cell.
///
/// Cheap to construct; samplers create one per matrix.
class Stream {
 public:
  Stream(const SeedPath& path, std::uint64_t index, std::uint32_t substream = 0);

  std::uint64_t next_u64();
  /// Uniform on [0, 1) with 53 random bits.
  double uniform();
  /// Uniform on (0, 1).
  double uniform_open();
  double normal();

 private:
  void refill();

  Philox4x32::Key key_{};
  Philox4x32::Counter ctr_{};
  Philox4x32::Counter block_{};
  int used_ = 4;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

}  // namespace cocycle
