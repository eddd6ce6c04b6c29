#pragma once

// Random fixtures for tests. Uses std::mt19937_64 so oracles never share a
// generator with the code under test.

#include <cmath>
#include <random>

#include "cocycle/matcore.hpp"

namespace testing_support {

inline constexpr double kPi = 3.14159265358979323846;

class Fixtures {
 public:
  explicit Fixtures(std::uint64_t seed) : gen_(seed) {}

  double uniform(double lo = 0.0, double hi = 1.0) { return std::uniform_real_distribution<double>(lo, hi)(gen_); }
  double normal() { return std::normal_distribution<double>()(gen_); }

  cocycle::Vector unit(int d) {
    cocycle::Vector v(d);
    do {
      for (int i = 0; i < d; ++i) v(i) = normal();
    } while (v.norm() < 1e-3);
    return v / v.norm();
  }

  /// Gaussian entries, rejected until comfortably invertible.
  cocycle::Matrix matrix(int d) {
    cocycle::Matrix m(d, d);
    while (true) {
      for (int i = 0; i < d; ++i) {
        for (int k = 0; k < d; ++k) m(i, k) = normal();
      }
      const Eigen::JacobiSVD<cocycle::Matrix> s(m);
      if (s.singularValues()(d - 1) > 1e-2 * s.singularValues()(0)) return m;
    }
  }

  /// Random 2x2 matrix with det = 1.
  cocycle::Matrix unimodular2() {
    cocycle::Matrix m = matrix(2);
    if (m.determinant() < 0) m.col(0) *= -1.0;
    return m / std::sqrt(m.determinant());
  }

  std::mt19937_64& engine() { return gen_; }

 private:
  std::mt19937_64 gen_;
};

}  // namespace testing_support
