#pragma once

// Linear-algebra and projective-geometry primitives shared by every module.
//
// All types here are immutable values. Hot loops elsewhere work on raw
// Eigen storage and only use these wrappers at API boundaries.

#include <cstddef>
#include <vector>

#include <Eigen/Dense>
#include <nlohmann/json.hpp>

#include "cocycle/errors.hpp"

namespace cocycle {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Relative determinant threshold: |det g| must exceed this times ||g||^d.
inline constexpr double kSingularityThreshold = 1e-12;

/// An invertible d x d real matrix, d >= 2.
///
/// Singular values are computed once at construction; norm(), inverse_norm()
/// and norm_N() are then O(1).
class SquareMatrix {
 public:
  /// Validates squareness, d >= 2, finiteness and the singularity threshold.
  explicit SquareMatrix(Matrix values);

  static SquareMatrix identity(int dim);
  static SquareMatrix diagonal(const std::vector<double>& entries);
  /// Counter-clockwise rotation by `angle` radians in the plane.
  static SquareMatrix rotation(double angle);
  static SquareMatrix from_rows(const std::vector<std::vector<double>>& rows);

  int dim() const { return static_cast<int>(values_.rows()); }
  const Matrix& values() const { return values_; }
  double operator()(int row, int col) const { return values_(row, col); }

  /// Singular values, nonincreasing.
  const Vector& singular_values() const { return sigma_; }
  /// Operator 2-norm, the largest singular value.
  double norm() const { return sigma_(0); }
  /// ||g^{-1}|| = 1 / sigma_min.
  double inverse_norm() const { return 1.0 / sigma_min(); }
  double sigma_min() const { return sigma_(sigma_.size() - 1); }
  double determinant() const { return det_; }

  SquareMatrix inverse() const;
  SquareMatrix operator*(const SquareMatrix& rhs) const;
  Vector apply(const Vector& x) const { return values_ * x; }

  friend bool operator==(const SquareMatrix& a, const SquareMatrix& b) {
    return a.values_ == b.values_;
  }

 private:
  Matrix values_;
  Vector sigma_;
  double det_ = 0.0;
};

/// A point of P(R^d): a unit vector, with x and -x identified.
class Direction {
 public:
  /// Normalizes `v`; throws DomainError on zero, non-finite or d < 2.
  explicit Direction(const Vector& v);

  static Direction from_angle(double angle);
  static Direction basis(int dim, int index);

  int dim() const { return static_cast<int>(rep_.size()); }
  const Vector& vector() const { return rep_; }

  /// Representative with its first non-negligible coordinate positive.
  Direction canonical() const;
  std::size_t hash() const;

  /// Sign-insensitive comparison with tolerance 1e-9.
  friend bool operator==(const Direction& a, const Direction& b);

 private:
  Vector rep_;
};

/// g = U * diag(sigma) * V with U, V orthogonal; rows of V are the right
/// singular vectors.
struct SvdTriple {
  Matrix U;
  Vector sigma;
  Matrix V;

  Matrix reconstruct() const { return U * sigma.asDiagonal() * V; }
};

/// ||x ^ y|| for arbitrary nonzero vectors (Gram-determinant form).
double wedge_norm(const Vector& x, const Vector& y);

/// d(x, y) = ||x ^ y|| for unit representatives, in [0, 1].
double projective_distance(const Direction& x, const Direction& y);

/// ln(||g y|| / ||y||).
double cocycle_sigma(const SquareMatrix& g, const Vector& y);

/// N(g) = max(||g||, ||g^{-1}||).
double norm_N(const SquareMatrix& g);

/// Deterministic SVD with canonical signs (each column of U has its largest
/// magnitude entry positive). Throws NumericalError if the reconstruction
/// check fails.
SvdTriple svd(const SquareMatrix& g);

/// g x / ||g x||.
Direction act_projective(const SquareMatrix& g, const Direction& x);

/// g / |det g|^{1/d}, which has |det| = 1.
SquareMatrix det_normalize(const SquareMatrix& g);

// Raw-storage kernels used by the samplers and trajectory engine.
namespace kernels {

/// Singular values of a square matrix, nonincreasing.
Vector singular_values(const Matrix& g);

/// ln( d(P x, P y) / d(x, y) ) for unit x, y with x != y.
///
/// In d = 2 the image wedge is |det P| * ||x ^ y||; pass ln|det P| when it
/// is known from the factors, since the determinant of a long product loses
/// all relative accuracy once P is close to rank one. Other dimensions
/// project P y onto the orthogonal complement of P x.
double log_projective_ratio(const Matrix& product, double log_abs_det, const Vector& x,
                            const Vector& y);
double log_projective_ratio(const Matrix& product, const Vector& x, const Vector& y);

/// |det g| <= threshold * ||g||^d, using the Frobenius norm as a cheap
/// upper bound for ||g|| when `exact_norm` is false.
bool near_singular(const Matrix& g, bool exact_norm = true);

}  // namespace kernels

void to_json(nlohmann::json& j, const SquareMatrix& g);
void to_json(nlohmann::json& j, const Direction& x);

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);
SquareMatrix square_matrix_from_json(const nlohmann::json& j);
Direction direction_from_json(const nlohmann::json& j);

}  // namespace cocycle
