#include "cocycle/matcore.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>

namespace cocycle {

namespace {

constexpr double kDirectionTolerance = 1e-9;

bool all_finite(const Matrix& m) { return m.allFinite(); }

double abs_det(const Matrix& g) {
  if (g.rows() == 2) {
    return std::abs(g(0, 0) * g(1, 1) - g(0, 1) * g(1, 0));
  }
  return std::abs(g.partialPivLu().determinant());
}

}  // namespace

// ---------------------------------------------------------------------------
// SquareMatrix

SquareMatrix::SquareMatrix(Matrix values) : values_(std::move(values)) {
  if (values_.rows() != values_.cols()) {
    throw DomainError("SquareMatrix: matrix is " + std::to_string(values_.rows()) + "x" +
                      std::to_string(values_.cols()) + ", not square");
  }
  if (values_.rows() < 2) {
    throw DomainError("SquareMatrix: dimension must be at least 2");
  }
  if (!all_finite(values_)) {
    throw DomainError("SquareMatrix: non-finite entry");
  }
  sigma_ = kernels::singular_values(values_);
  det_ = values_.rows() == 2 ? values_(0, 0) * values_(1, 1) - values_(0, 1) * values_(1, 0)
                             : values_.partialPivLu().determinant();
  const double scale = std::pow(sigma_(0), static_cast<double>(values_.rows()));
  if (!(std::abs(det_) > kSingularityThreshold * scale) || !(sigma_(sigma_.size() - 1) > 0.0)) {
    throw DomainError("SquareMatrix: matrix is singular or numerically singular");
  }
}

SquareMatrix SquareMatrix::identity(int dim) {
  return SquareMatrix(Matrix::Identity(dim, dim));
}

SquareMatrix SquareMatrix::diagonal(const std::vector<double>& entries) {
  Vector d = Eigen::Map<const Vector>(entries.data(), static_cast<Eigen::Index>(entries.size()));
  return SquareMatrix(Matrix(d.asDiagonal()));
}

SquareMatrix SquareMatrix::rotation(double angle) {
  Matrix r(2, 2);
  const double c = std::cos(angle);
  const double s = std::sin(angle);
  r << c, -s, s, c;
  return SquareMatrix(std::move(r));
}

SquareMatrix SquareMatrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const auto n = static_cast<Eigen::Index>(rows.size());
  Matrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    if (static_cast<Eigen::Index>(rows[r].size()) != n) {
      throw DomainError("SquareMatrix: row " + std::to_string(r) + " has " +
                        std::to_string(rows[r].size()) + " entries, expected " +
                        std::to_string(n));
    }
    for (Eigen::Index c = 0; c < n; ++c) m(r, c) = rows[r][c];
  }
  return SquareMatrix(std::move(m));
}

SquareMatrix SquareMatrix::inverse() const {
  if (dim() == 2) {
    Matrix inv(2, 2);
    inv << values_(1, 1), -values_(0, 1), -values_(1, 0), values_(0, 0);
    return SquareMatrix(inv / det_);
  }
  return SquareMatrix(values_.partialPivLu().inverse());
}

SquareMatrix SquareMatrix::operator*(const SquareMatrix& rhs) const {
  if (dim() != rhs.dim()) throw DomainError("SquareMatrix: dimension mismatch in product");
  return SquareMatrix(values_ * rhs.values_);
}

// ---------------------------------------------------------------------------
// Direction

Direction::Direction(const Vector& v) {
  if (v.size() < 2) throw DomainError("Direction: dimension must be at least 2");
  if (!v.allFinite()) throw DomainError("Direction: non-finite coordinate");
  const double n = v.norm();
  if (!(n > 0.0)) throw DomainError("Direction: zero vector has no direction");
  rep_ = v / n;
}

Direction Direction::from_angle(double angle) {
  Vector v(2);
  v << std::cos(angle), std::sin(angle);
  return Direction(v);
}

Direction Direction::basis(int dim, int index) {
  if (index < 0 || index >= dim) throw DomainError("Direction::basis: index out of range");
  return Direction(Vector::Unit(dim, index));
}

Direction Direction::canonical() const {
  for (Eigen::Index i = 0; i < rep_.size(); ++i) {
    if (std::abs(rep_(i)) > kDirectionTolerance) {
      if (rep_(i) < 0) {
        Direction flipped = *this;
        flipped.rep_ = -rep_;
        return flipped;
      }
      break;
    }
  }
  return *this;
}

std::size_t Direction::hash() const {
  const Direction c = canonical();
  std::size_t h = std::hash<Eigen::Index>{}(c.rep_.size());
  for (Eigen::Index i = 0; i < c.rep_.size(); ++i) {
    const auto q = static_cast<long long>(std::llround(c.rep_(i) / kDirectionTolerance));
    h ^= std::hash<long long>{}(q) + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  }
  return h;
}

bool operator==(const Direction& a, const Direction& b) {
  if (a.dim() != b.dim()) return false;
  const Vector& x = a.rep_;
  const Vector& y = b.rep_;
  const double same = (x - y).cwiseAbs().maxCoeff();
  const double flipped = (x + y).cwiseAbs().maxCoeff();
  return std::min(same, flipped) <= kDirectionTolerance;
}

// ---------------------------------------------------------------------------
// Free functions

double wedge_norm(const Vector& x, const Vector& y) {
  if (x.size() != y.size()) throw DomainError("wedge_norm: dimension mismatch");
  if (x.size() == 2) return std::abs(x(0) * y(1) - x(1) * y(0));
  const double xx = x.squaredNorm();
  if (!(xx > 0.0)) return 0.0;
  // sqrt of the Gram determinant, evaluated as ||x|| * ||y - proj_x y||.
  const Vector residual = y - (x.dot(y) / xx) * x;
  return std::sqrt(xx) * residual.norm();
}

double projective_distance(const Direction& x, const Direction& y) {
  if (x.dim() != y.dim()) throw DomainError("projective_distance: dimension mismatch");
  return std::clamp(wedge_norm(x.vector(), y.vector()), 0.0, 1.0);
}

double cocycle_sigma(const SquareMatrix& g, const Vector& y) {
  if (y.size() != g.dim()) throw DomainError("cocycle_sigma: dimension mismatch");
  const double ny = y.norm();
  if (!(ny > 0.0)) throw DomainError("cocycle_sigma: zero vector");
  return std::log((g.values() * y).norm() / ny);
}

double norm_N(const SquareMatrix& g) { return std::max(g.norm(), g.inverse_norm()); }

SvdTriple svd(const SquareMatrix& g) {
  const Matrix& a = g.values();
  Eigen::JacobiSVD<Matrix> solver(a, Eigen::ComputeFullU | Eigen::ComputeFullV);
  SvdTriple out{solver.matrixU(), solver.singularValues(), solver.matrixV().transpose()};
  for (Eigen::Index i = 0; i < out.U.cols(); ++i) {
    Eigen::Index arg = 0;
    out.U.col(i).cwiseAbs().maxCoeff(&arg);
    if (out.U(arg, i) < 0) {
      out.U.col(i) *= -1.0;
      out.V.row(i) *= -1.0;
    }
  }
  if (!(out.sigma.minCoeff() > 0.0)) {
    throw NumericalError("svd: non-positive singular value for an invertible input");
  }
  const double err = (out.reconstruct() - a).norm();
  if (!(err <= 1e-9 * out.sigma(0))) {
    throw NumericalError("svd: reconstruction error " + std::to_string(err) +
                         " exceeds tolerance");
  }
  return out;
}

Direction act_projective(const SquareMatrix& g, const Direction& x) {
  if (x.dim() != g.dim()) throw DomainError("act_projective: dimension mismatch");
  return Direction(g.values() * x.vector());
}

SquareMatrix det_normalize(const SquareMatrix& g) {
  const double scale = std::pow(std::abs(g.determinant()), 1.0 / g.dim());
  return SquareMatrix(g.values() / scale);
}

namespace kernels {

Vector singular_values(const Matrix& g) {
  if (g.rows() == 2 && g.cols() == 2) {
    // sigma_{1,2} = (sqrt((a+d)^2 + (c-b)^2) +- sqrt((a-d)^2 + (b+c)^2)) / 2
    const double a = g(0, 0), b = g(0, 1), c = g(1, 0), d = g(1, 1);
    const double p = std::hypot(a + d, c - b);
    const double q = std::hypot(a - d, b + c);
    Vector s(2);
    s << 0.5 * (p + q), 0.5 * std::abs(p - q);
    return s;
  }
  Eigen::JacobiSVD<Matrix> solver(g);
  return solver.singularValues();
}

double log_projective_ratio(const Matrix& product, double log_abs_det, const Vector& x,
                            const Vector& y) {
  if (product.rows() == 2) {
    const double px0 = product(0, 0) * x(0) + product(0, 1) * x(1);
    const double px1 = product(1, 0) * x(0) + product(1, 1) * x(1);
    const double py0 = product(0, 0) * y(0) + product(0, 1) * y(1);
    const double py1 = product(1, 0) * y(0) + product(1, 1) * y(1);
    // d(Px, Py) / d(x, y) = |det P| / (||Px|| ||Py||) for unit x, y.
    return log_abs_det - 0.5 * std::log(px0 * px0 + px1 * px1) -
           0.5 * std::log(py0 * py0 + py1 * py1);
  }
  (void)log_abs_det;
  return log_projective_ratio(product, x, y);
}

double log_projective_ratio(const Matrix& product, const Vector& x, const Vector& y) {
  if (product.rows() == 2) {
    return log_projective_ratio(product, std::log(abs_det(product)), x, y);
  }
  const Vector y_perp = y - x.dot(y) * x;
  const double base = y_perp.norm();
  const Vector px = product * x;
  const Vector py = product * y;
  const Vector pyp = product * y_perp;
  const double npx2 = px.squaredNorm();
  const Vector residual = pyp - (px.dot(pyp) / npx2) * px;
  return std::log(residual.norm()) - std::log(py.norm()) - std::log(base);
}

bool near_singular(const Matrix& g, bool exact_norm) {
  const double scale = exact_norm ? singular_values(g)(0) : g.norm();
  return !(abs_det(g) > kSingularityThreshold * std::pow(scale, static_cast<double>(g.rows())));
}

}  // namespace kernels

// ---------------------------------------------------------------------------
// JSON

nlohmann::json matrix_to_json(const Matrix& m) {
  nlohmann::json rows = nlohmann::json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    nlohmann::json row = nlohmann::json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

Matrix matrix_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.empty()) throw DomainError("matrix: expected a non-empty array of rows");
  const auto n = static_cast<Eigen::Index>(j.size());
  Matrix m(n, n);
  for (Eigen::Index r = 0; r < n; ++r) {
    const auto& row = j[static_cast<std::size_t>(r)];
    if (!row.is_array() || static_cast<Eigen::Index>(row.size()) != n) {
      throw DomainError("matrix: row " + std::to_string(r) + " must be an array of " +
                        std::to_string(n) + " numbers");
    }
    for (Eigen::Index c = 0; c < n; ++c) {
      const auto& v = row[static_cast<std::size_t>(c)];
      if (!v.is_number()) {
        throw DomainError("matrix: entry (" + std::to_string(r) + "," + std::to_string(c) +
                          ") is not a number");
      }
      m(r, c) = v.get<double>();
    }
  }
  return m;
}

SquareMatrix square_matrix_from_json(const nlohmann::json& j) {
  return SquareMatrix(matrix_from_json(j));
}

Direction direction_from_json(const nlohmann::json& j) {
  if (!j.is_array() || j.size() < 2) throw DomainError("direction: expected an array of numbers");
  Vector v(static_cast<Eigen::Index>(j.size()));
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number()) throw DomainError("direction: entry " + std::to_string(i) + " is not a number");
    v(static_cast<Eigen::Index>(i)) = j[i].get<double>();
  }
  return Direction(v);
}

void to_json(nlohmann::json& j, const SquareMatrix& g) { j = matrix_to_json(g.values()); }

void to_json(nlohmann::json& j, const Direction& x) {
  j = nlohmann::json::array();
  for (Eigen::Index i = 0; i < x.vector().size(); ++i) j.push_back(x.vector()(i));
}

}  // namespace cocycle
