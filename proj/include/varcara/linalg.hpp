#pragma once

#include <Eigen/Dense>

#include <string>
#include <string_view>
#include <optional>

namespace varcara {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;

// Smallest admissible eigenvalue of a covariance, relative to its largest
// diagonal entry.
inline constexpr double kPdTolerance = 1e-10;

double min_eigenvalue(const Matrix& symmetric);
double spectral_radius(const Matrix& square);
bool is_symmetric(const Matrix& a, double rel_tol = 1e-12);

// True when `a` is symmetric with smallest eigenvalue above
// kPdTolerance * max(diag(a)).
bool is_positive_definite(const Matrix& a);

/// Cholesky factorization of a symmetric positive definite matrix.
///
/// All A^-1 b products in the library go through this type; inverses are
/// never formed. Construction fails with NotPositiveDefinite when the matrix
/// does not pass is_positive_definite().
class SpdFactor {
 public:
  SpdFactor() = default;
  explicit SpdFactor(const Matrix& a);

  Eigen::Index size() const { return lower_.rows(); }
  // C with A = C C'.
  const Matrix& lower() const { return lower_; }

  Vector solve(const Vector& b) const { return llt_.solve(b); }
  Matrix solve(const Matrix& b) const { return llt_.solve(b); }
  // C^-1 b (forward substitution only).
  Matrix solve_lower(const Matrix& b) const;

  double log_det() const;

 private:
  Eigen::LLT<Matrix> llt_;
  Matrix lower_;
};

// Shortest representation that parses back to the same double.
std::string format_double(double x);
std::string format_row(const Vector& v, char sep = ' ');

std::optional<double> parse_double(std::string_view s);

}  // namespace varcara
