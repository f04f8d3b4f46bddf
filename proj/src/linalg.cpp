#include "varcara/linalg.hpp"

#include "varcara/errors.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

namespace varcara {

double min_eigenvalue(const Matrix& symmetric) {
  Eigen::SelfAdjointEigenSolver<Matrix> es(symmetric, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double spectral_radius(const Matrix& square) {
  if (square.size() == 0) return 0.0;
  Eigen::EigenSolver<Matrix> es(square, false);
  return es.eigenvalues().cwiseAbs().maxCoeff();
}

bool is_symmetric(const Matrix& a, double rel_tol) {
  if (a.rows() != a.cols()) return false;
  const double scale = std::max(a.cwiseAbs().maxCoeff(), 1e-300);
  return (a - a.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

bool is_positive_definite(const Matrix& a) {
  if (a.rows() == 0 || !is_symmetric(a) || !a.allFinite()) return false;
  const double diag = a.diagonal().maxCoeff();
  if (!(diag > 0.0)) return false;
  return min_eigenvalue(a) > kPdTolerance * diag;
}

SpdFactor::SpdFactor(const Matrix& a) {
  if (!is_positive_definite(a)) {
    throw NotPositiveDefinite("matrix of size " + std::to_string(a.rows()) +
                              " is not symmetric positive definite");
  }
  llt_.compute(a);
  if (llt_.info() != Eigen::Success) {
    throw NotPositiveDefinite("Cholesky factorization failed");
  }
  lower_ = llt_.matrixL();
}

Matrix SpdFactor::solve_lower(const Matrix& b) const {
  return lower_.triangularView<Eigen::Lower>().solve(b);
}

double SpdFactor::log_det() const {
  return 2.0 * lower_.diagonal().array().log().sum();
}

std::string format_double(double x) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), x);
  return std::string(buf, res.ptr);
}

std::string format_row(const Vector& v, char sep) {
  std::string out;
  for (Eigen::Index i = 0; i < v.size(); ++i) {
    if (i) out += sep;
    out += format_double(v[i]);
  }
  return out;
}

std::optional<double> parse_double(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
  if (!s.empty() && s.front() == '+') s.remove_prefix(1);
  if (s.empty()) return std::nullopt;
  double value = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), value);
  if (res.ec != std::errc() || res.ptr != s.data() + s.size()) return std::nullopt;
  return value;
}

}  // namespace varcara
