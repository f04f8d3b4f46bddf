#pragma once

#include "varcara/linalg.hpp"
#include "varcara/model.hpp"

#include <iosfwd>
#include <string>
#include <vector>

namespace varcara {

struct ReturnSeries {
  int k = 0;
  int p = 0;
  Matrix observations;  // n x (k+p), time-ordered rows
  std::vector<std::string> labels;

  Eigen::Index size() const { return observations.rows(); }
};

// CSV or whitespace-separated columns. A non-numeric first row is taken as
// the header; a non-numeric first column is treated as a date column and
// dropped.
ReturnSeries load_series(std::istream& in, int k, int p);
ReturnSeries load_series(const std::string& path, int k, int p);

enum class CovarianceDof {
  kRegressors,  // divide by (n-1) - (k+p+1)
  kPlain,       // divide by n-1
};

struct FitReport {
  VarModel model;
  Matrix residual_covariance;
  Vector r_squared;           // per equation
  Matrix residuals;           // (n-1) x (k+p)
  Matrix coefficient_se;      // (k+p) x (1+k+p): [intercept | slopes], OLS SEs
  Matrix covariance_se;       // asymptotic SE of each residual covariance entry
  Eigen::Index observations;  // regression rows, n-1
};

// Equation-by-equation OLS of Y_t on (1, Y_{t-1}) using a column-pivoted QR
// of the regressor matrix.
FitReport fit_var1(const ReturnSeries& series, CovarianceDof dof = CovarianceDof::kRegressors);

// Model file followed by '#'-prefixed residual covariance and R^2 lines, so
// the output stays loadable with read_model().
void write_fit_report(std::ostream& out, const FitReport& report,
                      const std::vector<std::string>& labels = {});

}  // namespace varcara
