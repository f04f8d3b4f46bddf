#include "varcara/estimation.hpp"

#include "varcara/errors.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace varcara {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  if (line.find(',') != std::string::npos) {
    std::string field;
    std::istringstream ss(line);
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (!line.empty() && line.back() == ',') fields.emplace_back();
  } else {
    std::istringstream ss(line);
    std::string field;
    while (ss >> field) fields.push_back(field);
  }
  for (auto& f : fields) {
    const auto a = f.find_first_not_of(" \t\r\"");
    const auto b = f.find_last_not_of(" \t\r\"");
    f = a == std::string::npos ? std::string() : f.substr(a, b - a + 1);
  }
  return fields;
}

}  // namespace

ReturnSeries load_series(std::istream& in, int k, int p) {
  if (k < 1 || p < 0) throw UsageError("invalid dimensions k=" + std::to_string(k) +
                                       " p=" + std::to_string(p));
  const std::size_t width = static_cast<std::size_t>(k + p);
  ReturnSeries series;
  series.k = k;
  series.p = p;

  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  bool first_data_line = true;
  bool date_column = false;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    auto fields = split_fields(line);
    if (first_data_line) {
      first_data_line = false;
      bool numeric = true;
      for (const auto& f : fields) numeric = numeric && parse_double(f).has_value();
      if (!numeric) {
        // Header row unless only the leading cell is non-numeric.
        bool rest_numeric = fields.size() > 1;
        for (std::size_t i = 1; i < fields.size(); ++i)
          rest_numeric = rest_numeric && parse_double(fields[i]).has_value();
        if (!rest_numeric) {
          series.labels = fields;
          date_column = fields.size() == width + 1;
          if (date_column) series.labels.erase(series.labels.begin());
          continue;
        }
        date_column = true;
      }
    }
    if (date_column) {
      if (fields.empty()) throw DataError("line " + std::to_string(lineno) + ": empty row");
      fields.erase(fields.begin());
    }
    if (fields.size() != width) {
      throw DataError("line " + std::to_string(lineno) + ": expected " +
                      std::to_string(width) + " columns, found " +
                      std::to_string(fields.size()));
    }
    std::vector<double> row(width);
    for (std::size_t i = 0; i < width; ++i) {
      auto v = parse_double(fields[i]);
      if (!v || !std::isfinite(*v)) {
        throw DataError("line " + std::to_string(lineno) + ": non-numeric cell '" +
                        fields[i] + "'");
      }
      row[i] = *v;
    }
    rows.push_back(std::move(row));
  }
  if (rows.empty()) throw DataError("series has no observations");
  series.observations.resize(static_cast<Eigen::Index>(rows.size()),
                             static_cast<Eigen::Index>(width));
  for (std::size_t r = 0; r < rows.size(); ++r)
    for (std::size_t c = 0; c < width; ++c)
      series.observations(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = rows[r][c];
  if (!series.labels.empty() && series.labels.size() != width) series.labels.clear();
  return series;
}

ReturnSeries load_series(const std::string& path, int k, int p) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open input file '" + path + "'");
  return load_series(in, k, p);
}

FitReport fit_var1(const ReturnSeries& series, CovarianceDof dof) {
  const Eigen::Index dim = series.k + series.p;
  const Eigen::Index n = series.size();
  if (series.observations.cols() != dim) throw DimensionError("series width mismatch");
  if (n < dim + 2) {
    throw DataError("need at least " + std::to_string(dim + 2) + " observations, got " +
                    std::to_string(n));
  }
  const Eigen::Index rows = n - 1;
  const Eigen::Index regressors = dim + 1;

  Matrix x(rows, regressors);
  x.col(0).setOnes();
  x.rightCols(dim) = series.observations.topRows(rows);
  const Matrix y = series.observations.bottomRows(rows);

  Eigen::ColPivHouseholderQR<Matrix> qr(x);
  qr.setThreshold(1e-10);
  if (qr.rank() < regressors) {
    throw NumericalError("regressor matrix is singular (rank " + std::to_string(qr.rank()) +
                         " < " + std::to_string(regressors) +
                         "); constant or collinear series");
  }
  const Matrix beta = qr.solve(y);  // regressors x dim
  const Matrix resid = y - x * beta;

  const double denom = dof == CovarianceDof::kRegressors
                           ? static_cast<double>(rows - regressors)
                           : static_cast<double>(rows);
  if (!(denom > 0)) throw DataError("not enough observations for the covariance estimate");
  Matrix cov = resid.transpose() * resid / denom;
  cov = 0.5 * (cov + cov.transpose());

  Vector r2(dim);
  for (Eigen::Index j = 0; j < dim; ++j) {
    const double ssr = resid.col(j).squaredNorm();
    const double sst = (y.col(j).array() - y.col(j).mean()).matrix().squaredNorm();
    r2[j] = sst > 0 ? 1.0 - ssr / sst : 0.0;
  }

  // diag((X'X)^-1) from R: (X'X)^-1 = P R^-1 R^-T P'.
  const Matrix r = qr.matrixR().topLeftCorner(regressors, regressors)
                       .triangularView<Eigen::Upper>();
  const Matrix r_inv = r.triangularView<Eigen::Upper>().solve(
      Matrix::Identity(regressors, regressors));
  const Vector diag_perm = r_inv.rowwise().squaredNorm();
  Vector xtx_diag(regressors);
  const auto& perm = qr.colsPermutation().indices();
  for (Eigen::Index i = 0; i < regressors; ++i) xtx_diag[perm[i]] = diag_perm[i];

  Matrix coef_se(dim, regressors);
  Matrix cov_se(dim, dim);
  for (Eigen::Index eq = 0; eq < dim; ++eq) {
    for (Eigen::Index j = 0; j < regressors; ++j)
      coef_se(eq, j) = std::sqrt(cov(eq, eq) * xtx_diag[j]);
    for (Eigen::Index j = 0; j < dim; ++j)
      cov_se(eq, j) = std::sqrt((cov(eq, eq) * cov(j, j) + cov(eq, j) * cov(eq, j)) /
                                static_cast<double>(rows));
  }

  VarParameters params;
  params.k = series.k;
  params.p = series.p;
  params.nu = beta.row(0).transpose();
  params.phi = beta.bottomRows(dim).transpose();
  params.sigma = {cov};

  return FitReport{VarModel(std::move(params)), cov, r2, resid, coef_se, cov_se, rows};
}

void write_fit_report(std::ostream& out, const FitReport& report,
                      const std::vector<std::string>& labels) {
  write_model(out, report.model);
  out << "# residual_covariance observations=" << report.observations << '\n';
  for (Eigen::Index i = 0; i < report.residual_covariance.rows(); ++i)
    out << "# " << format_row(report.residual_covariance.row(i)) << '\n';
  for (Eigen::Index j = 0; j < report.r_squared.size(); ++j) {
    out << "# r2 ";
    if (static_cast<std::size_t>(j) < labels.size()) out << labels[static_cast<std::size_t>(j)];
    else out << "eq" << j + 1;
    out << ' ' << format_double(report.r_squared[j]) << '\n';
  }
}

}  // namespace varcara
