#include "varcara/model.hpp"

#include "varcara/errors.hpp"

#include <cmath>
#include <fstream>
#include <sstream>

namespace varcara {

ModelDiagnostics validate(const VarParameters& params) {
  ModelDiagnostics d;
  const int n = params.dim();
  if (params.k < 1) {
    d.dimensions_ok = false;
    d.errors.push_back("k must be at least 1");
  }
  if (params.p < 0) {
    d.dimensions_ok = false;
    d.errors.push_back("p must be non-negative");
  }
  if (params.nu.size() != n) {
    d.dimensions_ok = false;
    d.errors.push_back("intercept has length " + std::to_string(params.nu.size()) +
                       ", expected " + std::to_string(n));
  }
  if (params.phi.rows() != n || params.phi.cols() != n) {
    d.dimensions_ok = false;
    d.errors.push_back("coefficient matrix is " + std::to_string(params.phi.rows()) + "x" +
                       std::to_string(params.phi.cols()) + ", expected " +
                       std::to_string(n) + "x" + std::to_string(n));
  }
  if (params.sigma.empty()) {
    d.dimensions_ok = false;
    d.errors.push_back("no innovation covariance given");
  }
  for (std::size_t i = 0; i < params.sigma.size(); ++i) {
    const Matrix& s = params.sigma[i];
    if (s.rows() != n || s.cols() != n) {
      d.dimensions_ok = false;
      d.errors.push_back("innovation covariance " + std::to_string(i + 1) +
                         " has wrong shape");
      d.min_eigenvalues.push_back(std::nan(""));
      continue;
    }
    const double lam = is_symmetric(s) ? min_eigenvalue(s) : std::nan("");
    d.min_eigenvalues.push_back(lam);
    if (!is_positive_definite(s)) {
      d.positive_definite = false;
      d.errors.push_back("innovation covariance " + std::to_string(i + 1) +
                         " is not positive definite (min eigenvalue " +
                         format_double(lam) + ")");
    }
  }
  if (params.phi.rows() == params.phi.cols() && params.phi.allFinite()) {
    d.spectral_radius = spectral_radius(params.phi);
    if (d.spectral_radius >= 1.0) {
      d.warnings.push_back("coefficient matrix has spectral radius " +
                           format_double(d.spectral_radius) + " >= 1 (non-stationary)");
    }
  }
  return d;
}

Vector Selector::transpose_apply(const Vector& x) const {
  Vector y = Vector::Zero(k + p);
  y.head(k) = x;
  return y;
}

Matrix Selector::matrix() const {
  Matrix l = Matrix::Zero(k, k + p);
  l.leftCols(k).setIdentity();
  return l;
}

VarModel::VarModel(VarParameters params) : params_(std::move(params)) {
  const ModelDiagnostics d = validate(params_);
  if (!d.dimensions_ok) throw DimensionError(d.errors.front());
  if (!d.positive_definite) throw NotPositiveDefinite(d.errors.front());
  factors_.reserve(params_.sigma.size());
  for (const Matrix& s : params_.sigma) factors_.emplace_back(s);
}

VarModel::VarModel(int k, int p, Vector nu, Matrix phi, Matrix sigma)
    : VarModel(VarParameters{k, p, std::move(nu), std::move(phi), {std::move(sigma)}}) {}

int VarModel::covariance_periods() const {
  return constant_covariance() ? 0 : static_cast<int>(params_.sigma.size());
}

std::size_t VarModel::index(int t) const {
  if (constant_covariance()) return 0;
  if (t < 1 || t > static_cast<int>(params_.sigma.size())) {
    throw UsageError("no innovation covariance for period " + std::to_string(t));
  }
  return static_cast<std::size_t>(t - 1);
}

const Matrix& VarModel::sigma(int t) const { return params_.sigma[index(t)]; }
const SpdFactor& VarModel::factor(int t) const { return factors_[index(t)]; }

Vector conditional_mean(const VarModel& model, const Vector& y_prev) {
  if (y_prev.size() != model.dim()) {
    throw DimensionError("state has length " + std::to_string(y_prev.size()) +
                         ", model expects " + std::to_string(model.dim()));
  }
  return model.nu() + model.phi() * y_prev;
}

AssetMoments asset_moments(const VarModel& model, const Vector& y_prev, int t,
                           const RiskFreeCurve& rf) {
  AssetMoments m;
  m.mean = conditional_mean(model, y_prev).head(model.k());
  m.cov = model.sigma(t).topLeftCorner(model.k(), model.k());
  if (!is_positive_definite(m.cov)) {
    throw NotPositiveDefinite("asset covariance block is degenerate at period " +
                              std::to_string(t));
  }
  m.excess_mean = m.mean.array() - rf.rate(t);
  return m;
}

std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(stream),
                    static_cast<std::uint32_t>(stream >> 32)};
  return std::mt19937_64(seq);
}

std::vector<StateVector> simulate_path(const VarModel& model, const Vector& y0,
                                       int horizon, std::mt19937_64& rng) {
  if (horizon < 1) throw UsageError("horizon must be at least 1");
  if (y0.size() != model.dim()) throw DimensionError("initial state has wrong length");
  std::normal_distribution<double> normal;
  std::vector<StateVector> path;
  path.reserve(static_cast<std::size_t>(horizon) + 1);
  path.push_back({y0, 0});
  Vector xi(model.dim());
  for (int t = 1; t <= horizon; ++t) {
    for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = normal(rng);
    Vector y = model.nu() + model.phi() * path.back().y;
    y.noalias() += model.factor(t).lower().triangularView<Eigen::Lower>() * xi;
    path.push_back({std::move(y), t});
  }
  return path;
}

std::vector<StateVector> simulate_path(const VarModel& model, const Vector& y0,
                                       int horizon, std::uint64_t seed) {
  auto rng = make_stream(seed, 0);
  return simulate_path(model, y0, horizon, rng);
}

Vector stationary_mean(const VarModel& model) {
  const double rho = spectral_radius(model.phi());
  if (rho >= 1.0) {
    throw NumericalError("no stationary mean: spectral radius " + format_double(rho));
  }
  const Matrix a = Matrix::Identity(model.dim(), model.dim()) - model.phi();
  return a.partialPivLu().solve(model.nu());
}

Matrix stationary_covariance(const VarModel& model) {
  if (!model.constant_covariance()) {
    throw UsageError("stationary covariance needs a constant innovation covariance");
  }
  const double rho = spectral_radius(model.phi());
  if (rho >= 1.0) {
    throw NumericalError("no stationary covariance: spectral radius " + format_double(rho));
  }
  // vec(Gamma) = (I - Phi (x) Phi)^-1 vec(Sigma)
  const int n = model.dim();
  const Matrix& phi = model.phi();
  Matrix kron(n * n, n * n);
  for (int i = 0; i < n; ++i)
    for (int j = 0; j < n; ++j) kron.block(i * n, j * n, n, n) = phi(i, j) * phi;
  const Matrix lhs = Matrix::Identity(n * n, n * n) - kron;
  const Matrix& s = model.sigma(1);
  const Vector vec_s = Eigen::Map<const Vector>(s.data(), n * n);
  const Vector vec_g = lhs.partialPivLu().solve(vec_s);
  Matrix gamma = Eigen::Map<const Matrix>(vec_g.data(), n, n);
  return 0.5 * (gamma + gamma.transpose());
}

namespace {

// Collects the numeric rows of a model file, skipping comments and blanks.
std::vector<std::vector<double>> numeric_rows(std::istream& in) {
  std::vector<std::vector<double>> rows;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    std::string_view view(line);
    const auto first = view.find_first_not_of(" \t\r");
    if (first == std::string_view::npos || view[first] == '#') continue;
    std::istringstream ss(line);
    std::vector<double> row;
    std::string token;
    while (ss >> token) {
      auto v = parse_double(token);
      if (!v) {
        throw DataError("model file line " + std::to_string(lineno) + ": bad number '" +
                        token + "'");
      }
      row.push_back(*v);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

VarModel read_model(std::istream& in) {
  const auto rows = numeric_rows(in);
  if (rows.empty() || rows[0].size() != 2) throw DataError("model file must start with 'k p'");
  VarParameters params;
  params.k = static_cast<int>(rows[0][0]);
  params.p = static_cast<int>(rows[0][1]);
  if (params.k != rows[0][0] || params.p != rows[0][1] || params.k < 1 || params.p < 0) {
    throw DataError("model file: invalid dimensions");
  }
  const std::size_t n = static_cast<std::size_t>(params.dim());
  std::size_t r = 1;
  auto take_row = [&](const char* what) {
    if (r >= rows.size()) throw DataError(std::string("model file truncated in ") + what);
    if (rows[r].size() != n) {
      throw DataError(std::string("model file: ") + what + " row has " +
                      std::to_string(rows[r].size()) + " entries, expected " +
                      std::to_string(n));
    }
    return Eigen::Map<const Vector>(rows[r++].data(), static_cast<Eigen::Index>(n));
  };
  auto take_matrix = [&](const char* what) {
    Matrix m(n, n);
    for (std::size_t i = 0; i < n; ++i) m.row(static_cast<Eigen::Index>(i)) = take_row(what);
    return m;
  };
  params.nu = take_row("intercept");
  params.phi = take_matrix("coefficient matrix");
  params.sigma.push_back(take_matrix("innovation covariance"));
  while (r < rows.size()) params.sigma.push_back(take_matrix("innovation covariance"));
  return VarModel(std::move(params));
}

VarModel read_model_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open model file '" + path + "'");
  return read_model(in);
}

void write_model(std::ostream& out, const VarModel& model) {
  const VarParameters& p = model.parameters();
  out << p.k << ' ' << p.p << '\n';
  out << format_row(p.nu) << '\n';
  for (Eigen::Index i = 0; i < p.phi.rows(); ++i) out << format_row(p.phi.row(i)) << '\n';
  for (const Matrix& s : p.sigma)
    for (Eigen::Index i = 0; i < s.rows(); ++i) out << format_row(s.row(i)) << '\n';
}

}  // namespace varcara
