#pragma once

#include "varcara/linalg.hpp"
#include "varcara/riskfree.hpp"

#include <cstdint>
#include <iosfwd>
#include <random>
#include <string>
#include <vector>

namespace varcara {

// Unchecked VAR(1) parameters Y_t = nu + Phi Y_{t-1} + eps_t,
// eps_t ~ N(0, Sigma(t)). `sigma` holds either one matrix (constant) or a
// table for t = 1..sigma.size().
struct VarParameters {
  int k = 0;
  int p = 0;
  Vector nu;
  Matrix phi;
  std::vector<Matrix> sigma;

  int dim() const { return k + p; }
};

struct ModelDiagnostics {
  bool dimensions_ok = true;
  bool positive_definite = true;
  std::vector<double> min_eigenvalues;  // one per Sigma(t)
  double spectral_radius = 0.0;
  std::vector<std::string> errors;
  std::vector<std::string> warnings;

  bool ok() const { return dimensions_ok && positive_definite; }
};

// Never throws; reports dimension consistency, PD margins and the spectral
// radius of Phi (non-stationarity is only a warning).
ModelDiagnostics validate(const VarParameters& params);

// L = [I_k O_{k,p}]: apply() keeps the asset block, transpose_apply() pads
// with zeros.
struct Selector {
  int k = 0;
  int p = 0;

  Vector apply(const Vector& y) const { return y.head(k); }
  Vector transpose_apply(const Vector& x) const;
  Matrix matrix() const;
};

struct StateVector {
  Vector y;
  int t = 0;
};

/// Validated, immutable VAR(1) model with one cached Cholesky factor per
/// distinct innovation covariance.
class VarModel {
 public:
  explicit VarModel(VarParameters params);
  VarModel(int k, int p, Vector nu, Matrix phi, Matrix sigma);

  int k() const { return params_.k; }
  int p() const { return params_.p; }
  int dim() const { return params_.dim(); }
  Selector selector() const { return {params_.k, params_.p}; }

  const VarParameters& parameters() const { return params_; }
  const Vector& nu() const { return params_.nu; }
  const Matrix& phi() const { return params_.phi; }

  bool constant_covariance() const { return params_.sigma.size() == 1; }
  // Number of periods covered; 0 means unbounded (constant covariance).
  int covariance_periods() const;
  const Matrix& sigma(int t) const;
  const SpdFactor& factor(int t) const;

  // nu = L nu~, Phi = L Phi~ (k x (k+p)).
  Vector asset_nu() const { return params_.nu.head(k()); }
  Matrix asset_phi() const { return params_.phi.topRows(k()); }

 private:
  std::size_t index(int t) const;

  VarParameters params_;
  std::vector<SpdFactor> factors_;
};

// mu~_t = nu~ + Phi~ y_prev
Vector conditional_mean(const VarModel& model, const Vector& y_prev);

struct AssetMoments {
  Vector mean;         // L mu~_t
  Matrix cov;          // L Sigma~(t) L'
  Vector excess_mean;  // mean - r_{f,t} 1
};

AssetMoments asset_moments(const VarModel& model, const Vector& y_prev, int t,
                           const RiskFreeCurve& rf);

// Deterministically seeded engine for substream `stream` of `seed`.
std::mt19937_64 make_stream(std::uint64_t seed, std::uint64_t stream);

// Path Y_0..Y_horizon (index 0 is y0 itself).
std::vector<StateVector> simulate_path(const VarModel& model, const Vector& y0,
                                       int horizon, std::mt19937_64& rng);
std::vector<StateVector> simulate_path(const VarModel& model, const Vector& y0,
                                       int horizon, std::uint64_t seed);

// (I - Phi~)^-1 nu~; requires spectral radius < 1.
Vector stationary_mean(const VarModel& model);
// Gamma = Phi~ Gamma Phi~' + Sigma~; requires constant covariance and
// spectral radius < 1.
Matrix stationary_covariance(const VarModel& model);

// Text format: "k p", nu~, Phi~ rows, then one or more Sigma~ blocks.
// Lines starting with '#' and blank lines are ignored.
VarModel read_model(std::istream& in);
VarModel read_model_file(const std::string& path);
void write_model(std::ostream& out, const VarModel& model);

}  // namespace varcara
