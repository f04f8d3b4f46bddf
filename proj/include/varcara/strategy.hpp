#pragma once

#include "varcara/linalg.hpp"
#include "varcara/model.hpp"
#include "varcara/riskfree.hpp"

#include <iosfwd>
#include <string>
#include <string_view>
#include <vector>

namespace varcara {

enum class Variant {
  kGeneral,       // exact dynamic-programming solution for the joint VAR(1)
  kNoPredictors,  // closed form for p = 0
  kIid,           // tangency-direction rule for i.i.d. returns
  kLiteral,       // the joint-VAR formula with the classical index layout,
                  // kept for comparison; exact only when p = 0 and r_f is flat
};

std::string to_string(Variant v);
Variant parse_variant(std::string_view name);

// Dollar allocation at decision tau is a = (slope * Y_tau + offset) / (alpha * discount).
struct RulePeriod {
  double discount = 1.0;  // D_tau = prod_{i=tau+2}^{T} R_{f,i}
  Matrix slope;           // k x (k+p)
  Vector offset;          // k
};

/// Precomputed multi-period allocation rule for decisions tau = 0..T-1.
///
/// The stored form is the wealth-free dollar allocation; portfolio weights
/// are dollars / W_tau.
class PortfolioRule {
 public:
  PortfolioRule(Variant variant, double alpha, RiskFreeCurve rf, int k, int p,
                std::vector<RulePeriod> periods);

  Variant variant() const { return variant_; }
  double alpha() const { return alpha_; }
  int horizon() const { return static_cast<int>(periods_.size()); }
  int k() const { return k_; }
  int p() const { return p_; }
  const RiskFreeCurve& rf() const { return rf_; }
  const RulePeriod& period(int tau) const;

  Vector dollars(int tau, const Vector& y) const;

 private:
  Variant variant_;
  double alpha_;
  RiskFreeCurve rf_;
  int k_;
  int p_;
  std::vector<RulePeriod> periods_;
};

struct Allocation {
  Vector weights;
  Vector dollars;
};

// Throws std::domain_error when wealth is zero (weights undefined).
Allocation evaluate_rule(const PortfolioRule& rule, int tau, const Vector& y, double wealth);

PortfolioRule build_rule(const VarModel& model, const RiskFreeCurve& rf, double alpha,
                         int horizon, Variant variant = Variant::kGeneral);

PortfolioRule build_iid_rule(const Vector& mu, const Matrix& sigma, int p,
                             const RiskFreeCurve& rf, double alpha, int horizon);

// Unconditional mean and covariance of the asset block; the moments an
// i.i.d. investor would estimate from the same data.
struct IidMoments {
  Vector mean;
  Matrix cov;
};
IidMoments unconditional_asset_moments(const VarModel& model);

// w*_{T-1} = Sigma(T)^-1 (nu - r_{f,T} 1 + Phi y_prev) / (alpha W).
Vector weights_last(const VarModel& model, const Vector& y_prev, int horizon,
                    const RiskFreeCurve& rf, double alpha, double wealth);

// Direct evaluation of the p = 0 closed form at decision tau.
Vector weights_no_predictors(const VarModel& model, const Vector& y_prev,
                             const RiskFreeCurve& rf, double alpha, double wealth, int tau,
                             int horizon);

// Sigma^-1 (mu - r_{f,tau+1} 1) / (alpha W D_tau).
Vector weights_iid(const Vector& mu, const Matrix& sigma, const RiskFreeCurve& rf,
                   double alpha, double wealth, int tau, int horizon);

// Joint-VAR formula with the classical index layout (see Variant::kLiteral).
Vector weights_literal(const VarModel& model, const Vector& y_prev, const RiskFreeCurve& rf,
                       double alpha, double wealth, int tau, int horizon);

/// Optimal value function coefficients:
///   V(tau, W, Y) = -exp(-alpha * growth * W - 0.5 Y'PY - q'Y - c)
/// with growth = prod_{i=tau+1}^{T} R_{f,i}. Index tau = 0..T.
struct ValueCoefficients {
  double growth = 1.0;
  Matrix P;
  Vector q;
  double c = 0.0;
};
std::vector<ValueCoefficients> value_coefficients(const VarModel& model,
                                                  const RiskFreeCurve& rf, double alpha,
                                                  int horizon);

double optimal_value(const VarModel& model, const RiskFreeCurve& rf, double alpha,
                     int horizon, const Vector& y0, double w0);

void write_rule(std::ostream& out, const PortfolioRule& rule);
PortfolioRule read_rule(std::istream& in);

}  // namespace varcara
