#pragma once

#include "varcara/linalg.hpp"
#include "varcara/model.hpp"
#include "varcara/riskfree.hpp"
#include "varcara/strategy.hpp"

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <vector>

namespace varcara {

// Gauss-Hermite rule for the standard normal: E f(Z) ~ sum_i w_i f(x_i),
// weights summing to one.
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};
GaussHermite gauss_hermite(int n);

// E[exp(-1/2 y'By - b'y - c)] for y ~ N(mean, cov).
struct QuadraticFormSpec {
  Matrix B;
  Vector b;
  double c = 0.0;
  Vector mean;
  Matrix cov;
};

// Closed form |I + B cov|^{-1/2} exp(...); throws NumericalError when the
// expectation does not exist.
double log_mgf_quadratic(const QuadraticFormSpec& spec);
double mgf_quadratic(const QuadraticFormSpec& spec);
// Tensor Gauss-Hermite evaluation of the same expectation.
double mgf_quadrature(const QuadraticFormSpec& spec, int nodes);

struct MonteCarloEstimate {
  double mean = 0.0;
  double std_error = 0.0;
};
MonteCarloEstimate mgf_monte_carlo(const QuadraticFormSpec& spec, long draws,
                                   std::uint64_t seed);

struct OracleConfig {
  int nodes = 40;            // per dimension, >= 10
  double tolerance = 1e-10;  // Newton decrement at every grid state
  int max_iterations = 100;
  // Refuse runs where nodes^{(k+p)(T-1)} * nodes^k exceeds this.
  double max_evaluations = 1e10;
  int threads = 0;  // 0: hardware concurrency
};

// Cost of a nested-quadrature run: grid states in the last decision period
// times the last-period quadrature size. Throws UsageError when the run is
// outside the oracle's scope (k+p <= 3, T <= 4) or over budget.
double oracle_cost(int k, int p, int horizon, const OracleConfig& config);
void check_oracle_cost(int k, int p, int horizon, const OracleConfig& config);

// Dollar allocation at (tau, W_tau, Y_tau).
using Policy = std::function<Vector(int tau, double wealth, const Vector& y)>;
Policy rule_policy(const PortfolioRule& rule);

// E[-exp(-alpha W_T)] by nested tensor quadrature over the innovations, with
// wealth propagated explicitly: W_t = W_{t-1} R_{f,t} + a'(X_t - r_{f,t} 1).
double expected_utility(const VarModel& model, const Policy& policy, const Vector& y0,
                        double w0, double alpha, const RiskFreeCurve& rf, int horizon,
                        const OracleConfig& config = {});

// Optimal allocations tabulated at the visited quadrature states of one
// decision period (row-major: state i occupies dim / k consecutive entries).
struct PeriodGrid {
  int tau = 0;
  int dim = 0;
  int k = 0;
  std::vector<double> states;
  std::vector<double> dollars;

  std::size_t size() const { return k ? dollars.size() / static_cast<std::size_t>(k) : 0; }
  Vector state(std::size_t i) const;
  Vector allocation(std::size_t i) const;
};

struct NumericSolution {
  double value = 0.0;      // V(0, W0, y0)
  double log_factor = 0.0; // log of -V(0, W0, y0) + alpha * growth * W0
  std::vector<PeriodGrid> periods;
  int max_newton_iterations = 0;
  // States solved on a finer rule than config.nodes because the optimal
  // tilt left the resolved region of the base rule. Their children are not
  // on the base grid, so grid_policy cannot drive expected_utility there.
  std::size_t refined_states = 0;
};

// Backward induction: at every quadrature state the conditional expectation
// of the continuation value is maximized numerically (Newton with line
// search, started at zero). Where the base rule cannot resolve the optimal
// tilt the state is re-solved with twice the nodes, up to three times. Throws NumericalError naming the state when an
// optimization does not converge.
NumericSolution numeric_optimal_weights(const VarModel& model, const Vector& y0, double w0,
                                        double alpha, const RiskFreeCurve& rf, int horizon,
                                        const OracleConfig& config = {});

// Looks up the tabulated allocation by exact state; throws for unknown states.
Policy grid_policy(const NumericSolution& solution);

// Expected continuation utility at decision tau as a function of the dollar
// allocation, with the optimal numeric continuation from tau+1 on.
std::function<double(const Vector&)> stage_objective(const VarModel& model,
                                                     const RiskFreeCurve& rf, double alpha,
                                                     int horizon, int tau, const Vector& y,
                                                     double wealth,
                                                     const OracleConfig& config = {});

struct DeviationReport {
  std::vector<double> max_relative;  // per decision period
  std::vector<std::size_t> states;
  double overall() const;
};

// ||a_num - a_rule|| / max(||a_rule||, 1e-3 * rms_tau) over every grid state.
DeviationReport compare_with_rule(const NumericSolution& solution, const PortfolioRule& rule);

void write_deviation_report(std::ostream& out, const DeviationReport& report);

struct RandomModelOptions {
  bool time_varying = false;
  int periods = 0;  // table length when time_varying
  double coefficient_scale = 0.3;
};
// Small random PD model for verification runs.
VarModel random_model(int k, int p, std::uint64_t seed, const RandomModelOptions& options = {});

}  // namespace varcara
