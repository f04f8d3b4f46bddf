#include <doctest.h>

#include "support.hpp"
#include "varcara/errors.hpp"
#include "varcara/oracle.hpp"

using namespace varcara;
using testing::rel_err;

namespace {

QuadraticFormSpec random_spec(std::mt19937_64& rng, int n) {
  QuadraticFormSpec s;
  s.cov = testing::random_spd(rng, n);
  s.mean = testing::gaussian_vector(rng, n, 0.5);
  // eigenvalues of C'BC in [-0.3, 1.5] keep the integrand smooth and the
  // Monte Carlo variance finite
  const Eigen::HouseholderQR<Matrix> qr(testing::gaussian(rng, n, n));
  const Matrix q = qr.householderQ();
  Vector lam(n);
  for (int i = 0; i < n; ++i) lam[i] = testing::uniform(rng, -0.3, 1.5);
  const Matrix g = q * lam.asDiagonal() * q.transpose();
  const Matrix c = s.cov.llt().matrixL();
  const Matrix cinv = c.inverse();
  s.B = cinv.transpose() * g * cinv;
  s.B = 0.5 * (s.B + s.B.transpose());
  s.b = testing::gaussian_vector(rng, n, 0.5);
  s.c = testing::uniform(rng, -1, 1);
  return s;
}

}  // namespace

TEST_CASE("Gauss-Hermite moments") {
  const GaussHermite gh = gauss_hermite(40);
  double sum_w = 0.0;
  for (double w : gh.weights) sum_w += w;
  CHECK(sum_w == doctest::Approx(1.0).epsilon(1e-15));
  // E Z^{2m} = (2m-1)!!, exact for 2m <= 79
  double dfact = 1.0;
  for (int m = 1; m <= 20; ++m) {
    dfact *= 2 * m - 1;
    double mom = 0.0, odd = 0.0;
    for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
      mom += gh.weights[i] * std::pow(gh.nodes[i], 2 * m);
      odd += gh.weights[i] * std::pow(gh.nodes[i], 2 * m - 1);
    }
    CHECK(mom / dfact == doctest::Approx(1.0).epsilon(1e-11));
    CHECK(std::abs(odd) < 1e-12 * dfact);
  }
}

TEST_CASE("mgf_quadratic closed form") {
  QuadraticFormSpec s{Matrix::Zero(2, 2), Vector::Zero(2), 0.0, Vector::Zero(2), Matrix::Identity(2, 2)};
  CHECK(mgf_quadratic(s) == doctest::Approx(1.0).epsilon(1e-15));
  QuadraticFormSpec scalar{Matrix::Ones(1, 1), Vector::Zero(1), 0.0, Vector::Zero(1), Matrix::Ones(1, 1)};
  CHECK(mgf_quadratic(scalar) == doctest::Approx(0.7071067811865476).epsilon(1e-15));
  QuadraticFormSpec bad = scalar;
  bad.B(0, 0) = -1.5;
  CHECK_THROWS_AS(mgf_quadratic(bad), NumericalError);
  QuadraticFormSpec asym{Matrix::Zero(2, 2), Vector::Zero(2), 0.0, Vector::Zero(2), Matrix::Identity(2, 2)};
  asym.B(0, 1) = 1.0;
  CHECK_THROWS_AS(mgf_quadratic(asym), UsageError);
}

TEST_CASE("mgf routes agree") {
  std::mt19937_64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const QuadraticFormSpec s = random_spec(rng, 2 + trial % 2);
    const double exact = mgf_quadratic(s);
    CHECK(std::abs(mgf_quadrature(s, 40) / exact - 1.0) < 1e-8);
    const MonteCarloEstimate mc = mgf_monte_carlo(s, 200000, 100 + trial);
    CHECK(std::abs(mc.mean - exact) < 4.0 * mc.std_error);
  }
}

TEST_CASE("cost model") {
  OracleConfig cfg;
  CHECK_NOTHROW(check_oracle_cost(1, 1, 3, cfg));
  CHECK_THROWS_AS(check_oracle_cost(2, 2, 5, cfg), UsageError);
  CHECK_THROWS_AS(check_oracle_cost(2, 1, 3, cfg), UsageError);  // 40^8 > 1e10
  CHECK(oracle_cost(1, 1, 3, cfg) == doctest::Approx(std::pow(40.0, 5)));
  OracleConfig few;
  few.nodes = 8;
  CHECK_THROWS_AS(check_oracle_cost(1, 0, 1, few), UsageError);
}

TEST_CASE("expected utility") {
  std::mt19937_64 rng(22);
  const VarModel m = testing::random_var(rng, 2, 1);
  const RiskFreeCurve rf({0.002, 0.004});
  const Vector y0 = testing::gaussian_vector(rng, 3, 0.5);
  SUBCASE("zero allocation is deterministic") {
    const Policy zero = [](int, double, const Vector&) { return Vector(Vector::Zero(2)); };
    const double eu = expected_utility(m, zero, y0, 1.5, 0.7, rf, 1);
    CHECK(eu == doctest::Approx(-std::exp(-0.7 * 1.5 * rf.gross(1))).epsilon(1e-14));
  }
  SUBCASE("one period matches the lognormal closed form") {
    const RiskFreeCurve rf1({0.003});
    const PortfolioRule rule = build_rule(m, rf1, 0.7, 1);
    const Vector a = rule.dollars(0, y0);
    const auto am = asset_moments(m, y0, 1, rf1);
    const double closed = -std::exp(-0.7 * (1.5 * rf1.gross(1) + a.dot(am.excess_mean)) +
                                    0.5 * 0.49 * a.dot(am.cov * a));
    const double eu = expected_utility(m, rule_policy(rule), y0, 1.5, 0.7, rf1, 1);
    CHECK(std::abs(eu / closed - 1.0) < 1e-10);
  }
  SUBCASE("perturbed policies do worse") {
    const VarModel m2 = testing::random_var(rng, 1, 1);
    const Vector y = testing::gaussian_vector(rng, 2, 0.5);
    const PortfolioRule rule = build_rule(m2, rf, 1.2, 2);
    const double best = expected_utility(m2, rule_policy(rule), y, 1.0, 1.2, rf, 2);
    CHECK(best == doctest::Approx(optimal_value(m2, rf, 1.2, 2, y, 1.0)).epsilon(1e-10));
    for (int i = 0; i < 100; ++i) {
      const double d0 = testing::uniform(rng, -0.5, 0.5), d1 = testing::uniform(rng, -0.5, 0.5);
      const double slope = testing::uniform(rng, -0.3, 0.3);
      const Policy perturbed = [&](int tau, double, const Vector& s) {
        Vector a = rule.dollars(tau, s);
        a[0] += tau == 0 ? d0 : d1 + slope * s[1];
        return a;
      };
      CHECK(expected_utility(m2, perturbed, y, 1.0, 1.2, rf, 2) <= best + 1e-8 * std::abs(best));
    }
  }
}

TEST_CASE("numeric oracle, one period") {
  std::mt19937_64 rng(23);
  const VarModel m = testing::random_var(rng, 2, 1);
  const RiskFreeCurve rf({0.001});
  const Vector y0 = testing::gaussian_vector(rng, 3, 0.5);
  const NumericSolution sol = numeric_optimal_weights(m, y0, 1.0, 1.4, rf, 1);
  REQUIRE(sol.periods.size() == 1);
  REQUIRE(sol.periods[0].size() == 1);
  const Vector w = weights_last(m, y0, 1, rf, 1.4, 1.0);
  CHECK(rel_err(sol.periods[0].allocation(0), w) < 1e-8);
}

TEST_CASE("numeric oracle, i.i.d. model") {
  std::mt19937_64 rng(24);
  const Vector mu = testing::gaussian_vector(rng, 2, 0.2);
  const Matrix s = testing::random_spd(rng, 2);
  const VarModel m(2, 0, mu, Matrix::Zero(2, 2), s);
  const RiskFreeCurve rf({0.001, 0.002});
  const NumericSolution sol = numeric_optimal_weights(m, Vector::Zero(2), 1.0, 1.0, rf, 2);
  const PortfolioRule iid = build_iid_rule(mu, s, 0, rf, 1.0, 2);
  for (const PeriodGrid& g : sol.periods) {
    const Vector expected = iid.dollars(g.tau, Vector::Zero(2));
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(rel_err(g.allocation(i), expected) < 1e-8);
  }
  CHECK(sol.periods[1].size() == 1600);
}

TEST_CASE("numeric oracle matches the rule, k=1 p=1 T=3") {
  const VarModel m = random_model(1, 1, 31);
  const RiskFreeCurve rf({0.001, 0.003, 0.002});
  const Vector y0 = (Vector(2) << 0.2, -0.3).finished();
  OracleConfig cfg;
  cfg.nodes = 20;  // keeps the unit suite fast; acceptance runs use 40
  const NumericSolution sol = numeric_optimal_weights(m, y0, 1.0, 0.9, rf, 3, cfg);
  const DeviationReport rep = compare_with_rule(sol, build_rule(m, rf, 0.9, 3));
  CHECK(rep.states == std::vector<std::size_t>{1, 400, 160000});
  CHECK(rep.overall() < 1e-6);
  CHECK(sol.max_newton_iterations < cfg.max_iterations);
  SUBCASE("value and policy agree") {
    REQUIRE(sol.refined_states == 0);
    const double closed = optimal_value(m, rf, 0.9, 3, y0, 1.0);
    CHECK(std::abs(sol.value / closed - 1.0) < 1e-8);
    const double eu = expected_utility(m, grid_policy(sol), y0, 1.0, 0.9, rf, 3, cfg);
    CHECK(std::abs(eu / sol.value - 1.0) < 1e-8);
  }
}

TEST_CASE("oracle is thread-count independent") {
  const VarModel m = random_model(2, 0, 32);
  const RiskFreeCurve rf = RiskFreeCurve::constant(0.001, 3);
  OracleConfig one, many;
  one.nodes = many.nodes = 12;
  one.threads = 1;
  many.threads = 3;
  const NumericSolution a = numeric_optimal_weights(m, Vector::Zero(2), 1.0, 1.0, rf, 3, one);
  const NumericSolution b = numeric_optimal_weights(m, Vector::Zero(2), 1.0, 1.0, rf, 3, many);
  CHECK(a.value == b.value);
  for (std::size_t t = 0; t < a.periods.size(); ++t) {
    CHECK(a.periods[t].states == b.periods[t].states);
    CHECK(a.periods[t].dollars == b.periods[t].dollars);
  }
}

TEST_CASE("stage objective is concave with the rule at its maximum") {
  const VarModel m = random_model(2, 0, 33);
  const RiskFreeCurve rf({0.002, 0.001});
  const Vector y = (Vector(2) << 0.1, -0.2).finished();
  OracleConfig cfg;
  cfg.nodes = 20;
  const PortfolioRule rule = build_rule(m, rf, 1.1, 2);
  for (int tau = 0; tau < 2; ++tau) {
    const auto f = stage_objective(m, rf, 1.1, 2, tau, y, 1.0, cfg);
    const Vector a = rule.dollars(tau, y);
    const double h = 1e-3;
    Matrix hess(2, 2);
    Vector grad(2);
    for (int i = 0; i < 2; ++i) {
      const Vector ei = Vector::Unit(2, i) * h;
      grad[i] = (f(a + ei) - f(a - ei)) / (2 * h);
      for (int j = 0; j < 2; ++j) {
        const Vector ej = Vector::Unit(2, j) * h;
        hess(i, j) = (f(a + ei + ej) - f(a + ei - ej) - f(a - ei + ej) + f(a - ei - ej)) / (4 * h * h);
      }
    }
    CHECK(Eigen::SelfAdjointEigenSolver<Matrix>(0.5 * (hess + hess.transpose())).eigenvalues().maxCoeff() < 0.0);
    CHECK(grad.norm() < 1e-6 * hess.norm());
  }
}

TEST_CASE("non-convergence names the state") {
  const VarModel m = random_model(1, 0, 34);
  OracleConfig cfg;
  cfg.max_iterations = 0;
  CHECK_THROWS_WITH_AS(numeric_optimal_weights(m, Vector::Zero(1), 1.0, 1.0, RiskFreeCurve::constant(0, 2), 2, cfg),
                       doctest::Contains("tau="), NumericalError);
}

TEST_CASE("grid policy rejects unknown states") {
  const VarModel m = random_model(1, 0, 35);
  OracleConfig cfg;
  cfg.nodes = 10;
  const NumericSolution sol = numeric_optimal_weights(m, Vector::Zero(1), 1.0, 1.0, RiskFreeCurve::constant(0, 2), 2, cfg);
  const Policy p = grid_policy(sol);
  CHECK_NOTHROW(p(0, 1.0, Vector::Zero(1)));
  CHECK_THROWS_AS(p(0, 1.0, Vector::Ones(1)), UsageError);
}

namespace {

// Time-varying covariance and a non-flat curve, so a shifted period index in
// any branch shows up as a deviation.
double branch_deviation(int t, std::uint64_t seed) {
  RandomModelOptions opts;
  opts.time_varying = true;
  opts.periods = t;
  const VarModel m = random_model(1, 1, seed, opts);
  const std::vector<double> rates{0.002, 0.0005, 0.003};
  const RiskFreeCurve rf(std::vector<double>(rates.begin(), rates.begin() + t));
  const Vector y0 = (Vector(2) << -0.1, 0.25).finished();
  const NumericSolution sol = numeric_optimal_weights(m, y0, 1.0, 1.3, rf, t);
  return compare_with_rule(sol, build_rule(m, rf, 1.3, t)).max_relative[0];
}

}  // namespace

TEST_CASE("branch t=1: last-period weights match the oracle") { CHECK(branch_deviation(1, 41) < 1e-8); }

TEST_CASE("branch t=2: weights two periods before the horizon match the oracle") {
  CHECK(branch_deviation(2, 42) < 1e-6);
}

TEST_CASE("branch t=3: weights three periods before the horizon match the oracle") {
  CHECK(branch_deviation(3, 43) < 1e-6);
}

TEST_CASE("tail states are re-solved on a finer rule") {
  // strong predictability pushes optimal tilts past the 40-node rule
  const VarModel m = random_model(1, 1, 1018);
  const RiskFreeCurve rf = RiskFreeCurve::constant(0.0, 2);
  const Vector y0 = (Vector(2) << 0.3, -0.4).finished();
  const NumericSolution sol = numeric_optimal_weights(m, y0, 1.0, 1.0, rf, 2);
  CHECK(sol.refined_states > 0);
  CHECK(compare_with_rule(sol, build_rule(m, rf, 1.0, 2)).overall() < 1e-6);
}
