#include "varcara/strategy.hpp"

#include "varcara/errors.hpp"

#include <cmath>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace varcara {

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kGeneral: return "general";
    case Variant::kNoPredictors: return "nopred";
    case Variant::kIid: return "iid";
    case Variant::kLiteral: return "literal";
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  if (name == "general") return Variant::kGeneral;
  if (name == "nopred") return Variant::kNoPredictors;
  if (name == "iid") return Variant::kIid;
  if (name == "literal") return Variant::kLiteral;
  throw UsageError("unknown variant '" + std::string(name) + "'");
}

PortfolioRule::PortfolioRule(Variant variant, double alpha, RiskFreeCurve rf, int k, int p,
                             std::vector<RulePeriod> periods)
    : variant_(variant), alpha_(alpha), rf_(std::move(rf)), k_(k), p_(p),
      periods_(std::move(periods)) {
  if (!(alpha_ > 0.0)) throw UsageError("risk aversion must be positive");
  if (periods_.empty()) throw UsageError("rule needs at least one period");
  if (rf_.horizon() != horizon()) throw UsageError("risk-free curve does not match horizon");
  for (const auto& per : periods_) {
    if (per.slope.rows() != k_ || per.slope.cols() != k_ + p_ || per.offset.size() != k_)
      throw DimensionError("rule period has inconsistent dimensions");
    if (!(per.discount > 0.0)) throw DataError("rule discount must be positive");
  }
}

const RulePeriod& PortfolioRule::period(int tau) const {
  if (tau < 0 || tau >= horizon()) {
    throw UsageError("decision period " + std::to_string(tau) + " outside 0.." +
                     std::to_string(horizon() - 1));
  }
  return periods_[static_cast<std::size_t>(tau)];
}

Vector PortfolioRule::dollars(int tau, const Vector& y) const {
  const RulePeriod& per = period(tau);
  if (y.size() != k_ + p_) throw DimensionError("state has wrong length for rule");
  return (per.slope * y + per.offset) / (alpha_ * per.discount);
}

Allocation evaluate_rule(const PortfolioRule& rule, int tau, const Vector& y, double wealth) {
  if (wealth == 0.0) throw std::domain_error("portfolio weights undefined at zero wealth");
  Allocation out;
  out.dollars = rule.dollars(tau, y);
  out.weights = out.dollars / wealth;
  return out;
}

namespace {

RiskFreeCurve truncate(const RiskFreeCurve& rf, int horizon) {
  if (horizon < 1) throw UsageError("horizon must be at least 1");
  if (rf.horizon() < horizon) {
    throw UsageError("risk-free curve covers " + std::to_string(rf.horizon()) +
                     " periods, horizon is " + std::to_string(horizon));
  }
  return RiskFreeCurve(std::vector<double>(rf.rates().begin(), rf.rates().begin() + horizon));
}

void check_common(const RiskFreeCurve& rf, double alpha, int horizon) {
  if (!(alpha > 0.0)) throw UsageError("risk aversion must be positive");
  if (horizon < 1) throw UsageError("horizon must be at least 1");
  if (rf.horizon() < horizon) throw UsageError("risk-free curve shorter than horizon");
}

void check_tau(int tau, int horizon) {
  if (tau < 0 || tau >= horizon) {
    throw UsageError("decision period " + std::to_string(tau) + " outside 0.." +
                     std::to_string(horizon - 1));
  }
}

double scale(double alpha, double wealth, double discount) {
  if (wealth == 0.0) throw std::domain_error("portfolio weights undefined at zero wealth");
  return 1.0 / (alpha * wealth * discount);
}

// Exact backward recursion. The value at decision tau is exponential-quadratic
// in the state; the optimal dollar allocation solves the k-dimensional
// stationarity condition L M (g - beta L'a) = r 1 with M = (S^-1 + P)^-1.
struct Recursion {
  std::vector<RulePeriod> periods;
  std::vector<ValueCoefficients> values;
};

Recursion solve_general(const VarModel& model, const RiskFreeCurve& rf, double,
                        int horizon) {
  const int n = model.dim();
  const int k = model.k();
  const Matrix& phi = model.phi();
  const Vector& nu = model.nu();
  const Vector ones = Vector::Ones(k);

  Recursion out;
  out.periods.resize(static_cast<std::size_t>(horizon));
  out.values.resize(static_cast<std::size_t>(horizon) + 1);
  ValueCoefficients next{1.0, Matrix::Zero(n, n), Vector::Zero(n), 0.0};
  out.values.back() = next;

  for (int tau = horizon - 1; tau >= 0; --tau) {
    const SpdFactor& sf = model.factor(tau + 1);
    const Matrix& c_low = sf.lower();
    const double r = rf.rate(tau + 1);
    const double discount = rf.growth(tau + 2, horizon);

    const SpdFactor g(Matrix::Identity(n, n) + c_low.transpose() * next.P * c_low);
    auto apply_m = [&](const Matrix& x) -> Matrix {
      return c_low * g.solve(Matrix(c_low.transpose() * x));
    };
    const Matrix m_lt = apply_m(Matrix::Identity(n, n).leftCols(k));  // M L'
    const SpdFactor lml(Matrix(m_lt.topRows(k)));
    auto apply_n = [&](const Matrix& x) -> Matrix {
      const Matrix mx = apply_m(x);
      Matrix res = x;
      res.topRows(k) -= lml.solve(Matrix(mx.topRows(k)));
      return res;
    };

    const Matrix sinv_phi = sf.solve(phi);
    const Vector sinv_nu = sf.solve(nu);

    RulePeriod& per = out.periods[static_cast<std::size_t>(tau)];
    per.discount = discount;
    per.slope = lml.solve(Matrix(apply_m(sinv_phi).topRows(k)));
    const Vector m_g0 = apply_m(Matrix(sinv_nu - next.q));
    per.offset = lml.solve(Vector(m_g0.head(k) - r * ones));

    // Value update, first as a quadratic in the conditional mean m.
    auto apply_q = [&](const Matrix& x) -> Matrix {
      const Matrix sx = sf.solve(x);
      return sx - sf.solve(apply_m(apply_n(sx)));
    };
    const Vector k_ones = lml.solve(ones);
    Vector lt_k_ones = Vector::Zero(n);
    lt_k_ones.head(k) = k_ones;
    const Vector h0 = -apply_n(next.q) + r * lt_k_ones;
    const Vector s = -sf.solve(Vector(apply_m(apply_n(h0)))) -
                     r * sf.solve(Vector(apply_m(lt_k_ones)));
    const Vector m_q = apply_m(next.q);
    const double constant = -0.5 * h0.dot(Vector(apply_m(h0))) +
                            r * k_ones.dot(m_q.head(k) + r * ones) + next.c +
                            0.5 * g.log_det();

    const Matrix q_phi = apply_q(phi);
    const Vector q_nu = apply_q(nu);
    ValueCoefficients cur;
    cur.growth = rf.growth(tau + 1, horizon);
    cur.P = phi.transpose() * q_phi;
    cur.P = 0.5 * (cur.P + cur.P.transpose());
    cur.q = phi.transpose() * (q_nu + s);
    cur.c = 0.5 * nu.dot(q_nu) + s.dot(nu) + constant;
    out.values[static_cast<std::size_t>(tau)] = cur;
    next = cur;
  }
  return out;
}

std::vector<RulePeriod> solve_no_predictors(const VarModel& model, const RiskFreeCurve& rf,
                                            int horizon) {
  const int k = model.k();
  const Matrix& phi = model.phi();
  const Vector& nu = model.nu();
  const Vector ones = Vector::Ones(k);
  std::vector<RulePeriod> periods(static_cast<std::size_t>(horizon));
  for (int tau = 0; tau < horizon; ++tau) {
    RulePeriod& per = periods[static_cast<std::size_t>(tau)];
    const SpdFactor& s1 = model.factor(tau + 1);
    const double r1 = rf.rate(tau + 1);
    per.discount = rf.growth(tau + 2, horizon);
    per.slope = s1.solve(phi);
    per.offset = s1.solve(Vector(nu - r1 * ones));
    if (tau < horizon - 1) {
      const double r2 = rf.rate(tau + 2);
      const Vector shift = nu - r2 * ones + r1 * (phi * ones);
      per.offset -= phi.transpose() * model.factor(tau + 2).solve(shift);
    }
  }
  return periods;
}

// Joint-VAR formula with the classical indices: mu~* shifted by r_{tau+2},
// nu~* shifted by r_{tau+3}, hedge term with r_{tau+2}.
std::vector<RulePeriod> solve_literal(const VarModel& model, const RiskFreeCurve& rf,
                                      int horizon) {
  const int k = model.k();
  const Selector sel = model.selector();
  const Matrix& phi_t = model.phi();
  const Vector& nu_t = model.nu();
  const Matrix phi = model.asset_phi();
  const Vector nu = model.asset_nu();
  const Vector ones = Vector::Ones(k);
  const Vector lt_ones = sel.transpose_apply(ones);

  std::vector<RulePeriod> periods(static_cast<std::size_t>(horizon));
  for (int tau = 0; tau < horizon; ++tau) {
    RulePeriod& per = periods[static_cast<std::size_t>(tau)];
    const int t = horizon - tau;
    per.discount = rf.growth(tau + 2, horizon);
    if (t == 1) {
      const SpdFactor sig(Matrix(model.sigma(horizon).topLeftCorner(k, k)));
      per.slope = sig.solve(phi);
      per.offset = sig.solve(Vector(nu - rf.rate(horizon) * ones));
      continue;
    }
    const SpdFactor& s1 = model.factor(tau + 1);
    per.slope = s1.solve(phi_t).topRows(k);
    if (t == 2) {
      const double rt = rf.rate(horizon);
      const SpdFactor sig(Matrix(model.sigma(horizon).topLeftCorner(k, k)));
      const Vector first = s1.solve(Vector(nu_t - rt * lt_ones)).head(k);
      const Vector inner = nu - rt * ones + rt * (phi * lt_ones);
      const Vector second = (phi.transpose() * sig.solve(inner)).head(k);
      per.offset = first - second;
    } else {
      const double r2 = rf.rate(tau + 2);
      const double r3 = rf.rate(tau + 3);
      const Vector first = s1.solve(Vector(nu_t - r2 * lt_ones)).head(k);
      const Vector inner = nu_t - r3 * lt_ones + r2 * (phi_t * lt_ones);
      const Vector second =
          (phi_t.transpose() * model.factor(tau + 2).solve(inner)).head(k);
      per.offset = first - second;
    }
  }
  return periods;
}

}  // namespace

IidMoments unconditional_asset_moments(const VarModel& model) {
  const int k = model.k();
  IidMoments m;
  m.mean = stationary_mean(model).head(k);
  m.cov = stationary_covariance(model).topLeftCorner(k, k);
  return m;
}

PortfolioRule build_iid_rule(const Vector& mu, const Matrix& sigma, int p,
                             const RiskFreeCurve& rf, double alpha, int horizon) {
  check_common(rf, alpha, horizon);
  const Eigen::Index k = mu.size();
  if (sigma.rows() != k || sigma.cols() != k) throw DimensionError("iid moments mismatch");
  const SpdFactor sf(sigma);
  std::vector<RulePeriod> periods(static_cast<std::size_t>(horizon));
  for (int tau = 0; tau < horizon; ++tau) {
    RulePeriod& per = periods[static_cast<std::size_t>(tau)];
    per.discount = rf.growth(tau + 2, horizon);
    per.slope = Matrix::Zero(k, k + p);
    per.offset = sf.solve(Vector(mu.array() - rf.rate(tau + 1)));
  }
  return PortfolioRule(Variant::kIid, alpha, truncate(rf, horizon), static_cast<int>(k), p,
                       std::move(periods));
}

PortfolioRule build_rule(const VarModel& model, const RiskFreeCurve& rf, double alpha,
                         int horizon, Variant variant) {
  check_common(rf, alpha, horizon);
  switch (variant) {
    case Variant::kGeneral:
      return PortfolioRule(variant, alpha, truncate(rf, horizon), model.k(), model.p(),
                           solve_general(model, rf, alpha, horizon).periods);
    case Variant::kNoPredictors:
      if (model.p() != 0) throw UsageError("the no-predictor rule needs p = 0");
      return PortfolioRule(variant, alpha, truncate(rf, horizon), model.k(), 0,
                           solve_no_predictors(model, rf, horizon));
    case Variant::kLiteral:
      return PortfolioRule(variant, alpha, truncate(rf, horizon), model.k(), model.p(),
                           solve_literal(model, rf, horizon));
    case Variant::kIid: {
      const IidMoments m = unconditional_asset_moments(model);
      return build_iid_rule(m.mean, m.cov, model.p(), rf, alpha, horizon);
    }
  }
  throw UsageError("unknown variant");
}

Vector weights_last(const VarModel& model, const Vector& y_prev, int horizon,
                    const RiskFreeCurve& rf, double alpha, double wealth) {
  check_common(rf, alpha, horizon);
  const AssetMoments m = asset_moments(model, y_prev, horizon, rf);
  return scale(alpha, wealth, 1.0) * SpdFactor(m.cov).solve(m.excess_mean);
}

Vector weights_no_predictors(const VarModel& model, const Vector& y_prev,
                             const RiskFreeCurve& rf, double alpha, double wealth, int tau,
                             int horizon) {
  if (model.p() != 0) throw UsageError("no-predictor weights need p = 0");
  check_common(rf, alpha, horizon);
  check_tau(tau, horizon);
  const Vector ones = Vector::Ones(model.k());
  const double discount = rf.growth(tau + 2, horizon);
  const Vector mu_excess = conditional_mean(model, y_prev).array() - rf.rate(tau + 1);
  Vector core = SpdFactor(model.sigma(tau + 1)).solve(mu_excess);
  if (tau < horizon - 1) {
    const Matrix& phi = model.phi();
    const Vector nu_excess = model.nu().array() - rf.rate(tau + 2);
    const Vector shift = nu_excess + rf.rate(tau + 1) * (phi * ones);
    core -= phi.transpose() * SpdFactor(model.sigma(tau + 2)).solve(shift);
  }
  return scale(alpha, wealth, discount) * core;
}

Vector weights_iid(const Vector& mu, const Matrix& sigma, const RiskFreeCurve& rf,
                   double alpha, double wealth, int tau, int horizon) {
  check_common(rf, alpha, horizon);
  check_tau(tau, horizon);
  const double discount = rf.growth(tau + 2, horizon);
  const Vector excess = mu.array() - rf.rate(tau + 1);
  return scale(alpha, wealth, discount) * SpdFactor(sigma).solve(excess);
}

Vector weights_literal(const VarModel& model, const Vector& y_prev, const RiskFreeCurve& rf,
                       double alpha, double wealth, int tau, int horizon) {
  check_common(rf, alpha, horizon);
  check_tau(tau, horizon);
  const auto periods = solve_literal(model, rf, horizon);
  const RulePeriod& per = periods[static_cast<std::size_t>(tau)];
  return scale(alpha, wealth, per.discount) * (per.slope * y_prev + per.offset);
}

std::vector<ValueCoefficients> value_coefficients(const VarModel& model,
                                                  const RiskFreeCurve& rf, double alpha,
                                                  int horizon) {
  check_common(rf, alpha, horizon);
  return solve_general(model, rf, alpha, horizon).values;
}

double optimal_value(const VarModel& model, const RiskFreeCurve& rf, double alpha,
                     int horizon, const Vector& y0, double w0) {
  const auto values = value_coefficients(model, rf, alpha, horizon);
  const ValueCoefficients& v = values.front();
  return -std::exp(-alpha * v.growth * w0 - 0.5 * y0.dot(v.P * y0) - v.q.dot(y0) - v.c);
}

void write_rule(std::ostream& out, const PortfolioRule& rule) {
  out << "rule " << to_string(rule.variant()) << ' ' << rule.k() << ' ' << rule.p() << ' '
      << rule.horizon() << ' ' << format_double(rule.alpha()) << '\n';
  out << "rf";
  for (double r : rule.rf().rates()) out << ' ' << format_double(r);
  out << '\n';
  for (int tau = 0; tau < rule.horizon(); ++tau) {
    const RulePeriod& per = rule.period(tau);
    out << "tau " << tau << ' ' << format_double(per.discount) << '\n';
    for (Eigen::Index i = 0; i < per.slope.rows(); ++i)
      out << format_row(per.slope.row(i)) << '\n';
    out << format_row(per.offset) << '\n';
  }
}

namespace {

std::vector<double> parse_numbers(const std::string& line, std::size_t expected,
                                  const char* what) {
  std::istringstream ss(line);
  std::vector<double> out;
  std::string tok;
  while (ss >> tok) {
    auto v = parse_double(tok);
    if (!v) throw DataError(std::string("rule file: bad number in ") + what);
    out.push_back(*v);
  }
  if (out.size() != expected) throw DataError(std::string("rule file: wrong width in ") + what);
  return out;
}

}  // namespace

PortfolioRule read_rule(std::istream& in) {
  std::string line;
  auto next_line = [&]() {
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos || line[0] == '#') continue;
      return true;
    }
    throw DataError("rule file truncated");
  };
  next_line();
  std::istringstream head(line);
  std::string tag, variant_name, alpha_str;
  int k = 0, p = 0, horizon = 0;
  if (!(head >> tag >> variant_name >> k >> p >> horizon >> alpha_str) || tag != "rule")
    throw DataError("rule file: bad header");
  const auto alpha = parse_double(alpha_str);
  if (!alpha || k < 1 || p < 0 || horizon < 1) throw DataError("rule file: bad header values");
  next_line();
  if (!line.starts_with("rf")) throw DataError("rule file: missing rf line");
  const auto rates = parse_numbers(line.substr(2), static_cast<std::size_t>(horizon), "rf");
  std::vector<RulePeriod> periods(static_cast<std::size_t>(horizon));
  for (int tau = 0; tau < horizon; ++tau) {
    next_line();
    std::istringstream ts(line);
    std::string ttag, disc;
    int idx = -1;
    if (!(ts >> ttag >> idx >> disc) || ttag != "tau" || idx != tau)
      throw DataError("rule file: expected block for tau " + std::to_string(tau));
    RulePeriod& per = periods[static_cast<std::size_t>(tau)];
    const auto d = parse_double(disc);
    if (!d) throw DataError("rule file: bad discount");
    per.discount = *d;
    per.slope.resize(k, k + p);
    for (int i = 0; i < k; ++i) {
      next_line();
      const auto row = parse_numbers(line, static_cast<std::size_t>(k + p), "slope");
      for (int j = 0; j < k + p; ++j) per.slope(i, j) = row[static_cast<std::size_t>(j)];
    }
    next_line();
    const auto off = parse_numbers(line, static_cast<std::size_t>(k), "offset");
    per.offset = Eigen::Map<const Vector>(off.data(), k);
  }
  return PortfolioRule(parse_variant(variant_name), *alpha, RiskFreeCurve(rates), k, p,
                       std::move(periods));
}

}  // namespace varcara
