#include "varcara/riskfree.hpp"

#include "varcara/errors.hpp"
#include "varcara/linalg.hpp"

#include <cmath>
#include <string>

namespace varcara {

RiskFreeCurve::RiskFreeCurve(std::vector<double> rates) : rates_(std::move(rates)) {
  for (std::size_t i = 0; i < rates_.size(); ++i) {
    if (!std::isfinite(rates_[i]) || !(1.0 + rates_[i] > 0.0)) {
      throw DataError("risk-free gross return must be positive at period " +
                      std::to_string(i + 1));
    }
  }
}

RiskFreeCurve RiskFreeCurve::constant(double rate, int horizon) {
  if (horizon < 0) throw UsageError("negative horizon");
  return RiskFreeCurve(std::vector<double>(static_cast<std::size_t>(horizon), rate));
}

RiskFreeCurve RiskFreeCurve::read(std::istream& in) {
  std::vector<double> rates;
  std::string token;
  while (in >> token) {
    if (token.starts_with('#')) {
      std::getline(in, token);
      continue;
    }
    auto v = parse_double(token);
    if (!v) throw DataError("bad risk-free rate '" + token + "'");
    rates.push_back(*v);
  }
  return RiskFreeCurve(std::move(rates));
}

double RiskFreeCurve::rate(int t) const {
  if (t < 1 || t > horizon()) {
    throw UsageError("risk-free rate requested for period " + std::to_string(t) +
                     " outside 1.." + std::to_string(horizon()));
  }
  return rates_[static_cast<std::size_t>(t - 1)];
}

double RiskFreeCurve::growth(int first, int last) const {
  double g = 1.0;
  for (int i = first; i <= last; ++i) g *= gross(i);
  return g;
}

}  // namespace varcara
