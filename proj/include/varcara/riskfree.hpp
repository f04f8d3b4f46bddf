#pragma once

#include <istream>
#include <vector>

namespace varcara {

// Per-period simple risk-free rates r_{f,t}, t = 1..T. Rate t applies to the
// period ending at t, i.e. W_t = W_{t-1} R_{f,t} + ...
class RiskFreeCurve {
 public:
  RiskFreeCurve() = default;
  explicit RiskFreeCurve(std::vector<double> rates);

  static RiskFreeCurve constant(double rate, int horizon);
  static RiskFreeCurve read(std::istream& in);

  int horizon() const { return static_cast<int>(rates_.size()); }
  double rate(int t) const;
  double gross(int t) const { return 1.0 + rate(t); }
  // prod_{i=first}^{last} R_{f,i}; 1 when first > last.
  double growth(int first, int last) const;
  const std::vector<double>& rates() const { return rates_; }

  bool operator==(const RiskFreeCurve&) const = default;

 private:
  std::vector<double> rates_;
};

}  // namespace varcara
