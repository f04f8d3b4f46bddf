#pragma once

#include "varcara/linalg.hpp"
#include "varcara/model.hpp"
#include "varcara/riskfree.hpp"
#include "varcara/strategy.hpp"

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

namespace varcara {

struct Strategy {
  std::string name;
  PortfolioRule rule;
};

struct SimulationConfig {
  long repetitions = 100000;
  int horizon = 0;
  double w0 = 1.0;
  Vector y0;
  RiskFreeCurve rf;
  std::uint64_t seed = 0;
  int threads = 0;  // 0: hardware concurrency
  bool keep_paths = false;
};

/// Terminal wealth per strategy and repetition. Repetition i always uses
/// innovation substream make_stream(seed, i), shared by every strategy.
struct WealthPaths {
  int horizon = 0;
  long repetitions = 0;
  bool common_random_numbers = true;
  std::vector<std::string> names;
  std::vector<std::vector<double>> terminal;  // [strategy][rep]
  std::vector<std::vector<long>> flagged;     // reps with non-finite wealth
  // [strategy][rep * (horizon + 1) + t], only with keep_paths.
  std::vector<std::vector<double>> paths;

  std::size_t strategy_index(const std::string& name) const;
  // Terminal values with flagged repetitions removed.
  std::vector<double> finite_terminal(std::size_t strategy) const;
};

// W_t = W_{t-1} R_{f,t} + a'_{t-1} (X_t - r_{f,t} 1) with the rule's dollar
// allocation; deterministic in the seed and independent of the thread count.
WealthPaths simulate_wealth(const VarModel& model, const std::vector<Strategy>& strategies,
                            const SimulationConfig& config);

/// Empirical CDF F(x) = #{samples <= x} / n.
class Ecdf {
 public:
  explicit Ecdf(std::vector<double> samples);

  std::size_t size() const { return sorted_.size(); }
  double min() const { return sorted_.front(); }
  double max() const { return sorted_.back(); }
  const std::vector<double>& sorted() const { return sorted_; }

  std::size_t count_at_or_below(double x) const;
  std::size_t count_below(double x) const;
  double operator()(double x) const;
  // P(lo <= X <= hi)
  double interval_probability(double lo, double hi) const;
  // Smallest sample x with F(x) >= prob.
  double quantile(double prob) const;

 private:
  std::vector<double> sorted_;
};

Ecdf ecdf(std::vector<double> samples);

struct Interval {
  double lo = 0.0;
  double hi = 0.0;
};

struct ComparisonReport {
  std::string name_a;
  std::string name_b;
  bool common_random_numbers = false;
  std::size_t n_a = 0;
  std::size_t n_b = 0;
  std::vector<Interval> probes;
  std::vector<double> probability_a;
  std::vector<double> probability_b;
  // Over the merged sample points: fraction with F_a < F_b, and fraction at
  // or above the merged median with F_a <= F_b.
  double fraction_a_below = 0.0;
  double fraction_a_at_or_below_upper = 0.0;
  double loss_threshold = 0.0;
  double loss_a = 0.0;  // F(threshold-), i.e. P(W < threshold)
  double loss_b = 0.0;
  double bankruptcy_a = 0.0;  // F(0)
  double bankruptcy_b = 0.0;
};

ComparisonReport compare(const Ecdf& a, const Ecdf& b, const std::vector<Interval>& probes,
                         double loss_threshold);

void write_report(std::ostream& out, const ComparisonReport& report);

struct NamedEcdf {
  std::string name;
  const Ecdf* ecdf;
};
// CSV "strategy,x,F" on `points` evenly spaced values over the merged range.
void write_ecdf_csv(std::ostream& out, const std::vector<NamedEcdf>& curves, int points = 512);
// CSV "rep,<strategy>..." of terminal wealth; flagged entries print as nan/inf.
void write_samples_csv(std::ostream& out, const WealthPaths& paths);

}  // namespace varcara
