#include "varcara/sim.hpp"

#include "varcara/errors.hpp"

#include <algorithm>
#include <cmath>
#include <exception>
#include <ostream>
#include <thread>

namespace varcara {

std::size_t WealthPaths::strategy_index(const std::string& name) const {
  for (std::size_t i = 0; i < names.size(); ++i)
    if (names[i] == name) return i;
  throw UsageError("unknown strategy: " + name);
}

std::vector<double> WealthPaths::finite_terminal(std::size_t strategy) const {
  std::vector<double> out;
  out.reserve(terminal[strategy].size());
  for (double w : terminal[strategy])
    if (std::isfinite(w)) out.push_back(w);
  return out;
}

WealthPaths simulate_wealth(const VarModel& model, const std::vector<Strategy>& strategies,
                            const SimulationConfig& config) {
  if (config.repetitions < 1) throw UsageError("repetitions must be at least 1");
  if (config.horizon < 1) throw UsageError("horizon must be at least 1");
  if (strategies.empty()) throw UsageError("no strategies to simulate");
  if (config.rf.horizon() < config.horizon) throw UsageError("risk-free curve shorter than horizon");
  if (config.y0.size() != model.dim()) throw DimensionError("initial state has wrong length");
  for (const Strategy& s : strategies) {
    if (s.rule.horizon() != config.horizon) {
      throw UsageError("strategy " + s.name + " has horizon " + std::to_string(s.rule.horizon()) +
                       ", simulation horizon is " + std::to_string(config.horizon));
    }
    if (s.rule.k() != model.k() || s.rule.p() != model.p())
      throw DimensionError("strategy " + s.name + " does not match the model dimensions");
  }

  const int horizon = config.horizon;
  const std::size_t ns = strategies.size();
  const auto reps = static_cast<std::size_t>(config.repetitions);
  const std::size_t stride = static_cast<std::size_t>(horizon) + 1;
  WealthPaths out;
  out.horizon = horizon;
  out.repetitions = config.repetitions;
  out.common_random_numbers = true;
  out.terminal.assign(ns, std::vector<double>(reps));
  out.flagged.assign(ns, {});
  for (const Strategy& s : strategies) out.names.push_back(s.name);
  if (config.keep_paths) out.paths.assign(ns, std::vector<double>(reps * stride));

  const int k = model.k();
  auto run = [&](std::size_t lo, std::size_t hi) {
    for (std::size_t rep = lo; rep < hi; ++rep) {
      auto rng = make_stream(config.seed, rep);
      const auto path = simulate_path(model, config.y0, horizon, rng);
      for (std::size_t s = 0; s < ns; ++s) {
        const PortfolioRule& rule = strategies[s].rule;
        double w = config.w0;
        if (config.keep_paths) out.paths[s][rep * stride] = w;
        for (int t = 1; t <= horizon; ++t) {
          const Vector a = rule.dollars(t - 1, path[static_cast<std::size_t>(t - 1)].y);
          const double r = config.rf.rate(t);
          const Vector excess = path[static_cast<std::size_t>(t)].y.head(k).array() - r;
          w = w * config.rf.gross(t) + a.dot(excess);
          if (config.keep_paths) out.paths[s][rep * stride + static_cast<std::size_t>(t)] = w;
        }
        out.terminal[s][rep] = w;
      }
    }
  };

  int workers = config.threads > 0 ? config.threads
                                   : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));
  workers = static_cast<int>(std::min<std::size_t>(static_cast<std::size_t>(workers), reps));
  std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
  std::vector<std::thread> pool;
  for (int w = 0; w < workers; ++w) {
    const std::size_t lo = reps * static_cast<std::size_t>(w) / static_cast<std::size_t>(workers);
    const std::size_t hi = reps * static_cast<std::size_t>(w + 1) / static_cast<std::size_t>(workers);
    auto task = [&, lo, hi, w] {
      try {
        run(lo, hi);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    };
    if (w + 1 == workers) task();
    else pool.emplace_back(task);
  }
  for (auto& t : pool) t.join();
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);

  for (std::size_t s = 0; s < ns; ++s)
    for (std::size_t rep = 0; rep < reps; ++rep)
      if (!std::isfinite(out.terminal[s][rep])) out.flagged[s].push_back(static_cast<long>(rep));
  return out;
}

Ecdf::Ecdf(std::vector<double> samples) : sorted_(std::move(samples)) {
  if (sorted_.empty()) throw DataError("empirical CDF of an empty sample");
  for (double x : sorted_)
    if (std::isnan(x)) throw DataError("empirical CDF sample contains NaN");
  std::sort(sorted_.begin(), sorted_.end());
}

std::size_t Ecdf::count_at_or_below(double x) const {
  return static_cast<std::size_t>(std::upper_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin());
}

std::size_t Ecdf::count_below(double x) const {
  return static_cast<std::size_t>(std::lower_bound(sorted_.begin(), sorted_.end(), x) - sorted_.begin());
}

double Ecdf::operator()(double x) const {
  return static_cast<double>(count_at_or_below(x)) / static_cast<double>(sorted_.size());
}

double Ecdf::interval_probability(double lo, double hi) const {
  if (hi < lo) return 0.0;
  return static_cast<double>(count_at_or_below(hi) - count_below(lo)) /
         static_cast<double>(sorted_.size());
}

double Ecdf::quantile(double prob) const {
  if (!(prob >= 0.0 && prob <= 1.0)) throw UsageError("quantile level must be in [0, 1]");
  const double n = static_cast<double>(sorted_.size());
  auto idx = static_cast<std::size_t>(std::max(std::ceil(prob * n), 1.0)) - 1;
  return sorted_[std::min(idx, sorted_.size() - 1)];
}

Ecdf ecdf(std::vector<double> samples) { return Ecdf(std::move(samples)); }

ComparisonReport compare(const Ecdf& a, const Ecdf& b, const std::vector<Interval>& probes,
                         double loss_threshold) {
  ComparisonReport rep;
  rep.n_a = a.size();
  rep.n_b = b.size();
  rep.probes = probes;
  for (const Interval& iv : probes) {
    rep.probability_a.push_back(a.interval_probability(iv.lo, iv.hi));
    rep.probability_b.push_back(b.interval_probability(iv.lo, iv.hi));
  }
  std::vector<double> merged;
  merged.reserve(a.size() + b.size());
  std::merge(a.sorted().begin(), a.sorted().end(), b.sorted().begin(), b.sorted().end(),
             std::back_inserter(merged));
  const double median = merged[(merged.size() - 1) / 2];
  std::size_t below = 0, upper = 0, upper_ok = 0;
  for (double x : merged) {
    // Compare counts to keep the test exact: F_a < F_b <=> ca * nb < cb * na.
    const double ca = static_cast<double>(a.count_at_or_below(x)) * static_cast<double>(b.size());
    const double cb = static_cast<double>(b.count_at_or_below(x)) * static_cast<double>(a.size());
    if (ca < cb) ++below;
    if (x >= median) {
      ++upper;
      if (ca <= cb) ++upper_ok;
    }
  }
  rep.fraction_a_below = static_cast<double>(below) / static_cast<double>(merged.size());
  rep.fraction_a_at_or_below_upper = upper ? static_cast<double>(upper_ok) / static_cast<double>(upper) : 0.0;
  rep.loss_threshold = loss_threshold;
  rep.loss_a = static_cast<double>(a.count_below(loss_threshold)) / static_cast<double>(a.size());
  rep.loss_b = static_cast<double>(b.count_below(loss_threshold)) / static_cast<double>(b.size());
  rep.bankruptcy_a = a(0.0);
  rep.bankruptcy_b = b(0.0);
  return rep;
}

void write_report(std::ostream& out, const ComparisonReport& r) {
  out << "strategies " << r.name_a << ' ' << r.name_b << '\n';
  out << "common_random_numbers " << (r.common_random_numbers ? "yes" : "no") << '\n';
  out << "samples " << r.n_a << ' ' << r.n_b << '\n';
  for (std::size_t i = 0; i < r.probes.size(); ++i) {
    out << "interval [" << format_double(r.probes[i].lo) << ',' << format_double(r.probes[i].hi)
        << "] " << format_double(r.probability_a[i]) << ' ' << format_double(r.probability_b[i])
        << '\n';
  }
  out << "fraction_a_below " << format_double(r.fraction_a_below) << '\n';
  out << "fraction_a_at_or_below_upper " << format_double(r.fraction_a_at_or_below_upper) << '\n';
  out << "loss_threshold " << format_double(r.loss_threshold) << '\n';
  out << "loss " << format_double(r.loss_a) << ' ' << format_double(r.loss_b) << '\n';
  out << "bankruptcy " << format_double(r.bankruptcy_a) << ' ' << format_double(r.bankruptcy_b)
      << '\n';
}

void write_ecdf_csv(std::ostream& out, const std::vector<NamedEcdf>& curves, int points) {
  if (curves.empty()) return;
  if (points < 2) throw UsageError("ECDF grid needs at least two points");
  double lo = curves.front().ecdf->min(), hi = curves.front().ecdf->max();
  for (const NamedEcdf& c : curves) {
    lo = std::min(lo, c.ecdf->min());
    hi = std::max(hi, c.ecdf->max());
  }
  out << "strategy,x,F\n";
  for (const NamedEcdf& c : curves) {
    for (int i = 0; i < points; ++i) {
      const double x = i + 1 == points ? hi : lo + (hi - lo) * i / (points - 1);
      out << c.name << ',' << format_double(x) << ',' << format_double((*c.ecdf)(x)) << '\n';
    }
  }
}

void write_samples_csv(std::ostream& out, const WealthPaths& paths) {
  out << "rep";
  for (const auto& n : paths.names) out << ',' << n;
  out << '\n';
  for (long rep = 0; rep < paths.repetitions; ++rep) {
    out << rep;
    for (const auto& col : paths.terminal) out << ',' << format_double(col[static_cast<std::size_t>(rep)]);
    out << '\n';
  }
}

}  // namespace varcara
