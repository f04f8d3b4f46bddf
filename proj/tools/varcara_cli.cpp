// varcara: fit / weights / simulate / compare / verify

#include "varcara/errors.hpp"
#include "varcara/estimation.hpp"
#include "varcara/model.hpp"
#include "varcara/oracle.hpp"
#include "varcara/sim.hpp"
#include "varcara/strategy.hpp"

#include <CLI11.hpp>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace fs = std::filesystem;
using namespace varcara;

namespace {

enum ExitCode { kOk = 0, kUsage = 1, kData = 2, kNumerical = 3 };

struct Options {
  std::string input;
  std::string model;
  std::string rule_in;
  int k = 4;
  int p = 1;
  std::vector<int> horizons{13, 26, 52, 104};
  std::vector<double> alphas{0.8, 2.0};
  std::string rf = "0";
  double w0 = 1.0;
  std::vector<double> y0;
  long reps = 100000;
  std::uint64_t seed = 20240101;
  int threads = 0;
  std::string out;
  std::vector<std::string> variants{"general", "iid"};
  std::vector<std::string> probes;
  bool dump_samples = false;
  std::string dof = "regressors";
  int nodes = 40;
  double tolerance = 1e-6;
  bool time_varying = false;
};

std::string strategy_name(Variant v) {
  switch (v) {
    case Variant::kGeneral: return "EXP";
    case Variant::kNoPredictors: return "EXP-nopred";
    case Variant::kIid: return "EXP-iid";
    case Variant::kLiteral: return "EXP-literal";
  }
  return "?";
}

std::string label(double x) {
  std::string s = format_double(x);
  std::replace(s.begin(), s.end(), '.', 'p');
  return s;
}

RiskFreeCurve load_rf(const std::string& spec, int horizon) {
  if (auto r = parse_double(spec)) return RiskFreeCurve::constant(*r, horizon);
  std::ifstream in(spec);
  if (!in) throw DataError("cannot open risk-free file: " + spec);
  RiskFreeCurve rf = RiskFreeCurve::read(in);
  if (rf.horizon() < horizon) {
    throw DataError("risk-free file " + spec + " covers " + std::to_string(rf.horizon()) +
                    " periods, need " + std::to_string(horizon));
  }
  return rf;
}

VarModel load_model(const Options& o, bool check_dims) {
  if (!fs::exists(o.model)) throw DataError("model file not found: " + o.model);
  VarModel m = read_model_file(o.model);
  if (check_dims && (m.k() != o.k || m.p() != o.p)) {
    throw DataError("model " + o.model + " has k=" + std::to_string(m.k()) + " p=" +
                    std::to_string(m.p()) + ", flags say k=" + std::to_string(o.k) +
                    " p=" + std::to_string(o.p));
  }
  return m;
}

Vector initial_state(const Options& o, const VarModel& m) {
  if (o.y0.empty()) return stationary_mean(m);
  if (static_cast<int>(o.y0.size()) != m.dim())
    throw UsageError("--y0 needs " + std::to_string(m.dim()) + " values");
  return Eigen::Map<const Vector>(o.y0.data(), static_cast<Eigen::Index>(o.y0.size()));
}

std::vector<Interval> parse_probes(const std::vector<std::string>& specs) {
  std::vector<Interval> out;
  for (const auto& s : specs) {
    const auto comma = s.find(',');
    const auto lo = comma == std::string::npos ? std::nullopt : parse_double(s.substr(0, comma));
    const auto hi = comma == std::string::npos ? std::nullopt : parse_double(s.substr(comma + 1));
    if (!lo || !hi || *hi < *lo) throw UsageError("--probe expects lo,hi with lo <= hi: " + s);
    out.push_back({*lo, *hi});
  }
  return out;
}

std::ofstream open_out(const fs::path& path) {
  std::ofstream f(path);
  if (!f) throw DataError("cannot write " + path.string());
  return f;
}

int cmd_fit(const Options& o) {
  if (!fs::exists(o.input)) throw DataError("input file not found: " + o.input);
  const ReturnSeries series = load_series(o.input, o.k, o.p);
  const FitReport rep =
      fit_var1(series, o.dof == "plain" ? CovarianceDof::kPlain : CovarianceDof::kRegressors);
  for (const auto& w : validate(rep.model.parameters()).warnings) std::cerr << "warning: " << w << '\n';
  if (o.out.empty()) {
    write_fit_report(std::cout, rep, series.labels);
  } else {
    auto f = open_out(o.out);
    write_fit_report(f, rep, series.labels);
  }
  return kOk;
}

int cmd_weights(const Options& o) {
  const int horizon = o.horizons.front();
  PortfolioRule rule = [&] {
    if (!o.rule_in.empty()) {
      std::ifstream in(o.rule_in);
      if (!in) throw DataError("cannot open rule file: " + o.rule_in);
      return read_rule(in);
    }
    const VarModel m = load_model(o, false);
    return build_rule(m, load_rf(o.rf, horizon), o.alphas.front(), horizon,
                      parse_variant(o.variants.front()));
  }();
  if (!o.out.empty()) {
    auto f = open_out(o.out);
    write_rule(f, rule);
  }
  Vector y0;
  if (o.y0.empty() && o.rule_in.empty()) {
    y0 = initial_state(o, load_model(o, false));
  } else if (static_cast<int>(o.y0.size()) == rule.k() + rule.p()) {
    y0 = Eigen::Map<const Vector>(o.y0.data(), static_cast<Eigen::Index>(o.y0.size()));
  } else {
    throw UsageError("--y0 needs " + std::to_string(rule.k() + rule.p()) + " values");
  }
  std::cout << "# variant " << to_string(rule.variant()) << " alpha " << format_double(rule.alpha())
            << " T " << rule.horizon() << " w0 " << format_double(o.w0) << " y0 "
            << format_row(y0, ',') << '\n';
  std::cout << "tau";
  for (int i = 1; i <= rule.k(); ++i) std::cout << ",w" << i;
  std::cout << '\n';
  for (int tau = 0; tau < rule.horizon(); ++tau) {
    const Allocation a = evaluate_rule(rule, tau, y0, o.w0);
    std::cout << tau << ',' << format_row(a.weights, ',') << '\n';
  }
  return kOk;
}

int cmd_simulate(const Options& o, bool with_report) {
  const VarModel m = load_model(o, true);
  const Vector y0 = initial_state(o, m);
  const int max_t = *std::max_element(o.horizons.begin(), o.horizons.end());
  const RiskFreeCurve rf = load_rf(o.rf, max_t);
  std::vector<Variant> variants;
  for (const auto& v : o.variants) variants.push_back(parse_variant(v));
  if (with_report && variants.size() < 2) throw UsageError("compare needs two --variant values");
  const std::vector<Interval> probes = parse_probes(o.probes);
  const fs::path dir = o.out.empty() ? fs::path(".") : fs::path(o.out);
  fs::create_directories(dir);

  for (int horizon : o.horizons) {
    for (double alpha : o.alphas) {
      std::vector<Strategy> strategies;
      for (Variant v : variants)
        strategies.push_back({strategy_name(v), build_rule(m, rf, alpha, horizon, v)});
      SimulationConfig cfg;
      cfg.repetitions = o.reps;
      cfg.horizon = horizon;
      cfg.w0 = o.w0;
      cfg.y0 = y0;
      cfg.rf = rf;
      cfg.seed = o.seed;
      cfg.threads = o.threads;
      const WealthPaths paths = simulate_wealth(m, strategies, cfg);
      const std::string tag = "T" + std::to_string(horizon) + "_a" + label(alpha);

      std::vector<Ecdf> curves;
      for (std::size_t s = 0; s < strategies.size(); ++s) {
        if (!paths.flagged[s].empty()) {
          std::cerr << "warning: " << paths.names[s] << ' ' << tag << ": "
                    << paths.flagged[s].size() << " repetitions with non-finite wealth\n";
        }
        curves.emplace_back(paths.finite_terminal(s));
      }
      std::vector<NamedEcdf> named;
      for (std::size_t s = 0; s < curves.size(); ++s) named.push_back({paths.names[s], &curves[s]});
      {
        auto f = open_out(dir / ("ecdf_" + tag + ".csv"));
        write_ecdf_csv(f, named);
      }
      if (o.dump_samples) {
        auto f = open_out(dir / ("samples_" + tag + ".csv"));
        write_samples_csv(f, paths);
      }
      if (with_report) {
        ComparisonReport rep =
            compare(curves[0], curves[1], probes, o.w0 * rf.growth(1, horizon));
        rep.name_a = paths.names[0];
        rep.name_b = paths.names[1];
        rep.common_random_numbers = paths.common_random_numbers;
        auto f = open_out(dir / ("report_" + tag + ".txt"));
        f << "T " << horizon << " alpha " << format_double(alpha) << " reps " << o.reps
          << " seed " << o.seed << '\n';
        write_report(f, rep);
      }
      std::cout << "wrote " << tag << '\n';
    }
  }
  return kOk;
}

int cmd_verify(const Options& o) {
  const int horizon = o.horizons.front();
  OracleConfig oc;
  oc.nodes = o.nodes;
  oc.threads = o.threads;
  check_oracle_cost(o.k, o.p, horizon, oc);
  RandomModelOptions ro;
  ro.time_varying = o.time_varying;
  ro.periods = horizon;
  const VarModel m = random_model(o.k, o.p, o.seed, ro);
  Vector y0(m.dim());
  if (o.y0.empty()) {
    auto rng = make_stream(o.seed, 1);
    std::normal_distribution<double> normal(0.0, 0.5);
    for (Eigen::Index i = 0; i < y0.size(); ++i) y0[i] = normal(rng);
  } else {
    y0 = initial_state(o, m);
  }
  const RiskFreeCurve rf = load_rf(o.rf, horizon);
  const double alpha = o.alphas.front();
  const Variant variant = parse_variant(o.variants.front());
  const PortfolioRule rule = build_rule(m, rf, alpha, horizon, variant);
  const NumericSolution sol = numeric_optimal_weights(m, y0, o.w0, alpha, rf, horizon, oc);
  const DeviationReport rep = compare_with_rule(sol, rule);
  std::cout << "k " << o.k << " p " << o.p << " T " << horizon << " seed " << o.seed
            << " variant " << to_string(variant) << " nodes " << o.nodes << '\n';
  write_deviation_report(std::cout, rep);
  std::cout << "refined_states " << sol.refined_states << " newton_max_iterations " << sol.max_newton_iterations << '\n';
  const bool pass = rep.overall() < o.tolerance;
  std::cout << "max relative deviation " << format_double(rep.overall())
            << (pass ? " < " : " >= ") << format_double(o.tolerance) << '\n';
  return pass ? kOk : kNumerical;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Multi-period CARA portfolio rules for VAR(1) returns"};
  app.set_config("--config", "", "TOML/INI file with default flag values");
  app.require_subcommand(1);
  Options o;

  auto* fit = app.add_subcommand("fit", "Estimate a VAR(1) from a return series");
  auto* weights = app.add_subcommand("weights", "Print the allocation rule");
  auto* simulate = app.add_subcommand("simulate", "Simulate terminal wealth and write ECDFs");
  auto* compare_cmd = app.add_subcommand("compare", "Simulate and compare two strategies");
  auto* verify = app.add_subcommand("verify", "Check the closed-form rule against the numeric oracle");

  auto dims = [&](CLI::App* c) {
    c->add_option("--k", o.k, "Number of assets")->check(CLI::Range(1, 1000));
    c->add_option("--p", o.p, "Number of predictors")->check(CLI::Range(0, 1000));
  };
  auto model_opts = [&](CLI::App* c, bool required) {
    auto* opt = c->add_option("--model", o.model, "Model file");
    if (required) opt->required();
  };
  auto market = [&](CLI::App* c) {
    c->add_option("--rf", o.rf, "Constant per-period risk-free rate or a file of rates");
    c->add_option("--w0", o.w0, "Initial wealth")->check(CLI::PositiveNumber);
    c->add_option("--y0", o.y0, "Initial state (comma separated); default stationary mean")
        ->delimiter(',');
    c->add_option("--alpha", o.alphas, "Risk aversion (comma separated)")
        ->delimiter(',')
        ->check(CLI::PositiveNumber);
    c->add_option("--T", o.horizons, "Horizons (comma separated)")
        ->delimiter(',')
        ->check(CLI::Range(1, 100000));
    c->add_option("--variant", o.variants, "Strategies: general, nopred, iid, literal")
        ->delimiter(',')
        ->check(CLI::IsMember({"general", "nopred", "iid", "literal"}));
    c->add_option("--seed", o.seed, "Random seed");
    c->add_option("--threads", o.threads, "Worker threads (0: all cores)")->check(CLI::Range(0, 4096));
    c->add_option("--out", o.out, "Output path or directory");
  };

  fit->add_option("--input", o.input, "Return series (CSV or whitespace)")->required();
  dims(fit);
  fit->add_option("--out", o.out, "Model file to write (default: stdout)");
  fit->add_option("--dof", o.dof, "Covariance denominator")->check(CLI::IsMember({"regressors", "plain"}));

  model_opts(weights, false);
  dims(weights);
  market(weights);
  weights->add_option("--rule", o.rule_in, "Re-import a rule file instead of building one");

  for (CLI::App* c : {simulate, compare_cmd}) {
    model_opts(c, true);
    dims(c);
    market(c);
    c->add_option("--reps", o.reps, "Repetitions")->check(CLI::Range(1L, 100000000L));
    c->add_flag("--dump-samples", o.dump_samples, "Write per-repetition terminal wealth");
  }
  compare_cmd->add_option("--probe", o.probes, "Interval lo,hi to report (repeatable)");

  dims(verify);
  market(verify);
  verify->add_option("--nodes", o.nodes, "Quadrature nodes per dimension")->check(CLI::Range(10, 200));
  verify->add_option("--tolerance", o.tolerance, "Pass threshold on the relative deviation");
  verify->add_flag("--time-varying", o.time_varying, "Draw a different covariance per period");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }
  std::cerr << "# effective configuration\n" << app.config_to_str(true, false);

  try {
    if (*fit) return cmd_fit(o);
    if (*weights) {
      if (o.model.empty() && o.rule_in.empty()) throw UsageError("weights needs --model or --rule");
      return cmd_weights(o);
    }
    if (*verify) {
      if (verify->count("--T") == 0) o.horizons = {3};
      if (verify->count("--k") == 0) o.k = 1;
      if (verify->count("--p") == 0) o.p = 1;
      if (verify->count("--alpha") == 0) o.alphas = {1.0};
      if (verify->count("--variant") == 0) o.variants = {"general"};
      return cmd_verify(o);
    }
    if (*simulate) return cmd_simulate(o, false);
    if (*compare_cmd) return cmd_simulate(o, true);
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const DataError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  } catch (const NumericalError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::domain_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kNumerical;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kData;
  }
  return kUsage;
}
