#include "varcara/oracle.hpp"

#include "varcara/errors.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <exception>
#include <limits>
#include <memory>
#include <ostream>
#include <random>
#include <thread>
#include <unordered_map>

namespace varcara {

GaussHermite gauss_hermite(int n) {
  if (n < 1) throw UsageError("Gauss-Hermite rule needs at least one node");
  // Golub-Welsch start, then Newton on the orthonormal Hermite polynomial
  // psi_n and Christoffel weights 1 / sum_j psi_j(x)^2.
  Vector diag = Vector::Zero(n);
  Vector sub(std::max(n - 1, 0));
  for (int i = 1; i < n; ++i) sub[i - 1] = std::sqrt(static_cast<double>(i));
  Eigen::SelfAdjointEigenSolver<Matrix> es;
  es.computeFromTridiagonal(diag, sub, Eigen::EigenvaluesOnly);
  GaussHermite gh;
  gh.nodes.resize(static_cast<std::size_t>(n));
  gh.weights.resize(static_cast<std::size_t>(n));

  auto psi = [n](double x, double& psi_n, double& psi_nm1, double& sum_sq) {
    double prev = 0.0, cur = 1.0;
    sum_sq = 0.0;
    for (int j = 0; j < n; ++j) {
      sum_sq += cur * cur;
      const double next = (x * cur - std::sqrt(static_cast<double>(j)) * prev) /
                          std::sqrt(static_cast<double>(j + 1));
      prev = cur;
      cur = next;
    }
    psi_n = cur;
    psi_nm1 = prev;
  };
  for (int i = 0; i < n; ++i) {
    double x = es.eigenvalues()[i];
    double pn, pm, ss;
    for (int it = 0; it < 10; ++it) {
      psi(x, pn, pm, ss);
      const double dx = pn / (std::sqrt(static_cast<double>(n)) * pm);
      x -= dx;
      if (std::abs(dx) < 1e-16 * std::max(1.0, std::abs(x))) break;
    }
    psi(x, pn, pm, ss);
    gh.nodes[static_cast<std::size_t>(i)] = x;
    gh.weights[static_cast<std::size_t>(i)] = 1.0 / ss;
  }
  // Exact symmetry of the rule.
  for (int i = 0; i < n / 2; ++i) {
    const auto a = static_cast<std::size_t>(i), b = static_cast<std::size_t>(n - 1 - i);
    const double x = 0.5 * (gh.nodes[b] - gh.nodes[a]);
    const double w = 0.5 * (gh.weights[a] + gh.weights[b]);
    gh.nodes[a] = -x;
    gh.nodes[b] = x;
    gh.weights[a] = gh.weights[b] = w;
  }
  if (n % 2 == 1) gh.nodes[static_cast<std::size_t>(n / 2)] = 0.0;
  double total = 0.0;
  for (double w : gh.weights) total += w;
  for (double& w : gh.weights) w /= total;
  return gh;
}

namespace {

// Tensor product of a 1-D rule: points (dim x N) and weights (N).
struct TensorGrid {
  Matrix points;
  Vector weights;
  Vector log_weights;
};

TensorGrid tensor_grid(const GaussHermite& gh, int dim) {
  const std::size_t m = gh.nodes.size();
  std::size_t count = 1;
  for (int d = 0; d < dim; ++d) count *= m;
  TensorGrid g;
  g.points.resize(dim, static_cast<Eigen::Index>(count));
  g.weights.resize(static_cast<Eigen::Index>(count));
  std::vector<std::size_t> idx(static_cast<std::size_t>(dim), 0);
  for (std::size_t j = 0; j < count; ++j) {
    double w = 1.0;
    for (int d = 0; d < dim; ++d) {
      const std::size_t i = idx[static_cast<std::size_t>(d)];
      g.points(d, static_cast<Eigen::Index>(j)) = gh.nodes[i];
      w *= gh.weights[i];
    }
    g.weights[static_cast<Eigen::Index>(j)] = w;
    for (int d = dim - 1; d >= 0; --d) {
      if (++idx[static_cast<std::size_t>(d)] < m) break;
      idx[static_cast<std::size_t>(d)] = 0;
    }
  }
  g.log_weights = g.weights.array().log();
  return g;
}

double quad_exponent(const QuadraticFormSpec& s, const Vector& y) {
  return -0.5 * y.dot(s.B * y) - s.b.dot(y) - s.c;
}

void check_spec(const QuadraticFormSpec& s) {
  const Eigen::Index n = s.mean.size();
  if (s.B.rows() != n || s.B.cols() != n || s.b.size() != n || s.cov.rows() != n ||
      s.cov.cols() != n) {
    throw DimensionError("quadratic form dimensions are inconsistent");
  }
  if (!is_symmetric(s.B)) throw UsageError("quadratic form matrix must be symmetric");
}

int resolve_threads(int threads) {
  if (threads > 0) return threads;
  const unsigned hc = std::thread::hardware_concurrency();
  return hc ? static_cast<int>(hc) : 1;
}

}  // namespace

double log_mgf_quadratic(const QuadraticFormSpec& spec) {
  check_spec(spec);
  const SpdFactor cf(spec.cov);
  const Matrix& c = cf.lower();
  const Eigen::Index n = spec.mean.size();
  const Matrix g = Matrix::Identity(n, n) + c.transpose() * spec.B * c;
  Eigen::LLT<Matrix> llt(0.5 * (g + g.transpose()));
  if (llt.info() != Eigen::Success || llt.matrixL().toDenseMatrix().diagonal().minCoeff() <= 0.0) {
    throw NumericalError("quadratic-form expectation does not exist (I + B cov not PD)");
  }
  const Vector h = c.transpose() * (spec.B * spec.mean + spec.b);
  const double log_det = 2.0 * Matrix(llt.matrixL()).diagonal().array().log().sum();
  return quad_exponent(spec, spec.mean) - 0.5 * log_det + 0.5 * h.dot(llt.solve(h));
}

double mgf_quadratic(const QuadraticFormSpec& spec) { return std::exp(log_mgf_quadratic(spec)); }

double mgf_quadrature(const QuadraticFormSpec& spec, int nodes) {
  check_spec(spec);
  const SpdFactor cf(spec.cov);
  const int n = static_cast<int>(spec.mean.size());
  const TensorGrid grid = tensor_grid(gauss_hermite(nodes), n);
  const Matrix ys = (cf.lower() * grid.points).colwise() + spec.mean;
  double sum = 0.0;
  for (Eigen::Index j = 0; j < ys.cols(); ++j)
    sum += grid.weights[j] * std::exp(quad_exponent(spec, ys.col(j)));
  return sum;
}

MonteCarloEstimate mgf_monte_carlo(const QuadraticFormSpec& spec, long draws,
                                   std::uint64_t seed) {
  check_spec(spec);
  if (draws < 2) throw UsageError("Monte Carlo needs at least two draws");
  const SpdFactor cf(spec.cov);
  auto rng = make_stream(seed, 0);
  std::normal_distribution<double> normal;
  Vector xi(spec.mean.size());
  double mean = 0.0, m2 = 0.0;
  for (long i = 0; i < draws; ++i) {
    for (Eigen::Index d = 0; d < xi.size(); ++d) xi[d] = normal(rng);
    const Vector y = spec.mean + cf.lower() * xi;
    const double v = std::exp(quad_exponent(spec, y));
    const double delta = v - mean;
    mean += delta / static_cast<double>(i + 1);
    m2 += delta * (v - mean);
  }
  const double var = m2 / static_cast<double>(draws - 1);
  return {mean, std::sqrt(var / static_cast<double>(draws))};
}

double oracle_cost(int k, int p, int horizon, const OracleConfig& config) {
  const double nodes = config.nodes;
  return std::pow(nodes, static_cast<double>((k + p) * (horizon - 1))) * std::pow(nodes, k);
}

void check_oracle_cost(int k, int p, int horizon, const OracleConfig& config) {
  if (config.nodes < 10) throw UsageError("oracle needs at least 10 quadrature nodes");
  if (horizon < 1) throw UsageError("horizon must be at least 1");
  if (k + p > 3 || horizon > 4) {
    throw UsageError("oracle scope is k+p <= 3 and T <= 4 (requested k+p=" +
                     std::to_string(k + p) + ", T=" + std::to_string(horizon) +
                     "); nested quadrature grows as nodes^((k+p)(T-1))");
  }
  const double cost = oracle_cost(k, p, horizon, config);
  if (cost > config.max_evaluations) {
    throw UsageError("oracle run needs ~" + format_double(cost) +
                     " integrand evaluations (nodes^((k+p)(T-1)) * nodes^k), budget is " +
                     format_double(config.max_evaluations));
  }
}

namespace {

// Quadrature layout shared by the Bellman solver and expected_utility, so
// both visit bit-identical states.
// A quadrature rule resolves an exponentially tilted integrand only while
// the tilted mass stays well inside its outermost node; beyond that the
// discrete problem degrades and finally becomes unbounded.
constexpr double kReach = 0.55;
constexpr int kMaxLevels = 4;
constexpr double kMaxGridPoints = 1e6;

// Quadrature layout shared by the Bellman solver and expected_utility, so
// both visit bit-identical states. Level 0 uses config.nodes per dimension;
// level l doubles the node count l times.
class QuadratureLayout {
 public:
  struct Level {
    GaussHermite rule;
    std::vector<double> log_weights;  // 1-D
    double reach = 0.0;
    TensorGrid full;
    std::vector<Matrix> offsets;  // per period t = 1..T: C_t * points
  };

  QuadratureLayout(const VarModel& model, const RiskFreeCurve& rf, int horizon,
                   const OracleConfig& config)
      : model_(model), rf_(rf), horizon_(horizon) {
    if (rf.horizon() < horizon) throw UsageError("risk-free curve shorter than horizon");
    for (int n = config.nodes, level = 0; level < kMaxLevels; ++level, n *= 2) {
      Level lv;
      lv.rule = gauss_hermite(n);
      for (double w : lv.rule.weights) lv.log_weights.push_back(std::log(w));
      lv.reach = kReach * lv.rule.nodes.back();
      // Tensor grids only where they stay affordable; leaf sums are 1-D.
      if (level == 0 || std::pow(n, model.dim()) <= kMaxGridPoints) {
        lv.full = tensor_grid(lv.rule, model.dim());
        for (int t = 1; t <= horizon; ++t) lv.offsets.push_back(model.factor(t).lower() * lv.full.points);
        ++tensor_levels_;
      }
      levels_.push_back(std::move(lv));
    }
    assets_ = tensor_grid(levels_[0].rule, model.k());
    for (int t = 1; t <= horizon; ++t) {
      const Matrix ckk = model.factor(t).lower().topLeftCorner(model.k(), model.k());
      asset_offsets_.push_back(ckk * assets_.points);
      asset_chol_.push_back(ckk);
    }
  }

  const VarModel& model() const { return model_; }
  const RiskFreeCurve& rf() const { return rf_; }
  int horizon() const { return horizon_; }
  int tensor_levels() const { return tensor_levels_; }
  const Level& level(int l) const { return levels_[static_cast<std::size_t>(l)]; }
  const TensorGrid& full() const { return levels_[0].full; }
  const TensorGrid& assets() const { return assets_; }

  // Coarsest 1-D rule resolving a tilt of the given size.
  const Level& leaf_rule(double tilt) const {
    for (const Level& lv : levels_)
      if (std::abs(tilt) <= lv.reach) return lv;
    return levels_.back();
  }

  Vector mean(const Vector& y) const { return model_.nu() + model_.phi() * y; }
  // Children of a decision at tau: columns Y_j = m + C_{tau+1} xi_j.
  Matrix children(int tau, const Vector& m, int level = 0) const {
    return this->level(level).offsets[static_cast<std::size_t>(tau)].colwise() + m;
  }
  const Matrix& asset_offsets(int tau) const { return asset_offsets_[static_cast<std::size_t>(tau)]; }
  const Matrix& asset_chol(int tau) const { return asset_chol_[static_cast<std::size_t>(tau)]; }

 private:
  const VarModel& model_;
  const RiskFreeCurve& rf_;
  int horizon_;
  int tensor_levels_ = 0;
  std::vector<Level> levels_;
  TensorGrid assets_;
  std::vector<Matrix> asset_offsets_;
  std::vector<Matrix> asset_chol_;
};

std::string describe_state(int tau, const Vector& y) {
  return "tau=" + std::to_string(tau) + " state=(" + format_row(y, ',') + ")";
}

// min_u log sum_j exp(c_j - u'x_j), x: k x N. Newton with Armijo backtracking;
// the last steps are taken undamped once the decrement is at rounding level.
struct NewtonResult {
  Vector u;
  double value = 0.0;
  int iterations = 0;
};

NewtonResult minimize_log_sum_exp(const Matrix& x, const Vector& c, double tol, int max_it,
                                  int tau, const Vector& state) {
  const Eigen::Index k = x.rows();
  NewtonResult res;
  res.u = Vector::Zero(k);
  auto value_at = [&](const Vector& u) {
    const Vector e = c - x.transpose() * u;
    const double mx = e.maxCoeff();
    return mx + std::log((e.array() - mx).exp().sum());
  };
  for (int it = 0; it <= max_it; ++it) {
    const Vector e = c - x.transpose() * res.u;
    const double mx = e.maxCoeff();
    Vector p = (e.array() - mx).exp();
    const double z = p.sum();
    p /= z;
    res.value = mx + std::log(z);
    const Vector xbar = x * p;
    const Matrix xc = x.colwise() - xbar;
    const Matrix h = xc * p.asDiagonal() * xc.transpose();
    const Vector grad = -xbar;
    Eigen::LDLT<Matrix> ldlt(h);
    if (ldlt.info() != Eigen::Success) {
      throw NumericalError("oracle Hessian is singular at " + describe_state(tau, state));
    }
    const Vector step = -ldlt.solve(grad);
    const double decrement_sq = -grad.dot(step);
    res.iterations = it;
    if (std::sqrt(std::max(decrement_sq, 0.0)) < tol) return res;
    if (it == max_it) break;
    double t = 1.0;
    if (decrement_sq > 1e-12) {
      for (int ls = 0; ls < 60; ++ls) {
        if (value_at(res.u + t * step) <= res.value - 0.25 * t * decrement_sq) break;
        t *= 0.5;
      }
    }
    res.u += t * step;
  }
  throw NumericalError("oracle optimizer did not converge at " + describe_state(tau, state));
}

// One coordinate of the last-period problem: min_s G(s) - s*target with
// G(s) = log sum_i w_i exp(-s x_i).
struct Tilt {
  double g, d1, d2;
};

Tilt tilt(const GaussHermite& gh, const std::vector<double>& log_w, double s) {
  const std::size_t n = gh.nodes.size();
  thread_local std::vector<double> e;
  e.resize(n);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = log_w[i] - s * gh.nodes[i];
    mx = std::max(mx, e[i]);
  }
  double z = 0.0, m1 = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    e[i] = std::exp(e[i] - mx);
    z += e[i];
    m1 += e[i] * gh.nodes[i];
  }
  const double mean = m1 / z;
  double var = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double dx = gh.nodes[i] - mean;
    var += e[i] * dx * dx;
  }
  return {mx + std::log(z), -mean, var / z};
}

double minimize_tilt(const GaussHermite& gh, const std::vector<double>& log_w, double target,
                     double tol, int max_it, int& iterations, double& value, int tau,
                     const Vector& state) {
  double s = 0.0;
  for (int it = 0; it <= max_it; ++it) {
    const Tilt tv = tilt(gh, log_w, s);
    value = tv.g - s * target;
    const double grad = tv.d1 - target;
    const double step = -grad / tv.d2;
    const double dec_sq = grad * grad / tv.d2;
    iterations = std::max(iterations, it);
    if (std::sqrt(dec_sq) < tol) return s;
    if (it == max_it) break;
    double t = 1.0;
    if (dec_sq > 1e-12) {
      for (int ls = 0; ls < 60; ++ls) {
        const double s_new = s + t * step;
        if (tilt(gh, log_w, s_new).g - s_new * target <= value - 0.25 * t * dec_sq) break;
        t *= 0.5;
      }
    }
    s += t * step;
  }
  throw NumericalError("oracle optimizer did not converge at " + describe_state(tau, state));
}

struct Recorder {
  std::vector<PeriodGrid> periods;
  int max_iterations = 0;
  std::size_t refined = 0;

  Recorder(int horizon, int dim, int k) : periods(static_cast<std::size_t>(horizon)) {
    for (int t = 0; t < horizon; ++t) periods[static_cast<std::size_t>(t)] = {t, dim, k, {}, {}};
  }
  void add(int tau, const Vector& y, const Vector& a) {
    PeriodGrid& g = periods[static_cast<std::size_t>(tau)];
    g.states.insert(g.states.end(), y.data(), y.data() + y.size());
    g.dollars.insert(g.dollars.end(), a.data(), a.data() + a.size());
  }
  void append(const Recorder& other) {
    for (std::size_t t = 0; t < periods.size(); ++t) {
      auto& dst = periods[t];
      const auto& src = other.periods[t];
      dst.states.insert(dst.states.end(), src.states.begin(), src.states.end());
      dst.dollars.insert(dst.dollars.end(), src.dollars.begin(), src.dollars.end());
    }
    max_iterations = std::max(max_iterations, other.max_iterations);
    refined += other.refined;
  }
};

/// Numeric Bellman recursion under the CARA factorization
///   V(tau, W, Y) = -exp(-alpha * Pi_tau * W) * phi_tau(Y),
///   phi_tau(Y) = min_a E[exp(-alpha Pi_{tau+1} a' Xb_{tau+1}) phi_{tau+1}(Y_{tau+1})],
/// where Pi_tau = prod_{i=tau+1}^{T} R_{f,i}. Works in log phi.
/// Numeric Bellman recursion under the CARA factorization
///   V(tau, W, Y) = -exp(-alpha * Pi_tau * W) * phi_tau(Y),
///   phi_tau(Y) = min_a E[exp(-alpha Pi_{tau+1} a' Xb_{tau+1}) phi_{tau+1}(Y_{tau+1})],
/// where Pi_tau = prod_{i=tau+1}^{T} R_{f,i}. Works in log phi.
///
/// A state whose optimal tilt is not resolved by the base rule (tilted mean of
/// the quadrature points beyond kReach of the outermost node, or no minimizer
/// of the discrete problem) is re-solved on the next finer tensor rule.
class BellmanSolver {
 public:
  BellmanSolver(const QuadratureLayout& layout, double alpha, const OracleConfig& config)
      : q_(layout), alpha_(alpha), config_(config) {}

  double beta(int tau) const {
    return alpha_ * q_.rf().growth(tau + 2, q_.horizon());
  }

  // log phi_tau(y); records the optimal allocation when rec is non-null.
  double solve(int tau, const Vector& y, Recorder* rec) const {
    if (tau == q_.horizon() - 1) return solve_leaf(tau, y, rec);
    return solve_node(tau, y, rec, 1);
  }

  // Top level, fanning the children of y0 out over worker threads.
  double solve_root(const Vector& y0, Recorder& rec) const {
    if (q_.horizon() == 1) return solve_leaf(0, y0, &rec);
    return solve_node(0, y0, &rec, resolve_threads(config_.threads));
  }

  // Exponent offsets c_j = log w_j + log phi_{tau+1}(Y_j) of the level-0 children.
  Vector child_terms(int tau, const Matrix& kids) const {
    Vector c(kids.cols());
    for (Eigen::Index j = 0; j < kids.cols(); ++j)
      c[j] = q_.full().log_weights[j] + solve(tau + 1, kids.col(j), nullptr);
    return c;
  }

 private:
  double solve_leaf(int tau, const Vector& y, Recorder* rec) const {
    const Vector m = q_.mean(y);
    const int k = q_.model().k();
    const double r = q_.rf().rate(tau + 1);
    const Matrix& ckk = q_.asset_chol(tau);
    const Vector excess = m.head(k).array() - r;
    const Vector target = ckk.triangularView<Eigen::Lower>().solve(excess);  // C^-1 mu_excess
    Vector v(k);
    double log_phi = 0.0;
    int iters = 0;
    bool refined = false;
    for (int d = 0; d < k; ++d) {
      const auto& lv = q_.leaf_rule(target[d]);
      refined = refined || &lv != &q_.level(0);
      double val = 0.0;
      v[d] = minimize_tilt(lv.rule, lv.log_weights, target[d], config_.tolerance,
                           config_.max_iterations, iters, val, tau, y);
      log_phi += val;
    }
    if (rec) {
      const Vector u = ckk.transpose().triangularView<Eigen::Upper>().solve(v);
      rec->add(tau, y, u / beta(tau));
      rec->max_iterations = std::max(rec->max_iterations, iters);
      rec->refined += refined;
    }
    return log_phi;
  }

  double solve_node(int tau, const Vector& y, Recorder* rec, int threads) const {
    const Vector m = q_.mean(y);
    const int k = q_.model().k();
    const double r = q_.rf().rate(tau + 1);
    for (int level = 0; level < q_.tensor_levels(); ++level) {
      const bool last = level + 1 == q_.tensor_levels();
      const auto& lv = q_.level(level);
      const Matrix kids = q_.children(tau, m, level);
      Recorder local(q_.horizon(), q_.model().dim(), k);
      const Vector c = child_terms(tau, kids, lv.full.log_weights, rec ? &local : nullptr, threads);
      const Matrix x = kids.topRows(k).array() - r;
      NewtonResult nr;
      try {
        nr = minimize_log_sum_exp(x, c, config_.tolerance, config_.max_iterations, tau, y);
      } catch (const NumericalError&) {
        if (last) throw;
        continue;
      }
      if (!last) {
        const Vector e = c - x.transpose() * nr.u;
        Vector p = (e.array() - e.maxCoeff()).exp();
        p /= p.sum();
        const Vector tilted_mean = lv.full.points * p;
        if (tilted_mean.cwiseAbs().maxCoeff() > lv.reach) continue;
      }
      if (rec) {
        rec->append(local);
        rec->add(tau, y, nr.u / beta(tau));
        rec->max_iterations = std::max(rec->max_iterations, nr.iterations);
        rec->refined += level > 0;
      }
      return nr.value;
    }
    throw NumericalError("oracle has no quadrature level at " + describe_state(tau, y));
  }

  // Children in contiguous chunks, one recorder per chunk, merged in order so
  // the result does not depend on the thread count.
  Vector child_terms(int tau, const Matrix& kids, const Vector& log_w, Recorder* rec,
                     int threads) const {
    const Eigen::Index count = kids.cols();
    const int dim = q_.model().dim();
    auto log_weight = [&](Eigen::Index j) { return log_w[j]; };
    Vector c(count);
    const int workers = static_cast<int>(std::min<Eigen::Index>(std::max(threads, 1), count));
    if (workers == 1) {
      for (Eigen::Index j = 0; j < count; ++j) c[j] = log_weight(j) + solve(tau + 1, kids.col(j), rec);
      return c;
    }
    std::vector<Recorder> parts(static_cast<std::size_t>(workers),
                                Recorder(q_.horizon(), dim, q_.model().k()));
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    auto work = [&](int w) {
      try {
        const Eigen::Index lo = count * w / workers, hi = count * (w + 1) / workers;
        Recorder* part = rec ? &parts[static_cast<std::size_t>(w)] : nullptr;
        for (Eigen::Index j = lo; j < hi; ++j) c[j] = log_weight(j) + solve(tau + 1, kids.col(j), part);
      } catch (...) {
        errors[static_cast<std::size_t>(w)] = std::current_exception();
      }
    };
    std::vector<std::thread> pool;
    for (int w = 1; w < workers; ++w) pool.emplace_back(work, w);
    work(0);
    for (auto& t : pool) t.join();
    for (auto& e : errors)
      if (e) std::rethrow_exception(e);
    if (rec)
      for (const auto& part : parts) rec->append(part);
    return c;
  }

  const QuadratureLayout& q_;
  double alpha_;
  OracleConfig config_;
};

std::string state_key(int tau, const Vector& y) {
  std::string key(sizeof(int) + sizeof(double) * static_cast<std::size_t>(y.size()), '\0');
  std::memcpy(key.data(), &tau, sizeof(int));
  std::memcpy(key.data() + sizeof(int), y.data(), sizeof(double) * static_cast<std::size_t>(y.size()));
  return key;
}

}  // namespace

Vector PeriodGrid::state(std::size_t i) const {
  return Eigen::Map<const Vector>(states.data() + i * static_cast<std::size_t>(dim), dim);
}

Vector PeriodGrid::allocation(std::size_t i) const {
  return Eigen::Map<const Vector>(dollars.data() + i * static_cast<std::size_t>(k), k);
}

Policy rule_policy(const PortfolioRule& rule) {
  return [rule](int tau, double, const Vector& y) { return rule.dollars(tau, y); };
}

double expected_utility(const VarModel& model, const Policy& policy, const Vector& y0,
                        double w0, double alpha, const RiskFreeCurve& rf, int horizon,
                        const OracleConfig& config) {
  check_oracle_cost(model.k(), model.p(), horizon, config);
  if (!(alpha > 0.0)) throw UsageError("risk aversion must be positive");
  if (y0.size() != model.dim()) throw DimensionError("initial state has wrong length");
  const QuadratureLayout q(model, rf, horizon, config);
  const int k = model.k();

  std::function<double(int, double, const Vector&)> eu = [&](int tau, double w,
                                                              const Vector& y) -> double {
    const Vector a = policy(tau, w, y);
    if (a.size() != k) throw DimensionError("policy returned wrong allocation length");
    const double r = rf.rate(tau + 1);
    const double grown = w * rf.gross(tau + 1);
    const Vector m = q.mean(y);
    if (tau == horizon - 1) {
      const double base = grown + a.dot(Vector(m.head(k).array() - r));
      const Vector shocks = q.asset_offsets(tau).transpose() * a;
      double sum = 0.0;
      for (Eigen::Index j = 0; j < shocks.size(); ++j)
        sum += q.assets().weights[j] * -std::exp(-alpha * (base + shocks[j]));
      return sum;
    }
    const Matrix kids = q.children(tau, m);
    double sum = 0.0;
    for (Eigen::Index j = 0; j < kids.cols(); ++j) {
      const double w_next = grown + a.dot(Vector(kids.col(j).head(k).array() - r));
      sum += q.full().weights[j] * eu(tau + 1, w_next, kids.col(j));
    }
    return sum;
  };
  return eu(0, w0, y0);
}

NumericSolution numeric_optimal_weights(const VarModel& model, const Vector& y0, double w0,
                                        double alpha, const RiskFreeCurve& rf, int horizon,
                                        const OracleConfig& config) {
  check_oracle_cost(model.k(), model.p(), horizon, config);
  if (!(alpha > 0.0)) throw UsageError("risk aversion must be positive");
  if (y0.size() != model.dim()) throw DimensionError("initial state has wrong length");
  const QuadratureLayout q(model, rf, horizon, config);
  const BellmanSolver solver(q, alpha, config);
  Recorder rec(horizon, model.dim(), model.k());
  NumericSolution sol;
  sol.log_factor = solver.solve_root(y0, rec);
  sol.value = -std::exp(-alpha * rf.growth(1, horizon) * w0 + sol.log_factor);
  sol.periods = std::move(rec.periods);
  sol.max_newton_iterations = rec.max_iterations;
  sol.refined_states = rec.refined;
  return sol;
}

Policy grid_policy(const NumericSolution& solution) {
  auto table = std::make_shared<std::unordered_map<std::string, Vector>>();
  for (const PeriodGrid& g : solution.periods)
    for (std::size_t i = 0; i < g.size(); ++i) (*table)[state_key(g.tau, g.state(i))] = g.allocation(i);
  return [table](int tau, double, const Vector& y) -> Vector {
    auto it = table->find(state_key(tau, y));
    if (it == table->end()) throw UsageError("state not on the oracle grid: " + describe_state(tau, y));
    return it->second;
  };
}

std::function<double(const Vector&)> stage_objective(const VarModel& model,
                                                     const RiskFreeCurve& rf, double alpha,
                                                     int horizon, int tau, const Vector& y,
                                                     double wealth,
                                                     const OracleConfig& config) {
  check_oracle_cost(model.k(), model.p(), horizon - tau, config);
  if (tau < 0 || tau >= horizon) throw UsageError("decision period out of range");
  const QuadratureLayout q(model, rf, horizon, config);
  const int k = model.k();
  const double r = rf.rate(tau + 1);
  const double grown = wealth * rf.gross(tau + 1);
  const double scale = alpha * rf.growth(tau + 2, horizon);
  const Vector m = q.mean(y);
  Matrix x;
  Vector c;
  if (tau == horizon - 1) {
    x = q.asset_offsets(tau).colwise() + Vector(m.head(k).array() - r);
    c = q.assets().log_weights;
  } else {
    const Matrix kids = q.children(tau, m);
    x = kids.topRows(k).array() - r;
    c = BellmanSolver(q, alpha, config).child_terms(tau, kids);
  }
  return [x, c, scale, grown](const Vector& a) {
    const Vector e = c.array() - scale * (x.transpose() * a).array();
    return -(e.array() - scale * grown).exp().sum();
  };
}

double DeviationReport::overall() const {
  double m = 0.0;
  for (double v : max_relative) m = std::max(m, v);
  return m;
}

DeviationReport compare_with_rule(const NumericSolution& solution, const PortfolioRule& rule) {
  DeviationReport rep;
  for (const PeriodGrid& g : solution.periods) {
    std::vector<double> norms(g.size());
    std::vector<double> diffs(g.size());
    double sum_sq = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i) {
      const Vector a = rule.dollars(g.tau, g.state(i));
      norms[i] = a.norm();
      diffs[i] = (g.allocation(i) - a).norm();
      sum_sq += norms[i] * norms[i];
    }
    const double floor = g.size() ? 1e-3 * std::sqrt(sum_sq / static_cast<double>(g.size())) : 0.0;
    double worst = 0.0;
    for (std::size_t i = 0; i < g.size(); ++i)
      worst = std::max(worst, diffs[i] / std::max({norms[i], floor, 1e-300}));
    rep.max_relative.push_back(worst);
    rep.states.push_back(g.size());
  }
  return rep;
}

void write_deviation_report(std::ostream& out, const DeviationReport& report) {
  for (std::size_t t = 0; t < report.max_relative.size(); ++t) {
    out << "tau " << t << " states " << report.states[t] << " max_rel_dev "
        << format_double(report.max_relative[t]) << '\n';
  }
  out << "overall max_rel_dev " << format_double(report.overall()) << '\n';
}

VarModel random_model(int k, int p, std::uint64_t seed, const RandomModelOptions& options) {
  if (k < 1 || p < 0) throw UsageError("invalid dimensions for random model");
  const int n = k + p;
  auto rng = make_stream(seed, 0x5eed);
  std::normal_distribution<double> normal;
  auto random_matrix = [&](int rows, int cols) {
    Matrix m(rows, cols);
    for (int j = 0; j < cols; ++j)
      for (int i = 0; i < rows; ++i) m(i, j) = normal(rng);
    return m;
  };
  auto random_cov = [&]() {
    const Matrix a = random_matrix(n, n);
    Matrix s = a * a.transpose() / n * 0.7 + 0.3 * Matrix::Identity(n, n);
    return Matrix(0.5 * (s + s.transpose()));
  };
  VarParameters params;
  params.k = k;
  params.p = p;
  params.nu = 0.15 * random_matrix(n, 1);
  params.phi = options.coefficient_scale / std::sqrt(static_cast<double>(n)) * random_matrix(n, n);
  if (options.time_varying) {
    if (options.periods < 1) throw UsageError("time-varying random model needs periods >= 1");
    for (int t = 0; t < options.periods; ++t) params.sigma.push_back(random_cov());
  } else {
    params.sigma.push_back(random_cov());
  }
  return VarModel(std::move(params));
}

}  // namespace varcara
