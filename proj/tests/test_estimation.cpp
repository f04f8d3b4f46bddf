#include <doctest.h>

#include "support.hpp"
#include "varcara/errors.hpp"
#include "varcara/estimation.hpp"

#include <sstream>

using namespace varcara;
using testing::rel_err;

namespace {

std::string series_csv(const std::vector<StateVector>& path, bool header, bool dates) {
  std::ostringstream out;
  if (header) out << (dates ? "date," : "") << "be,de,jp,uk,us\n";
  for (std::size_t t = 1; t < path.size(); ++t) {
    if (dates) out << "2002-01-" << t << ',';
    out << format_row(path[t].y, ',') << '\n';
  }
  return out.str();
}

}  // namespace

TEST_CASE("load_series") {
  SUBCASE("plain numeric rows") {
    std::istringstream in("0.1 0.2\n0.3 0.4\n-0.5 0.6\n");
    const ReturnSeries s = load_series(in, 2, 0);
    CHECK(s.size() == 3);
    CHECK(s.observations(2, 0) == -0.5);
    CHECK(s.labels.empty());
  }
  SUBCASE("header and date column") {
    const auto path = simulate_path(testing::weekly_model(), Vector::Zero(5), 500, 1);
    std::istringstream in(series_csv(path, true, true));
    const ReturnSeries s = load_series(in, 4, 1);
    CHECK(s.size() == 500);
    REQUIRE(s.labels.size() == 5);
    CHECK(s.labels.front() == "be");
    CHECK(s.observations.row(499).transpose() == path[500].y);
  }
  SUBCASE("ragged row names the line") {
    std::istringstream in("a,b\n1,2\n3\n4,5\n");
    try {
      load_series(in, 2, 0);
      FAIL("expected an error");
    } catch (const DataError& e) {
      CHECK(std::string(e.what()).find("line 3") != std::string::npos);
    }
  }
  SUBCASE("non-numeric cell") {
    std::istringstream in("1,2\n3,x\n");
    CHECK_THROWS_AS(load_series(in, 2, 0), DataError);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_WITH_AS(load_series(std::string("/no/such/file.csv"), 2, 0),
                         doctest::Contains("/no/such/file.csv"), DataError);
  }
}

TEST_CASE("noiseless series is recovered exactly") {
  // damped rotation: the path spans the plane, so the regression is identified
  Matrix phi(2, 2);
  const double a = 0.95, th = 0.7;
  phi << a * std::cos(th), -a * std::sin(th), a * std::sin(th), a * std::cos(th);
  Vector nu(2);
  nu << 0.3, -0.2;
  ReturnSeries s{2, 0, Matrix(60, 2), {}};
  Vector y(2);
  y << 1.0, 0.5;
  for (int t = 0; t < 60; ++t) {
    s.observations.row(t) = y.transpose();
    y = nu + phi * y;
  }
  // a model needs a PD covariance, so add noise far below the coefficient tolerance
  ReturnSeries noisy = s;
  std::mt19937_64 rng(1);
  noisy.observations += testing::gaussian(rng, 60, 2, 1e-12);
  const FitReport r = fit_var1(noisy);
  CHECK((r.model.phi() - phi).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((r.model.nu() - nu).cwiseAbs().maxCoeff() < 1e-9);
}

TEST_CASE("constant series is singular") {
  ReturnSeries s{1, 1, Matrix::Constant(20, 2, 0.01), {}};
  CHECK_THROWS_AS(fit_var1(s), NumericalError);
}

TEST_CASE("residuals are orthogonal to the regressors") {
  const VarModel m = testing::weekly_model();
  const auto path = simulate_path(m, stationary_mean(m), 2000, 3);
  ReturnSeries s{4, 1, Matrix(2001, 5), {}};
  for (int t = 0; t <= 2000; ++t) s.observations.row(t) = path[t].y.transpose();
  const FitReport r = fit_var1(s);
  CHECK(r.observations == 2000);
  Matrix x(2000, 6);
  x.col(0).setOnes();
  x.rightCols(5) = s.observations.topRows(2000);
  for (int c = 0; c < 6; ++c) {
    for (int e = 0; e < 5; ++e) {
      const double dot = r.residuals.col(e).dot(x.col(c));
      CHECK(std::abs(dot) / (r.residuals.col(e).norm() * x.col(c).norm()) < 1e-10);
    }
  }
  // denominator n-1-(k+p+1)
  const Matrix plain = r.residuals.transpose() * r.residuals;
  CHECK(rel_err(r.residual_covariance, Matrix(plain / (2000 - 6))) < 1e-12);
  const FitReport rp = fit_var1(s, CovarianceDof::kPlain);
  CHECK(rel_err(rp.residual_covariance, Matrix(plain / 2000)) < 1e-12);
  CHECK(r.r_squared.minCoeff() >= 0.0);
  CHECK(r.r_squared.maxCoeff() <= 1.0);
}

TEST_CASE("fit report reloads as a model") {
  const VarModel m = testing::weekly_model();
  const auto path = simulate_path(m, stationary_mean(m), 500, 4);
  ReturnSeries s{4, 1, Matrix(501, 5), {"be", "de", "jp", "uk", "us"}};
  for (int t = 0; t <= 500; ++t) s.observations.row(t) = path[t].y.transpose();
  const FitReport r = fit_var1(s);
  std::stringstream ss;
  write_fit_report(ss, r, s.labels);
  CHECK(ss.str().find("# r2 us") != std::string::npos);
  const VarModel back = read_model(ss);
  CHECK(back.phi() == r.model.phi());
  CHECK(back.sigma(1) == r.model.sigma(1));
}
