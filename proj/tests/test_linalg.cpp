#include <doctest.h>

#include "support.hpp"
#include "varcara/errors.hpp"
#include "varcara/linalg.hpp"
#include "varcara/riskfree.hpp"

#include <sstream>

using namespace varcara;

TEST_CASE("SpdFactor solves a hand-sized system") {
  Matrix a(2, 2);
  a << 4, 2, 2, 3;
  const SpdFactor f(a);
  Vector b(2);
  b << 2, 1;
  // inverse of [[4,2],[2,3]] is [[3,-2],[-2,4]]/8
  const Vector x = f.solve(b);
  CHECK(x[0] == doctest::Approx(0.5).epsilon(1e-14));
  CHECK(x[1] == doctest::Approx(0.0).epsilon(1e-14));
  CHECK(f.log_det() == doctest::Approx(std::log(8.0)));
  CHECK((f.lower() * f.lower().transpose() - a).norm() < 1e-14);
}

TEST_CASE("non-PD matrices are rejected") {
  Matrix a = Matrix::Identity(3, 3);
  a(2, 2) = 0.0;
  CHECK_FALSE(is_positive_definite(a));
  CHECK_THROWS_AS(SpdFactor{a}, NotPositiveDefinite);
  Matrix asym = Matrix::Identity(2, 2);
  asym(0, 1) = 0.5;
  CHECK_FALSE(is_symmetric(asym));
  CHECK_THROWS_AS(SpdFactor{asym}, NotPositiveDefinite);
}

TEST_CASE("shortest formatting round-trips") {
  std::mt19937_64 rng(3);
  for (int i = 0; i < 1000; ++i) {
    const double x = testing::uniform(rng, -1.0, 1.0) * std::pow(10.0, testing::uniform(rng, -20, 20));
    const auto back = parse_double(format_double(x));
    REQUIRE(back.has_value());
    CHECK(*back == x);
  }
  CHECK(format_double(0.5) == "0.5");
  CHECK(parse_double(" +1e-3 ").value() == 1e-3);
  CHECK_FALSE(parse_double("abc").has_value());
  CHECK_FALSE(parse_double("1.0x").has_value());
}

TEST_CASE("risk-free curve") {
  const RiskFreeCurve rf({0.01, 0.02, 0.03});
  CHECK(rf.horizon() == 3);
  CHECK(rf.gross(2) == 1.02);
  CHECK(rf.growth(2, 3) == doctest::Approx(1.02 * 1.03));
  CHECK(rf.growth(4, 3) == 1.0);
  CHECK_THROWS_AS(rf.rate(0), UsageError);
  CHECK_THROWS_AS(rf.rate(4), UsageError);
  CHECK_THROWS(RiskFreeCurve({0.0, -1.0}));
  std::istringstream in("# rates\n0.001\n0.002\n");
  const RiskFreeCurve r2 = RiskFreeCurve::read(in);
  CHECK(r2 == RiskFreeCurve({0.001, 0.002}));
  CHECK(RiskFreeCurve::constant(0.0, 4).growth(1, 4) == 1.0);
}
