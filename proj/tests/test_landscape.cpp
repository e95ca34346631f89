#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "surfnet/errors.hpp"
#include "surfnet/landscape.hpp"
#include "surfnet/synthetic_flows.hpp"

using namespace surfnet;

namespace {

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

}  // namespace

TEST_CASE("oracle on the one-unit network") {
  const auto p = synthetic::one_unit_network(0.0);
  const Objectived obj(p, MeasurementMatrixd::identity(1), scalar(2.0));
  OracleConfig cfg;
  cfg.resolution = 0.001;
  const auto res = brute_force_min(obj, cfg);
  CHECK(res.grid_points == 8001);
  CHECK(res.x_min(0) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(res.f_min <= 1e-20);
  CHECK_FALSE(res.near_tie);
}

TEST_CASE("oracle on a realizable target") {
  const auto p = init_gaussian({2, {8, 16}, 12}, 5);
  const VectorXd x_star{{0.25, -0.5}};
  const Objectived obj(p, MeasurementMatrixd::identity(12), evaluate(p, x_star));
  const auto res = brute_force_min(obj, OracleConfig{});
  CHECK(res.f_min <= 1e-10);
}

TEST_CASE("oracle flags the symmetric minimizers of |x| = 1") {
  const auto p = synthetic::abs_network();
  const Objectived obj(p, MeasurementMatrixd::identity(1), scalar(1.0));
  const auto res = brute_force_min(obj, OracleConfig{});
  CHECK(res.near_tie);
  CHECK(std::abs(std::abs(res.x_min(0)) - 1.0) <= 1e-9);
  CHECK(res.f_min <= 1e-20);
}

TEST_CASE("oracle finds kink minimizers exactly") {
  // f = 1/2 (|x| + 1)^2 is minimized at the kink x = 0.
  auto p = synthetic::abs_network();
  const Objectived obj(p, MeasurementMatrixd::identity(1), scalar(-1.0));
  const auto res = brute_force_min(obj, OracleConfig{});
  CHECK(std::abs(res.x_min(0)) <= 1e-12);
  CHECK(res.f_min == doctest::Approx(0.5));
}

TEST_CASE("oracle grid cap") {
  const auto p = init_gaussian({4, {5}, 6}, 1);
  const Objectived obj(p, MeasurementMatrixd::identity(6), VectorXd::Zero(6));
  CHECK_THROWS_AS(brute_force_min(obj, OracleConfig{}), OracleIntractable);
  OracleConfig bad;
  bad.resolution = 0.0;
  CHECK_THROWS_AS(brute_force_min(obj, bad), InvalidConfig);
}

TEST_CASE("descent-direction report on an expansive network") {
  const NetworkDims dims{2, {50, 200}, 400};
  const auto p = init_gaussian(dims, 4);
  auto rng = CounterRng::stream(60, 0, "test.landscape");
  const VectorXd y = testing::normal_vector(rng, 400).normalized();
  const auto A = MeasurementMatrixd::identity(400);
  const auto report = verify_descent_direction(p, y, A, {2.0, 0.5, 0.001}, 200, 7);
  REQUIRE(report.fractions.size() == 3);
  CHECK(report.radii == std::vector<double>{0.001, 0.5, 2.0});
  for (double f : report.fractions) {
    CHECK(f >= 0.0);
    CHECK(f <= 1.0);
  }
  CHECK(report.fractions[1] >= 0.99);
  CHECK(report.fractions[2] >= 0.99);
  REQUIRE(report.ball_estimate.has_value());
  CHECK(*report.ball_estimate <= 0.5);

  const auto again = verify_descent_direction(p, y, A, {2.0, 0.5, 0.001}, 200, 7);
  CHECK(again.fractions == report.fractions);
}
