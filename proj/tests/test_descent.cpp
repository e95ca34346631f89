#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "surfnet/descent.hpp"
#include "surfnet/errors.hpp"
#include "surfnet/synthetic_flows.hpp"

using namespace surfnet;
using surfnet::testing::uniform_vector;

namespace {

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

}  // namespace

TEST_CASE("gradient descent on f = x^2 / 2") {
  const auto p = synthetic::abs_network();
  const Objectived obj(p, MeasurementMatrixd::identity(1), scalar(0));
  auto cfg = DescentConfig::gradient_descent(0.5);
  cfg.record_path = true;
  const auto res = minimize(obj, scalar(2.0), cfg);
  CHECK(std::abs(res.x_final(0)) <= 1e-8);
  CHECK(res.iterations <= 60);
  CHECK(res.converged);
  // Each step halves x exactly.
  REQUIRE(res.path.size() >= 3);
  CHECK(res.path[1](0) == 1.0);
  CHECK(res.path[2](0) == 0.5);
  for (std::size_t i = 1; i < res.path.size(); ++i)
    CHECK(obj.value(res.path[i]) <= obj.value(res.path[i - 1]) + 1e-9);
}

TEST_CASE("Adam's first step has length lr") {
  const auto p = synthetic::abs_network();
  const Objectived obj(p, MeasurementMatrixd::identity(1), scalar(0));
  auto cfg = DescentConfig::adam_optimizer(0.001);
  cfg.max_iters = 1;
  const auto res = minimize(obj, scalar(1.0), cfg);
  CHECK(res.x_final(0) - 1.0 == doctest::Approx(-0.001).epsilon(1e-6));
}

TEST_CASE("Adam reaches the minimizer of a smooth problem") {
  const auto p = synthetic::one_unit_network(0.0);
  const Objectived obj(p, MeasurementMatrixd::identity(1), scalar(2));
  auto cfg = DescentConfig::adam_optimizer(0.01);
  cfg.max_iters = 20000;
  const auto res = minimize(obj, scalar(0.0), cfg);
  CHECK(res.x_final(0) == doctest::Approx(1.0).epsilon(1e-4));
  CHECK(res.f_final <= obj.value(scalar(0.0)));
}

TEST_CASE("starting at the minimizer stops immediately") {
  const auto p = synthetic::one_unit_network(0.0);
  const Objectived obj(p, MeasurementMatrixd::identity(1), scalar(2));
  const auto res = minimize(obj, scalar(1.0), DescentConfig::gradient_descent());
  CHECK(res.iterations <= 1);
  CHECK(res.converged);
  CHECK(res.stop_reason == StopReason::GradTol);
}

TEST_CASE("descent is deterministic and never increases f") {
  auto rng = CounterRng::stream(30, 0, "test.descent");
  for (int trial = 0; trial < 10; ++trial) {
    const auto dims = testing::random_dims(rng, 4, 2);
    const auto p = init_gaussian(dims, rng());
    const Objectived obj(p, MeasurementMatrixd::identity(dims.n), testing::normal_vector(rng, dims.n));
    const VectorXd x0 = uniform_vector(rng, dims.k);
    auto cfg = DescentConfig::gradient_descent(0.5);
    cfg.record_path = true;
    cfg.max_iters = 500;
    const auto a = minimize(obj, x0, cfg);
    const auto b = minimize(obj, x0, cfg);
    CHECK(a.x_final == b.x_final);
    CHECK(a.iterations == b.iterations);
    for (std::size_t i = 1; i < a.path.size(); ++i)
      CHECK(obj.value(a.path[i]) <= obj.value(a.path[i - 1]) + 1e-9);
  }
}

TEST_CASE("invalid descent configurations") {
  auto cfg = DescentConfig::gradient_descent(0.0);
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = DescentConfig::adam_optimizer();
  cfg.adam.beta1 = 1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
  cfg = DescentConfig::gradient_descent();
  cfg.grad_tol = -1.0;
  CHECK_THROWS_AS(cfg.validate(), InvalidConfig);
}

TEST_CASE("non-finite objectives are reported") {
  auto p = synthetic::abs_network();
  p.V(0, 0) = 1e300;
  const Objectived obj(p, MeasurementMatrixd::identity(1), scalar(0));
  CHECK_THROWS_AS(minimize(obj, scalar(1e10), DescentConfig::gradient_descent()),
                  NonFiniteEncountered);
}

TEST_CASE("projected descent on hand-built pieces") {
  const auto p = synthetic::abs_network();
  SUBCASE("clamped at the boundary of x >= 0") {
    const Objectived obj(p, MeasurementMatrixd::identity(1), scalar(-1));
    const auto piece = build_piece(p, ActivationPattern{{{true, false}}});
    const auto res = minimize_on_piece(obj, piece, scalar(2.0), DescentConfig::gradient_descent());
    CHECK(std::abs(res.x_final(0)) <= 1e-12);
  }
  SUBCASE("a single-point piece returns the point") {
    const Objectived obj(p, MeasurementMatrixd::identity(1), scalar(3));
    const auto piece = build_piece(p, ActivationPattern{{{false, false}}});
    const auto res = minimize_on_piece(obj, piece, scalar(0.7), DescentConfig::gradient_descent());
    CHECK(std::abs(res.x_final(0)) <= 1e-12);
  }
  SUBCASE("interior minimizer on the negative halfline") {
    const Objectived obj(p, MeasurementMatrixd::identity(1), scalar(2));
    const auto piece = build_piece(p, ActivationPattern{{{false, true}}});
    const auto res = minimize_on_piece(obj, piece, scalar(-0.1), DescentConfig::gradient_descent());
    CHECK(res.x_final(0) == doctest::Approx(-2.0).epsilon(1e-9));
  }
}

TEST_CASE("projected descent matches the normal equations for interior minimizers") {
  auto rng = CounterRng::stream(31, 0, "test.pgd");
  int checked = 0;
  while (checked < 20) {
    const auto dims = testing::random_dims(rng, 3, 2);
    const auto p = init_gaussian(dims, rng());
    const VectorXd anchor = uniform_vector(rng, dims.k);
    const auto piece = build_piece(p, activation_pattern(p, anchor));
    const MatrixXd& J = piece.map.J;
    if (Eigen::JacobiSVD<MatrixXd>(J).singularValues().minCoeff() < 1e-3) continue;
    // Target realized by an interior point of the piece.
    const VectorXd y = evaluate(p, anchor);
    const auto A = MeasurementMatrixd::gaussian(dims.n + 2, dims.n, rng());
    const Objectived obj(p, A, y);
    const MatrixXd Jm = A.A * J;
    const VectorXd rhs = A.apply(y) - A.A * piece.map.offset;
    const VectorXd oracle = (Jm.transpose() * Jm).ldlt().solve(Jm.transpose() * rhs);
    auto cfg = DescentConfig::gradient_descent();
    cfg.record_path = true;
    const VectorXd start = project(piece.polytope, anchor + uniform_vector(rng, dims.k, 0.3)).x;
    const auto res = minimize_on_piece(obj, piece, start, cfg);
    CHECK((res.x_final - oracle).norm() <= 1e-7);
    CHECK(piece.polytope.max_violation(res.x_final) <= 1e-8);
    for (std::size_t i = 1; i < res.path.size(); ++i)
      CHECK(obj.value(res.path[i]) <= obj.value(res.path[i - 1]) + 1e-9);
    ++checked;
  }
}
