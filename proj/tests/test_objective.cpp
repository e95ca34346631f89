#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "surfnet/errors.hpp"
#include "surfnet/objective.hpp"
#include "surfnet/synthetic_flows.hpp"

using namespace surfnet;
using surfnet::testing::uniform_vector;

namespace {

VectorXd scalar(double v) { return VectorXd::Constant(1, v); }

// Central differences, step h.
VectorXd fd_gradient(const Objectived& obj, const VectorXd& x, double h = 1e-6) {
  VectorXd g(x.size());
  for (Index i = 0; i < x.size(); ++i) {
    VectorXd a = x, b = x;
    a(i) += h;
    b(i) -= h;
    g(i) = (obj.value(a) - obj.value(b)) / (2 * h);
  }
  return g;
}

}  // namespace

TEST_CASE("objective values by hand") {
  const auto abs = synthetic::abs_network();
  const Objectived f(abs, MeasurementMatrixd::identity(1), scalar(0));
  CHECK(f.value(scalar(2)) == 2.0);

  const auto unit = synthetic::one_unit_network(0.0);
  const Objectived g(unit, MeasurementMatrixd::identity(1), scalar(2));
  CHECK(g.value(scalar(0)) == 0.5);

  const auto p = init_gaussian({3, {6, 9}, 4}, 1);
  const VectorXd x{{0.1, -0.4, 0.7}};
  const Objectived h(p, MeasurementMatrixd::gaussian(3, 4, 2), evaluate(p, x));
  CHECK(h.value(x) == 0.0);
}

TEST_CASE("gradients on the absolute-value network") {
  const auto abs = synthetic::abs_network();
  const Objectived f(abs, MeasurementMatrixd::identity(1), scalar(0));
  CHECK(f.gradient(scalar(2))(0) == 2.0);
  // G = -x on the negative piece: J = -1, residual 3, gradient -3.
  CHECK(f.gradient(scalar(-3))(0) == -3.0);
}

TEST_CASE("gradient matches central finite differences away from kinks") {
  auto rng = CounterRng::stream(10, 0, "test.fd");
  int checked = 0;
  while (checked < 100) {
    const auto dims = testing::random_dims(rng, 6, 3);
    const auto p = init_gaussian(dims, rng());
    const VectorXd y = testing::normal_vector(rng, dims.n);
    const Objectived obj(p, MeasurementMatrixd::identity(dims.n), y);
    const VectorXd x = uniform_vector(rng, dims.k);
    if (testing::kink_distance(p, x) < 1e-4) continue;
    const VectorXd g = obj.gradient(x);
    CHECK((fd_gradient(obj, x) - g).norm() / (1 + g.norm()) < 1e-5);
    ++checked;
  }
}

TEST_CASE("gradient with a Gaussian measurement matrix") {
  auto rng = CounterRng::stream(11, 0, "test.fd_cs");
  const auto p = init_gaussian({3, {8, 12}, 10}, 4);
  const Objectived obj(p, MeasurementMatrixd::gaussian(6, 10, 5), testing::normal_vector(rng, 10));
  for (int i = 0; i < 20; ++i) {
    const VectorXd x = uniform_vector(rng, 3);
    if (testing::kink_distance(p, x) < 1e-4) continue;
    const VectorXd g = obj.gradient(x);
    CHECK((fd_gradient(obj, x) - g).norm() / (1 + g.norm()) < 1e-5);
  }
}

TEST_CASE("one-sided directional derivatives at a kink") {
  const auto abs = synthetic::abs_network();
  const Objectived y0(abs, MeasurementMatrixd::identity(1), scalar(0));
  CHECK(y0.directional_derivative(scalar(0), scalar(1)) == 0.0);

  const Objectived y1(abs, MeasurementMatrixd::identity(1), scalar(1));
  CHECK(y1.directional_derivative(scalar(0), scalar(-1)) == -1.0);
  CHECK(y1.directional_derivative(scalar(0), scalar(1)) == -1.0);

  CHECK_THROWS_AS(y1.directional_derivative(scalar(0), scalar(0)), InvalidConfig);
}

TEST_CASE("directional derivative equals gradient dot v at differentiable points") {
  auto rng = CounterRng::stream(12, 0, "test.dirderiv");
  const auto p = init_gaussian({4, {10, 20}, 8}, 3);
  const Objectived obj(p, MeasurementMatrixd::identity(8), testing::normal_vector(rng, 8));
  for (int i = 0; i < 50; ++i) {
    const VectorXd x = uniform_vector(rng, 4);
    if (testing::kink_distance(p, x) < 1e-6) continue;
    const VectorXd v = testing::normal_vector(rng, 4).normalized();
    const double expect = obj.gradient(x).dot(v);
    CHECK(std::abs(obj.directional_derivative(x, v) - expect) <= 1e-12 * (1 + std::abs(expect)));
  }
}

TEST_CASE("directional derivative matches a one-sided difference quotient at kinks") {
  // Construct points exactly on a first-layer hyperplane.
  auto rng = CounterRng::stream(13, 0, "test.kink");
  const auto p = init_gaussian({2, {6}, 3}, 8);
  const Objectived obj(p, MeasurementMatrixd::identity(3), testing::normal_vector(rng, 3));
  const VectorXd w = p.W[0].row(0).transpose();
  for (int i = 0; i < 20; ++i) {
    VectorXd x = uniform_vector(rng, 2);
    x -= ((w.dot(x) + p.b[0](0)) / w.squaredNorm()) * w;
    const VectorXd v = testing::normal_vector(rng, 2).normalized();
    const double t = 1e-7;
    const double quotient = (obj.value(x + t * v) - obj.value(x)) / t;
    CHECK(obj.directional_derivative(x, v) == doctest::Approx(quotient).epsilon(1e-4).scale(1));
  }
}

TEST_CASE("f is quadratic along segments inside one piece") {
  auto rng = CounterRng::stream(14, 0, "test.quadratic");
  int checked = 0;
  while (checked < 30) {
    const auto dims = testing::random_dims(rng, 4, 3);
    const auto p = init_gaussian(dims, rng());
    const Objectived obj(p, MeasurementMatrixd::identity(dims.n), testing::normal_vector(rng, dims.n));
    const VectorXd a = uniform_vector(rng, dims.k);
    const VectorXd dir = testing::normal_vector(rng, dims.k).normalized();
    const double len = 0.05;
    const auto pattern = activation_pattern(p, a);
    // Second differences at 4 positions along the segment must agree.
    std::vector<double> second;
    bool same = true;
    for (int j = 0; j < 4; ++j) {
      const VectorXd x0 = a + (j * len / 4) * dir;
      const VectorXd x2 = x0 + (len / 4) * dir;
      const VectorXd x1 = 0.5 * (x0 + x2);
      for (const auto& z : {x0, x1, x2}) same = same && activation_pattern(p, z) == pattern;
      second.push_back(obj.value(x0) - 2 * obj.value(x1) + obj.value(x2));
    }
    if (!same) continue;
    const double scale = std::abs(obj.value(a)) + 1e-12;
    for (double s : second) CHECK(std::abs(s - second[0]) <= 1e-9 * scale);
    ++checked;
  }
}

TEST_CASE("Gaussian measurement matrix is a loose near-isometry for m >= 20k") {
  const Index k = 2, n = 60, m = 40;
  const auto p = init_gaussian({k, {10}, n}, 6);
  auto rng = CounterRng::stream(15, 0, "test.isometry");
  int ok = 0;
  const int samples = 1000;
  const auto A = MeasurementMatrixd::gaussian(m, n, 16);
  for (int i = 0; i < samples; ++i) {
    const VectorXd u = evaluate(p, uniform_vector(rng, k));
    const VectorXd w = evaluate(p, uniform_vector(rng, k));
    const double lhs = std::abs(A.apply(u).dot(A.apply(w)) - u.dot(w));
    if (lhs <= 0.5 * u.norm() * w.norm()) ++ok;
  }
  CHECK(ok >= 950);
}

TEST_CASE("objective rejects mismatched shapes") {
  const auto p = synthetic::abs_network();
  CHECK_THROWS_AS(Objectived(p, MeasurementMatrixd::identity(1), VectorXd::Zero(2)),
                  DimensionMismatch);
  CHECK_THROWS_AS(Objectived(p, MeasurementMatrixd::identity(2), VectorXd::Zero(1)),
                  DimensionMismatch);
}
