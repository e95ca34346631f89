#include "surfnet/synthetic_flows.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "surfnet/rng.hpp"

namespace surfnet::synthetic {

NetworkParamsd abs_network() {
  auto p = NetworkParamsd::zeros({1, {2}, 1});
  p.W[0] << 1.0, -1.0;
  p.V << 1.0, 1.0;
  return p;
}

NetworkParamsd one_unit_network(double s) {
  auto p = NetworkParamsd::zeros({1, {1}, 1});
  p.W[0](0, 0) = 1.0;
  p.b[0](0) = 1.0;
  p.V(0, 0) = 1.0 + s;
  return p;
}

ParameterFlow one_unit_flow() {
  return ParameterFlow::analytic({1, {1}, 1}, 1.0, one_unit_network);
}

namespace {

NetworkParamsd deceptive_network(const MatrixXd& R, double s, double c) {
  auto p = NetworkParamsd::zeros({2, {4}, 4});
  p.W[0].row(0) = R.row(0);
  p.W[0].row(1) = -R.row(0);
  p.W[0].row(2) = R.row(1);
  p.W[0].row(3) = -R.row(1);
  p.V << s, s, 0, 0,
         c, -c, 0, 0,
         0, 0, s, s,
         0, 0, c, -c;
  return p;
}

}  // namespace

ParameterFlow deceptive_flow(std::uint64_t seed, double c) {
  auto rng = CounterRng::stream(seed, 0, "synthetic.deceptive");
  const double angle = rng.uniform(0.0, std::numbers::pi / 2.0);
  MatrixXd R(2, 2);
  R << std::cos(angle), -std::sin(angle),
       std::sin(angle), std::cos(angle);
  return ParameterFlow::interpolation(deceptive_network(R, 0.0, c),
                                      deceptive_network(R, 1.0, c));
}

ParameterFlow crossing_flow(double c, double a_final) {
  const NetworkDims dims{2, {5}, 3};
  return ParameterFlow::analytic(dims, 1.0, [=](double s) {
    auto p = NetworkParamsd::zeros(dims);
    p.W[0] << 1, 0,
             -1, 0,
              0, 1,
              0, -1,
              0, 0;
    p.b[0](4) = 1.0;
    const double m = 1.5 * std::max(0.0, 1.0 - 2.0 * s);
    const double a = a_final * std::max(0.0, 2.0 * s - 1.0);
    p.V << a, a, 0, 0, 0,
           c, -c, 0, 0, c * m,
           0, 0, 1, -1, 0;
    return p;
  });
}

VectorXd crossing_flow_truth() { return VectorXd{{0.5, 0.3}}; }

ParameterFlow gaussian_interpolation_flow(const NetworkDims& dims, std::uint64_t seed_start,
                                          std::uint64_t seed_end) {
  return ParameterFlow::interpolation(init_gaussian(dims, seed_start),
                                      init_gaussian(dims, seed_end));
}

}  // namespace surfnet::synthetic
