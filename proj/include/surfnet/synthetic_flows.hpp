#pragma once

// Hand-built networks and flows with known minimizers. They double as test
// instances and as the desk-scale flows of the experiment runners.

#include <cstdint>

#include "surfnet/flow.hpp"

namespace surfnet::synthetic {

/// k = 1, one hidden layer of two units: G(x) = relu(x) + relu(-x) = |x|.
NetworkParamsd abs_network();

/// k = 1, one unit: G(x) = (1 + s) relu(x + 1).
NetworkParamsd one_unit_network(double s);

/// s -> one_unit_network(s) on [0, 1]. With y = 2 the minimizer is
/// x_*(s) = 2 / (1 + s) - 1.
ParameterFlow one_unit_flow();

/// k = 2, hidden units relu(+-r_1 x), relu(+-r_2 x) for a seed-dependent
/// rotation (r_1, r_2). Output at time s (S = 1):
///   [ s |r_1 x|, c r_1 x, s |r_2 x|, c r_2 x ].
/// With y = G_1(x_*), f_0 is convex with minimizer x_*, and the minimizer
/// stays in the orthant of x_* for every s. The final objective has a spurious
/// local minimum in every orthant whose signs differ from x_*'s.
ParameterFlow deceptive_flow(std::uint64_t seed, double c = 0.2);

/// k = 2, units relu(+-x_1), relu(+-x_2) and a constant unit. Output at time s:
///   [ a(s) |x_1|, c (x_1 + m(s)), x_2 ]
/// with m(s) = 1.5 max(0, 1 - 2s) and a(s) = a_final max(0, 2s - 1). For
/// y = G_1((0.5, 0.3)) the minimizer starts at (-1, 0.3), crosses the kink
/// x_1 = 0 at s = 1/3 while the landscape is convex, then stays at
/// x_1 = (a + 0.5) / (a^2 + 1) as the |x_1| term grows.
ParameterFlow crossing_flow(double c = 1.0, double a_final = 2.0);

/// The target used with crossing_flow.
VectorXd crossing_flow_truth();

/// Linear interpolation between two Gaussian initializations.
ParameterFlow gaussian_interpolation_flow(const NetworkDims& dims, std::uint64_t seed_start,
                                          std::uint64_t seed_end);

}  // namespace surfnet::synthetic
