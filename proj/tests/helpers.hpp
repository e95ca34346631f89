#pragma once

#include <algorithm>
#include <cstdint>
#include <vector>

#include "surfnet/network.hpp"
#include "surfnet/rng.hpp"

namespace surfnet::testing {

inline VectorXd uniform_vector(CounterRng& rng, Index k, double box = 1.0) {
  VectorXd v(k);
  for (Index i = 0; i < k; ++i) v(i) = rng.uniform(-box, box);
  return v;
}

inline VectorXd normal_vector(CounterRng& rng, Index k) {
  VectorXd v(k);
  for (Index i = 0; i < k; ++i) v(i) = rng.normal();
  return v;
}

/// Random dims with k <= max_k, depth <= max_d, widths in [2, 12].
inline NetworkDims random_dims(CounterRng& rng, Index max_k, Index max_d) {
  NetworkDims dims;
  dims.k = 1 + static_cast<Index>(rng() % static_cast<std::uint64_t>(max_k));
  const auto d = 1 + rng() % static_cast<std::uint64_t>(max_d);
  for (std::uint64_t i = 0; i < d; ++i) dims.widths.push_back(2 + static_cast<Index>(rng() % 11));
  dims.n = 1 + static_cast<Index>(rng() % 10);
  return dims;
}

/// Smallest preactivation magnitude at x.
inline double kink_distance(const NetworkParamsd& p, const VectorXd& x) {
  const auto layers = forward(p, x);
  double m = 1e300;
  for (const auto& z : layers.z) m = std::min(m, z.cwiseAbs().minCoeff());
  return m;
}

}  // namespace surfnet::testing
