#pragma once

// Empirical landscape checks at random initialization and a brute-force
// global minimizer for low-dimensional inputs.

#include <cstdint>
#include <optional>
#include <vector>

#include "surfnet/descent.hpp"
#include "surfnet/objective.hpp"

namespace surfnet {

struct LandscapeReport {
  std::vector<double> radii;
  /// Fraction of sampled points with D_{-x/||x||} f(x) < 0, per radius.
  std::vector<double> fractions;
  /// Smallest tested radius from which every larger tested radius reaches
  /// `threshold`; empty if the largest radius already falls short.
  std::optional<double> ball_estimate;
  double threshold = 0.99;
  std::size_t n_samples = 0;
  std::uint64_t seed = 0;
  double y_norm = 0.0;
};

/// For each radius r, draws n_samples points uniformly on the sphere of radius
/// r (1 + ||y||) and evaluates the one-sided derivative toward the origin.
LandscapeReport verify_descent_direction(const NetworkParamsd& params, const VectorXd& y,
                                         const MeasurementMatrixd& A,
                                         std::vector<double> radii, std::size_t n_samples,
                                         std::uint64_t seed, double threshold = 0.99);

struct OracleConfig {
  double box = 4.0;
  double resolution = 0.01;
  std::size_t max_grid_points = 10'000'000;
  std::size_t polish_count = 10;
  DescentConfig polish = [] {
    DescentConfig cfg = DescentConfig::gradient_descent(0.5);
    cfg.max_iters = 2000;
    return cfg;
  }();

  std::size_t grid_points(Index k) const;
};

struct OracleResult {
  VectorXd x_min;
  double f_min = 0.0;
  bool near_tie = false;
  std::size_t grid_points = 0;
  std::vector<VectorXd> basins;
  std::vector<double> basin_values;
};

/// Exhaustive grid over [-B, B]^k, then local refinement of the best grid
/// local minima: gradient descent followed by an exact solve of the quadratic
/// on every nearby piece face. Throws OracleIntractable above the grid cap.
OracleResult brute_force_min(const Objectived& obj, const OracleConfig& cfg);

}  // namespace surfnet
