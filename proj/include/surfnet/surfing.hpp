#pragma once

// Surfing: warm-started minimization across the snapshots of a parameter
// flow, in the plain form (descent on every snapshot) and the projected form
// (projected descent on every nearby linear piece, keep the best).

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "surfnet/descent.hpp"
#include "surfnet/flow.hpp"
#include "surfnet/pieces.hpp"

namespace surfnet {

enum class InitPolicy { Zero, Uniform };

struct SurfConfig {
  DescentConfig descent;
  /// Slack threshold for the projected variant.
  double tau = 0.1;
  InitPolicy init = InitPolicy::Zero;
  double init_box = 1.0;
  std::uint64_t init_seed = 0;
  bool record_trajectory = false;
  PieceOptions pieces;

  void validate_projected() const;
};

/// Zero, or uniform on [-box, box]^k from the stream (seed, 0, "surf.init").
VectorXd initial_point(InitPolicy policy, Index k, double box, std::uint64_t seed);

struct SurfResult {
  std::vector<VectorXd> x;
  std::vector<double> f;
  /// Projected variant: pieces minimized at step t (index 0 is the start).
  std::vector<std::size_t> pieces_examined;
  std::vector<std::size_t> slack_sizes;
  /// Index of the winning piece in the family at each step.
  std::vector<std::size_t> chosen_piece;
  std::size_t total_inner_iterations = 0;
  std::vector<std::string> warnings;
  /// Inner iterates per snapshot when record_trajectory is set.
  std::vector<std::vector<VectorXd>> trajectory;

  const VectorXd& x_final() const { return x.back(); }
  double f_final() const { return f.back(); }
};

/// Starts from `start` if given, otherwise from the configured init policy;
/// runs descent on f_0, f_1, ..., f_T with warm starts.
SurfResult surf_simple(const FlowDiscretization& disc, const VectorXd& y,
                       const MeasurementMatrixd& A, const SurfConfig& cfg,
                       const std::optional<VectorXd>& start = std::nullopt);

/// x_0 is `x0` if given, otherwise plain descent on f_0 from the configured
/// init point. Each later step enumerates the pieces around x_{t-1} under
/// theta_t, runs projected descent on each from x_{t-1} and keeps the lowest
/// objective (lowest family index on exact ties). A step whose slack set is
/// over budget falls back to the anchor piece with a warning.
SurfResult surf_projected(const FlowDiscretization& disc, const VectorXd& y,
                          const MeasurementMatrixd& A, const SurfConfig& cfg,
                          const std::optional<VectorXd>& x0 = std::nullopt);

/// Best of n_restarts descents on the final network alone. Restart 0 starts
/// where surf_simple would; restart r > 0 draws its init point with seed
/// derive_key(init_seed, r, "restart").
DescentResult direct_descent_baseline(const NetworkParamsd& final_params, const VectorXd& y,
                                      const MeasurementMatrixd& A, const SurfConfig& cfg,
                                      std::size_t n_restarts);

}  // namespace surfnet
