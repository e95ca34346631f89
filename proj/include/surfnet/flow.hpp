#pragma once

// Parameter flows theta(s), s in [0, S], their discretization into snapshots,
// a small decoder-only trainer that produces snapshot sequences, and
// estimators for the flow constants M (weight bound) and L (minimizer speed).

#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <memory>
#include <vector>

#include "surfnet/descent.hpp"
#include "surfnet/network.hpp"
#include "surfnet/objective.hpp"

namespace surfnet {

enum class FlowKind { Analytic, Interpolation, SnapshotSequence };

class ParameterFlow {
 public:
  using Generator = std::function<NetworkParamsd(double)>;

  static ParameterFlow analytic(NetworkDims dims, double horizon, Generator fn);
  /// theta(s) = (1 - s/S) start + (s/S) end.
  static ParameterFlow interpolation(NetworkParamsd start, NetworkParamsd end,
                                     double horizon = 1.0);
  /// Recorded snapshots with strictly increasing training-step indices. As a
  /// continuous flow it is indexed by snapshot position (S = count - 1) and
  /// interpolated linearly between neighbours.
  static ParameterFlow snapshots(std::vector<NetworkParamsd> thetas,
                                 std::vector<std::uint64_t> steps,
                                 std::uint64_t cadence = 0);
  /// theta(s) = theta for every s.
  static ParameterFlow constant(NetworkParamsd theta, double horizon = 1.0);

  FlowKind kind() const { return kind_; }
  double horizon() const { return horizon_; }
  const NetworkDims& dims() const { return dims_; }
  NetworkParamsd at(double s) const;

  const std::vector<NetworkParamsd>& snapshot_params() const { return thetas_; }
  const std::vector<std::uint64_t>& snapshot_steps() const { return steps_; }
  std::uint64_t cadence() const { return cadence_; }

 private:
  FlowKind kind_ = FlowKind::Analytic;
  NetworkDims dims_;
  double horizon_ = 1.0;
  Generator fn_;
  std::vector<NetworkParamsd> thetas_;
  std::vector<std::uint64_t> steps_;
  std::uint64_t cadence_ = 0;
};

/// theta_t = theta(delta t) for t = 0..T.
struct FlowDiscretization {
  double delta = 0.0;
  std::vector<double> s_values;
  std::vector<NetworkParamsd> snapshots;

  std::size_t T() const { return snapshots.empty() ? 0 : snapshots.size() - 1; }
  const NetworkParamsd& final_params() const { return snapshots.back(); }
};

/// T = floor(S / delta) (with a 1e-9 relative guard against round-off); a
/// snapshot sequence is returned as-is with delta = 1.
FlowDiscretization discretize(const ParameterFlow& flow, double delta);

// Micro-trainer ---------------------------------------------------------------

struct TrainConfig {
  double learning_rate = 1e-3;
  std::uint64_t steps = 400;
  std::uint64_t cadence = 40;
  /// 0 means full batch.
  std::size_t batch_size = 0;
};

struct TrainedFlow {
  ParameterFlow flow;
  std::vector<VectorXd> latents;
  /// Full-data training loss at each recorded snapshot.
  std::vector<double> losses;
  bool diverged = false;
};

/// 1/2 sum_j ||G(x_j, theta) - y_j||^2.
double training_loss(const NetworkParamsd& params, const std::vector<VectorXd>& latents,
                     const std::vector<VectorXd>& targets);

/// Gradient of training_loss with respect to every parameter (same layout as
/// the network), by backpropagation through the dense ReLU layers.
NetworkParamsd training_gradient(const NetworkParamsd& params,
                                 const std::vector<VectorXd>& latents,
                                 const std::vector<VectorXd>& targets);

/// Trains a Gaussian-initialized generator (seed-derived) on fixed latent
/// codes drawn uniformly from [-1, 1]^k by (minibatch) gradient steps, and
/// records theta every `cadence` steps starting with theta_0. A non-finite
/// loss stops training and returns what was recorded so far.
TrainedFlow micro_train_flow(const NetworkDims& dims, const std::vector<VectorXd>& targets,
                             const TrainConfig& cfg, std::uint64_t seed);

// Flow constants --------------------------------------------------------------

struct OracleConfig;

struct AssumptionEstimate {
  double M_hat = 0.0;
  double L_hat = 0.0;
  /// tau / (L_hat max(M_hat, 1)^(d+1)); +infinity when L_hat is zero.
  double delta_bound = std::numeric_limits<double>::infinity();
  std::vector<double> s_grid;
  std::vector<VectorXd> minimizers;
  std::vector<double> minimum_values;
  /// Some grid point had two separated basins within 1e-3 in f.
  bool near_tie = false;

  bool delta_unbounded() const { return !std::isfinite(delta_bound); }
};

/// Samples the flow on `grid_points` uniform values of s in [0, S]; M_hat from
/// power iteration, L_hat from consecutive brute-force minimizers.
AssumptionEstimate estimate_assumption(const ParameterFlow& flow, double tau,
                                       const VectorXd& y, const MeasurementMatrixd& A,
                                       const OracleConfig& oracle,
                                       std::size_t grid_points = 201);

}  // namespace surfnet
