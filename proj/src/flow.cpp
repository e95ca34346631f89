#include "surfnet/flow.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "surfnet/errors.hpp"
#include "surfnet/landscape.hpp"
#include "surfnet/rng.hpp"

namespace surfnet {

ParameterFlow ParameterFlow::analytic(NetworkDims dims, double horizon, Generator fn) {
  if (!(horizon > 0.0)) throw InvalidConfig("flow horizon must be > 0");
  dims.validate();
  ParameterFlow f;
  f.kind_ = FlowKind::Analytic;
  f.dims_ = std::move(dims);
  f.horizon_ = horizon;
  f.fn_ = std::move(fn);
  return f;
}

ParameterFlow ParameterFlow::interpolation(NetworkParamsd start, NetworkParamsd end,
                                           double horizon) {
  if (!(horizon > 0.0)) throw InvalidConfig("flow horizon must be > 0");
  start.validate();
  end.validate();
  if (!(start.dims == end.dims))
    throw DimensionMismatch("interpolation endpoints have different shapes");
  ParameterFlow f;
  f.kind_ = FlowKind::Interpolation;
  f.dims_ = start.dims;
  f.horizon_ = horizon;
  f.thetas_ = {std::move(start), std::move(end)};
  return f;
}

ParameterFlow ParameterFlow::snapshots(std::vector<NetworkParamsd> thetas,
                                       std::vector<std::uint64_t> steps,
                                       std::uint64_t cadence) {
  if (thetas.empty()) throw InvalidConfig("snapshot sequence is empty");
  if (steps.size() != thetas.size())
    throw InvalidConfig("snapshot sequence needs one step index per snapshot");
  for (std::size_t i = 1; i < steps.size(); ++i)
    if (steps[i] <= steps[i - 1])
      throw InvalidConfig("snapshot step indices must be strictly increasing");
  for (const auto& t : thetas) {
    t.validate();
    if (!(t.dims == thetas.front().dims))
      throw DimensionMismatch("snapshots have different shapes");
  }
  ParameterFlow f;
  f.kind_ = FlowKind::SnapshotSequence;
  f.dims_ = thetas.front().dims;
  f.horizon_ = static_cast<double>(thetas.size() - 1);
  f.thetas_ = std::move(thetas);
  f.steps_ = std::move(steps);
  f.cadence_ = cadence;
  return f;
}

ParameterFlow ParameterFlow::constant(NetworkParamsd theta, double horizon) {
  auto copy = theta;
  return interpolation(std::move(theta), std::move(copy), horizon);
}

NetworkParamsd ParameterFlow::at(double s) const {
  if (!(s >= 0.0) || s > horizon_ * (1.0 + 1e-12))
    throw InvalidConfig("flow time " + std::to_string(s) + " outside [0, " +
                        std::to_string(horizon_) + "]");
  s = std::min(s, horizon_);
  switch (kind_) {
    case FlowKind::Analytic: {
      auto p = fn_(s);
      if (!(p.dims == dims_)) throw DimensionMismatch("analytic flow changed shape");
      return p;
    }
    case FlowKind::Interpolation:
      if (s == horizon_) return thetas_[1];
      return lerp(thetas_[0], thetas_[1], s / horizon_);
    case FlowKind::SnapshotSequence: {
      const auto i = static_cast<std::size_t>(std::floor(s));
      if (i + 1 >= thetas_.size()) return thetas_.back();
      const double t = s - static_cast<double>(i);
      if (t == 0.0) return thetas_[i];
      return lerp(thetas_[i], thetas_[i + 1], t);
    }
  }
  return thetas_.front();
}

FlowDiscretization discretize(const ParameterFlow& flow, double delta) {
  if (!(delta > 0.0)) throw InvalidConfig("discretization step must be > 0");
  FlowDiscretization disc;
  if (flow.kind() == FlowKind::SnapshotSequence) {
    disc.delta = 1.0;
    disc.snapshots = flow.snapshot_params();
    for (std::size_t t = 0; t < disc.snapshots.size(); ++t)
      disc.s_values.push_back(static_cast<double>(t));
    return disc;
  }
  disc.delta = delta;
  const double ratio = flow.horizon() / delta;
  const auto T = static_cast<std::size_t>(std::floor(ratio + 1e-9 * std::max(1.0, ratio)));
  for (std::size_t t = 0; t <= T; ++t) {
    const double s = std::min(delta * static_cast<double>(t), flow.horizon());
    disc.s_values.push_back(s);
    disc.snapshots.push_back(flow.at(s));
  }
  return disc;
}

// Micro-trainer ---------------------------------------------------------------

namespace {

void check_dataset(const NetworkParamsd& params, const std::vector<VectorXd>& latents,
                   const std::vector<VectorXd>& targets) {
  if (latents.size() != targets.size())
    throw DimensionMismatch("latent and target counts differ");
  for (const auto& y : targets)
    if (y.size() != params.dims.n) throw DimensionMismatch("target has wrong length");
}

double accumulate_gradient(const NetworkParamsd& params, const VectorXd& latent,
                           const VectorXd& target, NetworkParamsd& grad) {
  const auto layers = forward(params, latent);
  const VectorXd residual = layers.output - target;
  grad.V.noalias() += residual * layers.x.back().transpose();
  VectorXd delta = params.V.transpose() * residual;
  for (std::size_t i = params.W.size(); i-- > 0;) {
    for (Index j = 0; j < delta.size(); ++j)
      if (!(layers.z[i](j) > 0.0)) delta(j) = 0.0;
    grad.W[i].noalias() += delta * layers.x[i].transpose();
    grad.b[i] += delta;
    if (i > 0) delta = params.W[i].transpose() * delta;
  }
  return 0.5 * residual.squaredNorm();
}

void apply_step(NetworkParamsd& params, const NetworkParamsd& grad, double lr) {
  params.V -= lr * grad.V;
  for (std::size_t i = 0; i < params.W.size(); ++i) {
    params.W[i] -= lr * grad.W[i];
    params.b[i] -= lr * grad.b[i];
  }
}

}  // namespace

double training_loss(const NetworkParamsd& params, const std::vector<VectorXd>& latents,
                     const std::vector<VectorXd>& targets) {
  check_dataset(params, latents, targets);
  double loss = 0.0;
  for (std::size_t j = 0; j < latents.size(); ++j)
    loss += 0.5 * (evaluate(params, latents[j]) - targets[j]).squaredNorm();
  return loss;
}

NetworkParamsd training_gradient(const NetworkParamsd& params,
                                 const std::vector<VectorXd>& latents,
                                 const std::vector<VectorXd>& targets) {
  check_dataset(params, latents, targets);
  auto grad = NetworkParamsd::zeros(params.dims);
  for (std::size_t j = 0; j < latents.size(); ++j)
    accumulate_gradient(params, latents[j], targets[j], grad);
  return grad;
}

TrainedFlow micro_train_flow(const NetworkDims& dims, const std::vector<VectorXd>& targets,
                             const TrainConfig& cfg, std::uint64_t seed) {
  dims.validate();
  if (targets.empty()) throw InvalidConfig("training data is empty");
  if (cfg.cadence == 0) throw InvalidConfig("snapshot cadence must be >= 1");
  if (!(cfg.learning_rate > 0.0)) throw InvalidConfig("learning rate must be > 0");

  auto params = init_gaussian(dims, CounterRng::derive_key(seed, 0, "train.init"));
  std::vector<VectorXd> latents;
  auto latent_rng = CounterRng::stream(seed, 0, "train.latent");
  for (std::size_t j = 0; j < targets.size(); ++j) {
    VectorXd x(dims.k);
    for (Index c = 0; c < dims.k; ++c) x(c) = latent_rng.uniform(-1.0, 1.0);
    latents.push_back(std::move(x));
  }
  check_dataset(params, latents, targets);

  std::vector<NetworkParamsd> thetas{params};
  std::vector<std::uint64_t> steps{0};
  std::vector<double> losses{training_loss(params, latents, targets)};
  bool diverged = !std::isfinite(losses.front());

  const std::size_t N = targets.size();
  const bool full_batch = cfg.batch_size == 0 || cfg.batch_size >= N;
  for (std::uint64_t step = 1; step <= cfg.steps && !diverged; ++step) {
    auto grad = NetworkParamsd::zeros(dims);
    double batch_loss = 0.0;
    if (full_batch) {
      for (std::size_t j = 0; j < N; ++j)
        batch_loss += accumulate_gradient(params, latents[j], targets[j], grad);
    } else {
      auto batch_rng = CounterRng::stream(seed, step, "train.batch");
      for (std::size_t b = 0; b < cfg.batch_size; ++b) {
        const auto j = static_cast<std::size_t>(batch_rng() % N);
        batch_loss += accumulate_gradient(params, latents[j], targets[j], grad);
      }
    }
    if (!std::isfinite(batch_loss)) {
      diverged = true;
      break;
    }
    apply_step(params, grad, cfg.learning_rate);
    if (step % cfg.cadence == 0) {
      const double loss = training_loss(params, latents, targets);
      if (!std::isfinite(loss) || !flatten(params).allFinite()) {
        diverged = true;
        break;
      }
      thetas.push_back(params);
      steps.push_back(step);
      losses.push_back(loss);
    }
  }

  TrainedFlow out{ParameterFlow::snapshots(std::move(thetas), std::move(steps), cfg.cadence),
                  std::move(latents), std::move(losses), diverged};
  return out;
}

// Flow constants --------------------------------------------------------------

AssumptionEstimate estimate_assumption(const ParameterFlow& flow, double tau,
                                       const VectorXd& y, const MeasurementMatrixd& A,
                                       const OracleConfig& oracle,
                                       std::size_t grid_points) {
  if (!(tau > 0.0)) throw InvalidConfig("tau must be > 0");
  if (grid_points < 2) throw InvalidConfig("need at least two grid points in s");
  if (flow.dims().k > 3)
    throw OracleIntractable("brute-force minimizer needs k <= 3, got k = " +
                            std::to_string(flow.dims().k));
  AssumptionEstimate est;
  const double S = flow.horizon();
  for (std::size_t i = 0; i < grid_points; ++i) {
    const double s = S * static_cast<double>(i) / static_cast<double>(grid_points - 1);
    const auto theta = flow.at(s);
    est.M_hat = std::max(est.M_hat, max_layer_norm(theta));
    const Objectived obj(theta, A, y);
    const auto res = brute_force_min(obj, oracle);
    est.s_grid.push_back(s);
    est.minimizers.push_back(res.x_min);
    est.minimum_values.push_back(res.f_min);
    est.near_tie = est.near_tie || res.near_tie;
  }
  for (std::size_t i = 1; i < grid_points; ++i) {
    const double ds = est.s_grid[i] - est.s_grid[i - 1];
    est.L_hat = std::max(est.L_hat, (est.minimizers[i] - est.minimizers[i - 1]).norm() / ds);
  }
  if (est.L_hat > 0.0) {
    const double m = std::max(est.M_hat, 1.0);
    est.delta_bound = tau / (est.L_hat * std::pow(m, static_cast<double>(flow.dims().depth() + 1)));
  }
  return est;
}

}  // namespace surfnet
