#pragma once

// Desk-scale experiment runners. Every random choice is drawn from a stream
// keyed by the experiment seed and the trial index, so a trial's results do
// not depend on which other trials run or on the number of threads.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "surfnet/experiments/config.hpp"
#include "surfnet/experiments/report.hpp"
#include "surfnet/experiments/snapshot_file.hpp"

namespace surfnet::experiments {

/// derive_key(seed, trial, "trial").
std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial);

/// One vector per non-empty line, comma-separated.
std::vector<VectorXd> read_vectors_csv(const std::filesystem::path& path, Index expected_length);

/// Training targets of a micro-trained flow: the data file if given,
/// otherwise a Gaussian teacher of the same shape at uniform latents.
std::vector<VectorXd> training_data(const FlowSpec& spec);

ParameterFlow build_flow(const FlowSpec& spec);

/// The configured delta, or 0.05 of the horizon when unset.
FlowDiscretization discretize_config(const ExperimentConfig& cfg, const ParameterFlow& flow);

struct TrialResult {
  std::vector<TrialReport> trials;
  std::vector<SuccessRow> success;
  std::vector<ErrorRow> errors;
};

/// A = I, x_* and the init uniform on [-1, 1]^k, y = G_T(x_*).
TrialResult run_recovery(const ExperimentConfig& cfg, unsigned jobs = 1);

/// As recovery, with a fresh Gaussian A (m x n) per trial and per m.
TrialResult run_compressed_sensing(const ExperimentConfig& cfg, unsigned jobs = 1);

/// Targets from cfg.targets; per-pixel error distributions per m (A = I when
/// the measurement list is empty).
TrialResult run_rate_distortion(const ExperimentConfig& cfg, unsigned jobs = 1);

struct TrackingRow {
  std::size_t t = 0;
  double s = 0.0;
  double distance = 0.0;
  double f_surf = 0.0;
  double f_oracle = 0.0;
  std::size_t slack_size = 0;
  std::size_t pieces_examined = 0;
  bool near_tie = false;
};

struct TrackingRun {
  std::string name;
  double delta = 0.0;
  std::vector<TrackingRow> rows;
  /// Every snapshot within tolerance of the oracle.
  bool tracked = false;
  /// Consecutive oracle minimizers further apart than 10 L_hat delta.
  std::size_t minimizer_jumps = 0;
  bool x0_from_oracle = false;
  std::vector<std::string> warnings;
};

struct TrackingResult {
  VectorXd y;
  AssumptionEstimate estimate;
  TrackingRun nominal;
  std::optional<TrackingRun> stress;
};

/// Needs k <= 2. Estimates M and L, runs projected surfing at delta =
/// safety * bound (or the configured delta) and checks every snapshot against
/// the oracle; the stress run at stress * bound is reported only.
TrackingResult run_tracking(const ExperimentConfig& cfg, unsigned jobs = 1);

struct LandscapeResult {
  std::vector<std::uint64_t> network_seeds;
  std::vector<LandscapeReport> reports;
};

LandscapeResult run_landscape(const ExperimentConfig& cfg, unsigned jobs = 1);

struct TrainFlowResult {
  TrainedFlow trained;
  SnapshotMetadata metadata;
};

TrainFlowResult run_train_flow(const ExperimentConfig& cfg);

/// Files (relative name, contents) plus a short text summary.
struct ExperimentOutput {
  std::vector<std::pair<std::string, std::string>> files;
  std::string summary;
  /// Written by the caller with write_snapshot_file.
  std::optional<TrainFlowResult> flow;
};

ExperimentOutput render(const ExperimentConfig& cfg, const TrialResult& result);
ExperimentOutput render(const TrackingResult& result, const ExperimentConfig& cfg);
ExperimentOutput render(const LandscapeResult& result, const ExperimentConfig& cfg);

ExperimentOutput run_experiment(const ExperimentConfig& cfg, unsigned jobs = 1);

/// Writes every file of `output` under `dir` (created if needed); the trained
/// flow goes to dir/flow.bin with its sidecar.
void write_output(const std::filesystem::path& dir, const ExperimentOutput& output);

}  // namespace surfnet::experiments
