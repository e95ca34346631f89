#pragma once

// Experiment configuration (JSON, schema version 1).

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "surfnet/flow.hpp"
#include "surfnet/landscape.hpp"
#include "surfnet/surfing.hpp"

namespace surfnet::experiments {

inline constexpr int kConfigVersion = 1;

enum class ExperimentKind { Recovery, CompressedSensing, RateDistortion, Landscape, Tracking, TrainFlow };

enum class Method { Surfing, SurfingProjected, Direct };

std::string_view to_string(ExperimentKind kind);
std::string_view to_string(Method method);
Method parse_method(std::string_view name);

/// Where training data for a micro-trained flow comes from: a CSV of target
/// vectors, or outputs of a Gaussian "teacher" network at uniform latents.
struct DataSpec {
  std::string path;
  std::size_t count = 64;
  std::uint64_t teacher_seed = 1;
};

struct FlowSpec {
  /// one_unit, deceptive, crossing, gaussian_interpolation, constant,
  /// micro_train or snapshot_file.
  std::string kind = "one_unit";
  NetworkDims dims{1, {1}, 1};
  std::uint64_t seed = 0;
  std::uint64_t seed_end = 1;
  double c = 0.2;
  double a_final = 2.0;
  std::string path;
  TrainConfig train;
  DataSpec data;
};

/// Rate-distortion targets: a CSV file of y vectors (one trial per row), or
/// one y = G_T(x_*) per trial plus a perturbation of norm rho orthogonal to
/// the local range.
struct TargetSpec {
  std::string path;
  double rho = 0.0;
};

struct LandscapeSpec {
  NetworkDims dims{4, {100, 400}, 1600};
  std::vector<double> radii{0.001, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 2.0};
  std::size_t samples = 500;
  std::size_t networks = 3;
  double y_norm = 1.0;
  double threshold = 0.99;
};

struct TrackingSpec {
  double tau = 0.1;
  /// delta = safety * bound, unless the top-level delta is set.
  double safety = 0.5;
  /// The stress run uses delta = stress * bound.
  double stress = 20.0;
  double tolerance = 1e-6;
  std::size_t grid_points = 201;
  OracleConfig oracle;
  /// Preimage of the target, y = G_S(x_star). Unset: the flow's canonical
  /// truth if it has one, otherwise uniform on [-1, 1]^k.
  std::optional<std::vector<double>> x_star;
};

struct ExperimentConfig {
  int version = kConfigVersion;
  ExperimentKind kind = ExperimentKind::Recovery;
  std::uint64_t seed = 0;
  std::size_t trials = 1;
  FlowSpec flow;
  std::optional<double> delta;
  std::vector<Method> methods{Method::Surfing, Method::Direct};
  /// Inits are uniform on the hypercube by default, as in the recovery protocol.
  SurfConfig surf = [] {
    SurfConfig s;
    s.init = InitPolicy::Uniform;
    return s;
  }();
  DescentConfig direct = DescentConfig::adam_optimizer(0.01);
  std::size_t direct_restarts = 1;
  double success_threshold = 0.01;
  /// Measurement counts; empty means A = I.
  std::vector<Index> measurements;
  TargetSpec targets;
  LandscapeSpec landscape;
  TrackingSpec tracking;
  /// Wall times are written as 0 unless set, so reruns are byte-identical.
  bool record_timing = false;

  void validate() const;
};

/// Parses and validates a configuration. Unknown keys are rejected. Relative
/// paths inside the file are resolved against `base_dir`.
ExperimentConfig parse_config(const std::string& json_text,
                              const std::filesystem::path& base_dir = {});

/// Throws InvalidConfig (naming the path) when the file is missing or invalid.
ExperimentConfig load_config(const std::filesystem::path& path);

}  // namespace surfnet::experiments
