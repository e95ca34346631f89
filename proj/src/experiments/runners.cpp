#include "surfnet/experiments/runners.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <limits>
#include <sstream>

#include <json.hpp>

#include "surfnet/errors.hpp"
#include "surfnet/experiments/parallel.hpp"
#include "surfnet/log.hpp"
#include "surfnet/rng.hpp"
#include "surfnet/synthetic_flows.hpp"

namespace surfnet::experiments {

namespace {

constexpr std::size_t kMaxSnapshots = 100000;

VectorXd uniform_point(std::uint64_t seed, std::string_view tag, Index k) {
  auto rng = CounterRng::stream(seed, 0, tag);
  VectorXd x(k);
  for (Index c = 0; c < k; ++c) x(c) = rng.uniform(-1.0, 1.0);
  return x;
}

struct TrialInput {
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  std::optional<VectorXd> x_star;
  VectorXd y;
  /// Gaussian A with m rows; unset means A = I.
  std::optional<Index> m;
};

std::vector<TrialReport> run_methods(const ExperimentConfig& cfg, const FlowDiscretization& disc,
                                     const TrialInput& in) {
  const auto& final_params = disc.final_params();
  const Index n = final_params.dims.n;
  const auto A = in.m ? MeasurementMatrixd::gaussian(
                            *in.m, n, CounterRng::derive_key(in.seed, static_cast<std::uint64_t>(*in.m),
                                                             "measurement"))
                      : MeasurementMatrixd::identity(n);
  SurfConfig scfg = cfg.surf;
  scfg.init_seed = CounterRng::derive_key(in.seed, 0, "init");

  std::vector<TrialReport> out;
  for (Method method : cfg.methods) {
    const auto start = std::chrono::steady_clock::now();
    VectorXd x_hat;
    double f = 0.0;
    std::size_t iterations = 0;
    switch (method) {
      case Method::Surfing: {
        const auto r = surf_simple(disc, in.y, A, scfg);
        x_hat = r.x_final();
        f = r.f_final();
        iterations = r.total_inner_iterations;
        break;
      }
      case Method::SurfingProjected: {
        const auto r = surf_projected(disc, in.y, A, scfg);
        x_hat = r.x_final();
        f = r.f_final();
        iterations = r.total_inner_iterations;
        break;
      }
      case Method::Direct: {
        SurfConfig dcfg = scfg;
        dcfg.descent = cfg.direct;
        const auto r = direct_descent_baseline(final_params, in.y, A, dcfg, cfg.direct_restarts);
        x_hat = r.x_final;
        f = r.f_final;
        iterations = static_cast<std::size_t>(r.iterations);
        break;
      }
    }
    const std::chrono::duration<double, std::milli> elapsed = std::chrono::steady_clock::now() - start;
    TrialReport rep;
    rep.method = method;
    rep.trial = in.trial;
    rep.seed = in.seed;
    rep.m = A.m;
    rep.distance = in.x_star ? (x_hat - *in.x_star).norm() : std::numeric_limits<double>::quiet_NaN();
    rep.f_final = f;
    rep.per_pixel_error =
        std::sqrt((evaluate(final_params, x_hat) - in.y).squaredNorm() / static_cast<double>(n));
    rep.iterations = iterations;
    rep.wall_ms = cfg.record_timing ? elapsed.count() : 0.0;
    out.push_back(rep);
  }
  return out;
}

std::vector<TrialReport> run_inputs(const ExperimentConfig& cfg, const FlowDiscretization& disc,
                                    const std::vector<TrialInput>& inputs, unsigned jobs) {
  std::vector<std::vector<TrialReport>> slots(inputs.size());
  parallel_for(inputs.size(), jobs, [&](std::size_t i) { slots[i] = run_methods(cfg, disc, inputs[i]); });
  std::vector<TrialReport> rows;
  for (auto& s : slots) rows.insert(rows.end(), s.begin(), s.end());
  return rows;
}

TrialInput realizable_input(const FlowDiscretization& disc, std::uint64_t seed, std::size_t trial) {
  TrialInput in;
  in.trial = trial;
  in.seed = trial_seed(seed, trial);
  const auto& final_params = disc.final_params();
  in.x_star = uniform_point(in.seed, "x_star", final_params.dims.k);
  in.y = evaluate(final_params, *in.x_star);
  return in;
}

TrialResult finish(const ExperimentConfig& cfg, std::vector<TrialReport> rows) {
  TrialResult r;
  r.success = success_table(rows, cfg.success_threshold);
  r.errors = error_table(rows);
  r.trials = std::move(rows);
  return r;
}

}  // namespace

std::uint64_t trial_seed(std::uint64_t seed, std::size_t trial) {
  return CounterRng::derive_key(seed, trial, "trial");
}

std::vector<VectorXd> read_vectors_csv(const std::filesystem::path& path, Index expected_length) {
  std::istringstream in(read_text_file(path));
  std::vector<VectorXd> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line.front() == '#') continue;
    std::vector<double> values;
    std::size_t start = 0;
    while (true) {
      const auto pos = line.find(',', start);
      auto field = std::string_view(line).substr(start, pos - start);
      while (!field.empty() && field.front() == ' ') field.remove_prefix(1);
      while (!field.empty() && field.back() == ' ') field.remove_suffix(1);
      try {
        values.push_back(parse_double(field));
      } catch (const IoError&) {
        throw IoError(path.string() + ":" + std::to_string(lineno) + ": malformed value '" +
                      std::string(field) + "'");
      }
      if (pos == std::string::npos) break;
      start = pos + 1;
    }
    if (static_cast<Index>(values.size()) != expected_length)
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected " +
                    std::to_string(expected_length) + " values, got " +
                    std::to_string(values.size()));
    out.push_back(Eigen::Map<VectorXd>(values.data(), expected_length));
  }
  if (out.empty()) throw IoError(path.string() + " holds no vectors");
  return out;
}

std::vector<VectorXd> training_data(const FlowSpec& spec) {
  if (!spec.data.path.empty()) return read_vectors_csv(spec.data.path, spec.dims.n);
  if (spec.data.count == 0) throw InvalidConfig("flow.data.count must be >= 1");
  const auto teacher =
      init_gaussian(spec.dims, CounterRng::derive_key(spec.data.teacher_seed, 0, "teacher"));
  auto rng = CounterRng::stream(spec.data.teacher_seed, 0, "teacher.latent");
  std::vector<VectorXd> out;
  for (std::size_t j = 0; j < spec.data.count; ++j) {
    VectorXd z(spec.dims.k);
    for (Index c = 0; c < spec.dims.k; ++c) z(c) = rng.uniform(-1.0, 1.0);
    out.push_back(evaluate(teacher, z));
  }
  return out;
}

ParameterFlow build_flow(const FlowSpec& spec) {
  if (spec.kind == "one_unit") return synthetic::one_unit_flow();
  if (spec.kind == "deceptive") return synthetic::deceptive_flow(spec.seed, spec.c);
  if (spec.kind == "crossing") return synthetic::crossing_flow(spec.c, spec.a_final);
  if (spec.kind == "gaussian_interpolation")
    return synthetic::gaussian_interpolation_flow(spec.dims, spec.seed, spec.seed_end);
  if (spec.kind == "constant") return ParameterFlow::constant(init_gaussian(spec.dims, spec.seed));
  if (spec.kind == "snapshot_file") return read_snapshot_file(spec.path);
  if (spec.kind == "micro_train") {
    auto trained = micro_train_flow(spec.dims, training_data(spec), spec.train, spec.seed);
    if (trained.diverged)
      warn("micro-training diverged; using the " +
           std::to_string(trained.flow.snapshot_params().size()) + " snapshots recorded before");
    return std::move(trained.flow);
  }
  throw InvalidConfig("unknown flow kind '" + spec.kind + "'");
}

FlowDiscretization discretize_config(const ExperimentConfig& cfg, const ParameterFlow& flow) {
  const double delta = cfg.delta.value_or(0.05 * flow.horizon());
  if (flow.kind() != FlowKind::SnapshotSequence && flow.horizon() / delta > kMaxSnapshots)
    throw InvalidConfig("delta " + format_double(delta) + " would need more than " +
                        std::to_string(kMaxSnapshots) + " snapshots");
  return discretize(flow, delta);
}

TrialResult run_recovery(const ExperimentConfig& cfg, unsigned jobs) {
  const auto disc = discretize_config(cfg, build_flow(cfg.flow));
  std::vector<TrialInput> inputs;
  for (std::size_t t = 0; t < cfg.trials; ++t) inputs.push_back(realizable_input(disc, cfg.seed, t));
  return finish(cfg, run_inputs(cfg, disc, inputs, jobs));
}

TrialResult run_compressed_sensing(const ExperimentConfig& cfg, unsigned jobs) {
  if (cfg.measurements.empty()) throw InvalidConfig("compressed sensing needs a measurements list");
  const auto disc = discretize_config(cfg, build_flow(cfg.flow));
  std::vector<TrialInput> inputs;
  for (Index m : cfg.measurements)
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      auto in = realizable_input(disc, cfg.seed, t);
      in.m = m;
      inputs.push_back(std::move(in));
    }
  return finish(cfg, run_inputs(cfg, disc, inputs, jobs));
}

TrialResult run_rate_distortion(const ExperimentConfig& cfg, unsigned jobs) {
  const auto disc = discretize_config(cfg, build_flow(cfg.flow));
  const auto& final_params = disc.final_params();
  const Index n = final_params.dims.n;

  std::vector<TrialInput> base;
  if (!cfg.targets.path.empty()) {
    const auto ys = read_vectors_csv(cfg.targets.path, n);
    for (std::size_t t = 0; t < ys.size(); ++t) {
      TrialInput in;
      in.trial = t;
      in.seed = trial_seed(cfg.seed, t);
      in.y = ys[t];
      base.push_back(std::move(in));
    }
  } else {
    for (std::size_t t = 0; t < cfg.trials; ++t) {
      auto in = realizable_input(disc, cfg.seed, t);
      if (cfg.targets.rho > 0.0) {
        // Push y off the range: a random direction with the local tangent
        // space of the piece at x_* projected out.
        const auto map = piece_affine_map(final_params, activation_pattern(final_params, *in.x_star));
        auto rng = CounterRng::stream(in.seed, 0, "perturbation");
        VectorXd u(n);
        for (Index i = 0; i < n; ++i) u(i) = rng.normal();
        Eigen::HouseholderQR<MatrixXd> qr(map.J);
        const Index r = std::min(map.J.rows(), map.J.cols());
        const MatrixXd Q = qr.householderQ() * MatrixXd::Identity(n, r);
        u -= Q * (Q.transpose() * u);
        if (u.norm() > 0.0) in.y += (cfg.targets.rho / u.norm()) * u;
      }
      base.push_back(std::move(in));
    }
  }

  std::vector<TrialInput> inputs;
  if (cfg.measurements.empty()) {
    inputs = base;
  } else {
    for (Index m : cfg.measurements)
      for (const auto& b : base) {
        auto in = b;
        in.m = m;
        inputs.push_back(std::move(in));
      }
  }
  return finish(cfg, run_inputs(cfg, disc, inputs, jobs));
}

namespace {

TrackingRun track_once(const ExperimentConfig& cfg, const ParameterFlow& flow, const VectorXd& y,
                       const AssumptionEstimate& est, std::string name, double delta,
                       unsigned jobs) {
  if (flow.horizon() / delta > kMaxSnapshots)
    throw InvalidConfig("tracking delta " + format_double(delta) + " would need more than " +
                        std::to_string(kMaxSnapshots) + " snapshots");
  const auto disc = discretize(flow, delta);
  const auto A = MeasurementMatrixd::identity(flow.dims().n);
  const auto& tc = cfg.tracking;

  std::vector<OracleResult> oracle(disc.snapshots.size());
  parallel_for(disc.snapshots.size(), jobs, [&](std::size_t t) {
    oracle[t] = brute_force_min(Objectived(disc.snapshots[t], A, y), tc.oracle);
  });

  TrackingRun run;
  run.name = std::move(name);
  run.delta = disc.delta;
  // x_0 by descent from zero on snapshot 0, confirmed against the oracle.
  const Objectived obj0(disc.snapshots.front(), A, y);
  VectorXd x0 = minimize(obj0, VectorXd::Zero(flow.dims().k), cfg.surf.descent).x_final;
  if ((x0 - oracle.front().x_min).norm() > tc.tolerance) {
    x0 = oracle.front().x_min;
    run.x0_from_oracle = true;
  }
  SurfConfig scfg = cfg.surf;
  scfg.tau = tc.tau;
  const auto res = surf_projected(disc, y, A, scfg, x0);
  run.warnings = res.warnings;

  run.tracked = true;
  for (std::size_t t = 0; t < disc.snapshots.size(); ++t) {
    TrackingRow row;
    row.t = t;
    row.s = disc.s_values[t];
    row.distance = (res.x[t] - oracle[t].x_min).norm();
    row.f_surf = res.f[t];
    row.f_oracle = oracle[t].f_min;
    row.slack_size = res.slack_sizes[t];
    row.pieces_examined = res.pieces_examined[t];
    row.near_tie = oracle[t].near_tie;
    run.tracked = run.tracked && row.distance <= tc.tolerance;
    if (t > 0) {
      const double jump = (oracle[t].x_min - oracle[t - 1].x_min).norm();
      const double allowed = est.L_hat > 0.0 ? 10.0 * est.L_hat * disc.delta : tc.tolerance;
      if (jump > allowed) ++run.minimizer_jumps;
    }
    run.rows.push_back(row);
  }
  return run;
}

}  // namespace

TrackingResult run_tracking(const ExperimentConfig& cfg, unsigned jobs) {
  const auto flow = build_flow(cfg.flow);
  const Index k = flow.dims().k;
  if (k > 2) throw OracleIntractable("tracking needs k <= 2, got k = " + std::to_string(k));
  const auto& tc = cfg.tracking;

  VectorXd x_star;
  if (tc.x_star) {
    if (static_cast<Index>(tc.x_star->size()) != k)
      throw InvalidConfig("tracking.x_star must have length " + std::to_string(k));
    x_star = Eigen::Map<const VectorXd>(tc.x_star->data(), k);
  } else if (cfg.flow.kind == "one_unit") {
    x_star = VectorXd::Zero(1);
  } else if (cfg.flow.kind == "crossing") {
    x_star = synthetic::crossing_flow_truth();
  } else {
    x_star = uniform_point(CounterRng::derive_key(cfg.seed, 0, "tracking"), "x_star", k);
  }

  TrackingResult result;
  result.y = evaluate(flow.at(flow.horizon()), x_star);
  const auto A = MeasurementMatrixd::identity(flow.dims().n);
  result.estimate = estimate_assumption(flow, tc.tau, result.y, A, tc.oracle, tc.grid_points);
  const auto& est = result.estimate;

  const double nominal = cfg.delta ? *cfg.delta
                         : est.delta_unbounded() ? flow.horizon()
                                                 : tc.safety * est.delta_bound;
  result.nominal = track_once(cfg, flow, result.y, est, "nominal", std::min(nominal, flow.horizon()), jobs);
  if (!est.delta_unbounded()) {
    const double stress = tc.stress * est.delta_bound;
    if (stress <= flow.horizon())
      result.stress = track_once(cfg, flow, result.y, est, "stress", stress, jobs);
  }
  return result;
}

LandscapeResult run_landscape(const ExperimentConfig& cfg, unsigned jobs) {
  const auto& ls = cfg.landscape;
  LandscapeResult result;
  result.reports.resize(ls.networks);
  for (std::size_t i = 0; i < ls.networks; ++i)
    result.network_seeds.push_back(CounterRng::derive_key(cfg.seed, i, "landscape.net"));
  parallel_for(ls.networks, jobs, [&](std::size_t i) {
    const auto params = init_gaussian(ls.dims, result.network_seeds[i]);
    VectorXd y = VectorXd::Zero(ls.dims.n);
    if (ls.y_norm > 0.0) {
      auto rng = CounterRng::stream(cfg.seed, i, "landscape.y");
      for (Index j = 0; j < y.size(); ++j) y(j) = rng.normal();
      y *= ls.y_norm / y.norm();
    }
    result.reports[i] = verify_descent_direction(
        params, y, MeasurementMatrixd::identity(ls.dims.n), ls.radii, ls.samples,
        CounterRng::derive_key(cfg.seed, i, "landscape.samples"), ls.threshold);
  });
  return result;
}

TrainFlowResult run_train_flow(const ExperimentConfig& cfg) {
  const auto& spec = cfg.flow;
  if (spec.kind != "micro_train") throw InvalidConfig("train-flow needs a micro_train flow spec");
  TrainFlowResult r{micro_train_flow(spec.dims, training_data(spec), spec.train, spec.seed), {}};
  r.metadata.seed = spec.seed;
  r.metadata.train = spec.train;
  r.metadata.losses = r.trained.losses;
  r.metadata.source = spec.data.path.empty()
                          ? "teacher:" + std::to_string(spec.data.teacher_seed)
                          : std::filesystem::path(spec.data.path).filename().string();
  if (r.trained.diverged) warn("micro-training diverged; the snapshot file is truncated");
  return r;
}

ExperimentOutput render(const ExperimentConfig& cfg, const TrialResult& result) {
  ExperimentOutput out;
  std::ostringstream csv;
  write_trials_csv(csv, result.trials);
  out.files.push_back({"trials.csv", csv.str()});
  out.files.push_back({"success.csv", render_success_csv(result.success)});
  out.files.push_back({"errors.csv", render_error_csv(result.errors)});
  out.summary = render_summary_markdown(result.trials, cfg.success_threshold);
  out.files.push_back({"summary.md", out.summary});
  return out;
}

ExperimentOutput render(const TrackingResult& result, const ExperimentConfig& cfg) {
  ExperimentOutput out;
  std::ostringstream csv;
  csv << "run,t,s,delta,distance,f_surf,f_oracle,slack_size,pieces_examined,near_tie\n";
  auto rows = [&](const TrackingRun& run) {
    for (const auto& r : run.rows)
      csv << run.name << ',' << r.t << ',' << format_double(r.s) << ',' << format_double(run.delta)
          << ',' << format_double(r.distance) << ',' << format_double(r.f_surf) << ','
          << format_double(r.f_oracle) << ',' << r.slack_size << ',' << r.pieces_examined << ','
          << (r.near_tie ? 1 : 0) << '\n';
  };
  rows(result.nominal);
  if (result.stress) rows(*result.stress);
  out.files.push_back({"tracking.csv", csv.str()});

  const auto& est = result.estimate;
  nlohmann::json j;
  j["M_hat"] = format_double(est.M_hat);
  j["L_hat"] = format_double(est.L_hat);
  j["delta_bound"] = format_double(est.delta_bound);
  j["tau"] = format_double(cfg.tracking.tau);
  j["tolerance"] = format_double(cfg.tracking.tolerance);
  j["oracle_near_tie"] = est.near_tie;
  auto run_json = [](const TrackingRun& run) {
    double worst = 0.0;
    for (const auto& r : run.rows) worst = std::max(worst, r.distance);
    return nlohmann::json{{"delta", format_double(run.delta)},
                          {"snapshots", run.rows.size()},
                          {"tracked", run.tracked},
                          {"max_distance", format_double(worst)},
                          {"minimizer_jumps", run.minimizer_jumps},
                          {"x0_from_oracle", run.x0_from_oracle},
                          {"warnings", run.warnings}};
  };
  j["nominal"] = run_json(result.nominal);
  if (result.stress) j["stress"] = run_json(*result.stress);
  out.files.push_back({"tracking_summary.json", j.dump(2) + "\n"});

  std::ostringstream s;
  s << "M_hat " << format_double(est.M_hat) << ", L_hat " << format_double(est.L_hat)
    << ", delta bound " << format_double(est.delta_bound) << "\n";
  auto line = [&](const TrackingRun& run) {
    s << run.name << ": delta " << format_double(run.delta) << ", " << run.rows.size()
      << " snapshots, " << (run.tracked ? "tracked" : "NOT tracked") << ", "
      << run.minimizer_jumps << " minimizer jumps\n";
  };
  line(result.nominal);
  if (result.stress) line(*result.stress);
  out.summary = s.str();
  return out;
}

ExperimentOutput render(const LandscapeResult& result, const ExperimentConfig& cfg) {
  ExperimentOutput out;
  std::ostringstream csv, s;
  csv << "network,network_seed,radius,fraction,samples,threshold\n";
  for (std::size_t i = 0; i < result.reports.size(); ++i) {
    const auto& rep = result.reports[i];
    for (std::size_t r = 0; r < rep.radii.size(); ++r)
      csv << i << ',' << result.network_seeds[i] << ',' << format_double(rep.radii[r]) << ','
          << format_double(rep.fractions[r]) << ',' << rep.n_samples << ','
          << format_double(rep.threshold) << '\n';
    s << "network " << i << ": ball estimate "
      << (rep.ball_estimate ? format_double(*rep.ball_estimate) : std::string("none"))
      << " (fraction >= " << format_double(cfg.landscape.threshold) << " from this radius up)\n";
  }
  out.files.push_back({"landscape.csv", csv.str()});
  out.summary = s.str();
  return out;
}

ExperimentOutput run_experiment(const ExperimentConfig& cfg, unsigned jobs) {
  switch (cfg.kind) {
    case ExperimentKind::Recovery: return render(cfg, run_recovery(cfg, jobs));
    case ExperimentKind::CompressedSensing: return render(cfg, run_compressed_sensing(cfg, jobs));
    case ExperimentKind::RateDistortion: return render(cfg, run_rate_distortion(cfg, jobs));
    case ExperimentKind::Tracking: return render(run_tracking(cfg, jobs), cfg);
    case ExperimentKind::Landscape: return render(run_landscape(cfg, jobs), cfg);
    case ExperimentKind::TrainFlow: {
      ExperimentOutput out;
      auto r = run_train_flow(cfg);
      std::ostringstream csv;
      csv << "snapshot,step,loss\n";
      const auto& steps = r.trained.flow.snapshot_steps();
      for (std::size_t t = 0; t < r.trained.losses.size(); ++t)
        csv << t << ',' << steps[t] << ',' << format_double(r.trained.losses[t]) << '\n';
      out.files.push_back({"train_losses.csv", csv.str()});
      out.summary = std::to_string(steps.size()) + " snapshots, final loss " +
                    format_double(r.trained.losses.back()) + "\n";
      out.flow = std::move(r);
      return out;
    }
  }
  throw InvalidConfig("unknown experiment kind");
}

void write_output(const std::filesystem::path& dir, const ExperimentOutput& output) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create output directory '" + dir.string() + "': " + ec.message());
  for (const auto& [name, contents] : output.files) write_text_file(dir / name, contents);
  if (output.flow)
    write_snapshot_file(dir / "flow.bin", output.flow->trained.flow, output.flow->metadata);
}

}  // namespace surfnet::experiments
