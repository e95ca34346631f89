#include "surfnet/experiments/config.hpp"

#include <algorithm>
#include <fstream>
#include <initializer_list>
#include <sstream>

#include <json.hpp>

#include "surfnet/errors.hpp"

namespace surfnet::experiments {

using json = nlohmann::json;

std::string_view to_string(ExperimentKind kind) {
  switch (kind) {
    case ExperimentKind::Recovery: return "recovery";
    case ExperimentKind::CompressedSensing: return "compressed_sensing";
    case ExperimentKind::RateDistortion: return "rate_distortion";
    case ExperimentKind::Landscape: return "landscape";
    case ExperimentKind::Tracking: return "tracking";
    case ExperimentKind::TrainFlow: return "train_flow";
  }
  return "unknown";
}

std::string_view to_string(Method method) {
  switch (method) {
    case Method::Surfing: return "surf";
    case Method::SurfingProjected: return "surf_projected";
    case Method::Direct: return "direct";
  }
  return "unknown";
}

Method parse_method(std::string_view name) {
  if (name == "surf") return Method::Surfing;
  if (name == "surf_projected") return Method::SurfingProjected;
  if (name == "direct") return Method::Direct;
  throw InvalidConfig("unknown method '" + std::string(name) + "'");
}

namespace {

ExperimentKind parse_kind(const std::string& name) {
  for (auto k : {ExperimentKind::Recovery, ExperimentKind::CompressedSensing,
                 ExperimentKind::RateDistortion, ExperimentKind::Landscape,
                 ExperimentKind::Tracking, ExperimentKind::TrainFlow})
    if (to_string(k) == name) return k;
  throw InvalidConfig("unknown experiment '" + name + "'");
}

void check_keys(const json& j, const std::string& where,
                std::initializer_list<std::string_view> allowed) {
  if (!j.is_object()) throw InvalidConfig(where + " must be an object");
  for (const auto& [key, value] : j.items()) {
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end())
      throw InvalidConfig("unknown key '" + key + "' in " + where);
  }
}

template <typename T>
void read(const json& j, const char* key, T& out) {
  if (j.contains(key)) out = j.at(key).get<T>();
}

NetworkDims parse_dims(const json& j, const std::string& where) {
  check_keys(j, where, {"k", "widths", "n"});
  NetworkDims dims;
  dims.k = j.at("k").get<Index>();
  dims.widths = j.at("widths").get<std::vector<Index>>();
  dims.n = j.at("n").get<Index>();
  dims.validate();
  return dims;
}

std::string resolve(const std::string& path, const std::filesystem::path& base) {
  if (path.empty()) return path;
  const std::filesystem::path p(path);
  return p.is_absolute() || base.empty() ? path : (base / p).string();
}

DescentConfig parse_descent(const json& j, const std::string& where, DescentConfig cfg) {
  check_keys(j, where,
             {"optimizer", "step_size", "max_iters", "grad_tol", "step_tol", "backtracking",
              "beta1", "beta2", "eps"});
  if (j.contains("optimizer")) {
    const auto name = j.at("optimizer").get<std::string>();
    if (name == "gd") {
      cfg = DescentConfig::gradient_descent(0.5);
    } else if (name == "adam") {
      cfg = DescentConfig::adam_optimizer(0.01);
    } else {
      throw InvalidConfig("unknown optimizer '" + name + "' in " + where);
    }
  }
  read(j, "step_size", cfg.step_size);
  read(j, "max_iters", cfg.max_iters);
  if (j.contains("grad_tol")) cfg.grad_tol = j.at("grad_tol").get<double>();
  read(j, "step_tol", cfg.step_tol);
  read(j, "backtracking", cfg.backtracking);
  read(j, "beta1", cfg.adam.beta1);
  read(j, "beta2", cfg.adam.beta2);
  read(j, "eps", cfg.adam.eps);
  cfg.validate();
  return cfg;
}

FlowSpec parse_flow(const json& j, const std::filesystem::path& base) {
  check_keys(j, "flow", {"kind", "dims", "seed", "seed_end", "c", "a_final", "path", "train", "data"});
  FlowSpec f;
  read(j, "kind", f.kind);
  static const std::vector<std::string> kinds{"one_unit", "deceptive", "crossing",
                                              "gaussian_interpolation", "constant",
                                              "micro_train", "snapshot_file"};
  if (std::find(kinds.begin(), kinds.end(), f.kind) == kinds.end())
    throw InvalidConfig("unknown flow kind '" + f.kind + "'");
  if (j.contains("dims")) f.dims = parse_dims(j.at("dims"), "flow.dims");
  read(j, "seed", f.seed);
  read(j, "seed_end", f.seed_end);
  read(j, "c", f.c);
  read(j, "a_final", f.a_final);
  if (j.contains("path")) f.path = resolve(j.at("path").get<std::string>(), base);
  if (j.contains("train")) {
    const auto& t = j.at("train");
    check_keys(t, "flow.train", {"learning_rate", "steps", "cadence", "batch_size"});
    read(t, "learning_rate", f.train.learning_rate);
    read(t, "steps", f.train.steps);
    read(t, "cadence", f.train.cadence);
    read(t, "batch_size", f.train.batch_size);
  }
  if (j.contains("data")) {
    const auto& d = j.at("data");
    check_keys(d, "flow.data", {"path", "count", "teacher_seed"});
    if (d.contains("path")) f.data.path = resolve(d.at("path").get<std::string>(), base);
    read(d, "count", f.data.count);
    read(d, "teacher_seed", f.data.teacher_seed);
  }
  if (f.kind == "snapshot_file" && f.path.empty())
    throw InvalidConfig("flow kind snapshot_file needs a path");
  if (f.kind == "micro_train" && f.train.cadence == 0)
    throw InvalidConfig("flow.train.cadence must be >= 1");
  return f;
}

void parse_surf(const json& j, SurfConfig& s) {
  check_keys(j, "surf", {"descent", "tau", "init", "init_box", "slack_budget"});
  if (j.contains("descent")) s.descent = parse_descent(j.at("descent"), "surf.descent", s.descent);
  read(j, "tau", s.tau);
  if (j.contains("init")) {
    const auto name = j.at("init").get<std::string>();
    if (name == "zero") {
      s.init = InitPolicy::Zero;
    } else if (name == "uniform") {
      s.init = InitPolicy::Uniform;
    } else {
      throw InvalidConfig("unknown init policy '" + name + "'");
    }
  }
  read(j, "init_box", s.init_box);
  read(j, "slack_budget", s.pieces.slack_budget);
}

void parse_oracle(const json& j, OracleConfig& o) {
  check_keys(j, "tracking.oracle", {"box", "resolution", "max_grid_points", "polish_count"});
  read(j, "box", o.box);
  read(j, "resolution", o.resolution);
  read(j, "max_grid_points", o.max_grid_points);
  read(j, "polish_count", o.polish_count);
}

}  // namespace

void ExperimentConfig::validate() const {
  if (version != kConfigVersion)
    throw InvalidConfig("unsupported config version " + std::to_string(version));
  if (trials < 1) throw InvalidConfig("trials must be >= 1");
  if (!(success_threshold > 0.0)) throw InvalidConfig("success_threshold must be > 0");
  if (delta && !(*delta > 0.0)) throw InvalidConfig("delta must be > 0");
  if (direct_restarts < 1) throw InvalidConfig("direct.restarts must be >= 1");
  if (methods.empty()) throw InvalidConfig("at least one method is required");
  for (Index m : measurements)
    if (m < 1) throw InvalidConfig("measurement counts must be >= 1");
  if (!(surf.init_box > 0.0)) throw InvalidConfig("surf.init_box must be > 0");
  surf.descent.validate();
  direct.validate();
  if (!(tracking.tau > 0.0) || !(tracking.safety > 0.0) || !(tracking.stress > 0.0) ||
      !(tracking.tolerance > 0.0))
    throw InvalidConfig("tracking parameters must be > 0");
  if (landscape.samples < 1 || landscape.networks < 1 || landscape.radii.empty())
    throw InvalidConfig("landscape needs radii, samples >= 1 and networks >= 1");
  if (!(landscape.threshold > 0.0) || landscape.threshold > 1.0)
    throw InvalidConfig("landscape.threshold must lie in (0, 1]");
  if (targets.rho < 0.0) throw InvalidConfig("targets.rho must be >= 0");
}

ExperimentConfig parse_config(const std::string& json_text, const std::filesystem::path& base_dir) {
  json j;
  try {
    j = json::parse(json_text);
  } catch (const json::parse_error& e) {
    throw InvalidConfig(std::string("config is not valid JSON: ") + e.what());
  }
  ExperimentConfig cfg;
  try {
    check_keys(j, "config",
               {"version", "experiment", "seed", "trials", "flow", "delta", "methods", "surf",
                "direct", "success_threshold", "measurements", "targets", "landscape",
                "tracking", "record_timing"});
    if (!j.contains("version")) throw InvalidConfig("config needs \"version\": 1");
    cfg.version = j.at("version").get<int>();
    if (j.contains("experiment")) cfg.kind = parse_kind(j.at("experiment").get<std::string>());
    read(j, "seed", cfg.seed);
    read(j, "trials", cfg.trials);
    if (j.contains("flow")) cfg.flow = parse_flow(j.at("flow"), base_dir);
    if (j.contains("delta")) cfg.delta = j.at("delta").get<double>();
    if (j.contains("methods")) {
      cfg.methods.clear();
      for (const auto& m : j.at("methods")) cfg.methods.push_back(parse_method(m.get<std::string>()));
    }
    if (j.contains("surf")) parse_surf(j.at("surf"), cfg.surf);
    if (j.contains("direct")) {
      json d = j.at("direct");
      if (d.contains("restarts")) {
        cfg.direct_restarts = d.at("restarts").get<std::size_t>();
        d.erase("restarts");
      }
      cfg.direct = parse_descent(d, "direct", cfg.direct);
    }
    read(j, "success_threshold", cfg.success_threshold);
    read(j, "measurements", cfg.measurements);
    if (j.contains("targets")) {
      const auto& t = j.at("targets");
      check_keys(t, "targets", {"path", "rho"});
      if (t.contains("path")) cfg.targets.path = resolve(t.at("path").get<std::string>(), base_dir);
      read(t, "rho", cfg.targets.rho);
    }
    if (j.contains("landscape")) {
      const auto& l = j.at("landscape");
      check_keys(l, "landscape", {"dims", "radii", "samples", "networks", "y_norm", "threshold"});
      if (l.contains("dims")) cfg.landscape.dims = parse_dims(l.at("dims"), "landscape.dims");
      read(l, "radii", cfg.landscape.radii);
      read(l, "samples", cfg.landscape.samples);
      read(l, "networks", cfg.landscape.networks);
      read(l, "y_norm", cfg.landscape.y_norm);
      read(l, "threshold", cfg.landscape.threshold);
    }
    if (j.contains("tracking")) {
      const auto& t = j.at("tracking");
      check_keys(t, "tracking",
                 {"tau", "safety", "stress", "tolerance", "grid_points", "oracle", "x_star"});
      read(t, "tau", cfg.tracking.tau);
      read(t, "safety", cfg.tracking.safety);
      read(t, "stress", cfg.tracking.stress);
      read(t, "tolerance", cfg.tracking.tolerance);
      read(t, "grid_points", cfg.tracking.grid_points);
      if (t.contains("oracle")) parse_oracle(t.at("oracle"), cfg.tracking.oracle);
      if (t.contains("x_star")) cfg.tracking.x_star = t.at("x_star").get<std::vector<double>>();
    }
    read(j, "record_timing", cfg.record_timing);
  } catch (const json::exception& e) {
    throw InvalidConfig(std::string("bad config value: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw InvalidConfig("cannot open config file '" + path.string() + "'");
  std::ostringstream text;
  text << in.rdbuf();
  try {
    return parse_config(text.str(), path.parent_path());
  } catch (const InvalidConfig& e) {
    throw InvalidConfig(path.string() + ": " + e.what());
  }
}

}  // namespace surfnet::experiments
