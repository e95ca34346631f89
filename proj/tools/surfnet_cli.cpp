// Command-line front end: one subcommand per experiment plus `report`.
//
// Exit codes: 0 success, 1 configuration error, 2 runtime error.

#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "surfnet/errors.hpp"
#include "surfnet/experiments/config.hpp"
#include "surfnet/experiments/report.hpp"
#include "surfnet/experiments/runners.hpp"

namespace ex = surfnet::experiments;

namespace {

struct CommonArgs {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::string out = "results";
  unsigned jobs = 1;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required) {
  auto* opt = cmd->add_option("-c,--config", args.config, "experiment config (JSON)");
  if (config_required) opt->required();
  cmd->add_option("-s,--seed", args.seed, "override the config seed");
  cmd->add_option("-o,--out", args.out, "output directory")->capture_default_str();
  cmd->add_option("-j,--jobs", args.jobs, "concurrent trials")->capture_default_str()->check(
      CLI::PositiveNumber);
}

int run_kind(const CommonArgs& args, ex::ExperimentKind kind, bool surf_only) {
  auto cfg = ex::load_config(args.config);
  cfg.kind = kind;
  if (args.seed) cfg.seed = *args.seed;
  if (surf_only) {
    std::vector<ex::Method> methods;
    for (auto m : cfg.methods)
      if (m != ex::Method::Direct) methods.push_back(m);
    cfg.methods = methods.empty() ? std::vector<ex::Method>{ex::Method::Surfing} : methods;
  }
  const auto output = ex::run_experiment(cfg, args.jobs);
  ex::write_output(args.out, output);
  std::cout << output.summary;
  std::cout << "wrote " << args.out << "\n";
  return 0;
}

int run_report(const CommonArgs& args, const std::string& input, std::optional<double> threshold) {
  double thr = 0.01;
  if (!args.config.empty()) thr = ex::load_config(args.config).success_threshold;
  if (threshold) thr = *threshold;
  const std::filesystem::path in =
      input.empty() ? std::filesystem::path(args.out) / "trials.csv" : std::filesystem::path(input);
  std::istringstream text(ex::read_text_file(in));
  const auto rows = ex::read_trials_csv(text);
  ex::ExperimentOutput out;
  out.files.push_back({"success.csv", ex::render_success_csv(ex::success_table(rows, thr))});
  out.files.push_back({"errors.csv", ex::render_error_csv(ex::error_table(rows))});
  out.summary = ex::render_summary_markdown(rows, thr);
  out.files.push_back({"summary.md", out.summary});
  ex::write_output(args.out, out);
  std::cout << out.summary;
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Surfing: descent over a sequence of generative networks"};
  app.require_subcommand(1);

  struct Sub {
    const char* name;
    const char* help;
    ex::ExperimentKind kind;
    bool surf_only;
  };
  const Sub subs[] = {
      {"train-flow", "train a micro generator and write its snapshot file",
       ex::ExperimentKind::TrainFlow, false},
      {"surf", "surfing recovery trials (surfing methods only)", ex::ExperimentKind::Recovery, true},
      {"landscape", "descent-direction check at random initialization",
       ex::ExperimentKind::Landscape, false},
      {"track", "projected surfing against the oracle minimizer path",
       ex::ExperimentKind::Tracking, false},
      {"recover", "recovery success rates, surfing vs direct descent",
       ex::ExperimentKind::Recovery, false},
      {"cs", "compressed-sensing success versus number of measurements",
       ex::ExperimentKind::CompressedSensing, false},
      {"rate-distortion", "per-pixel reconstruction error versus measurements",
       ex::ExperimentKind::RateDistortion, false},
  };

  CommonArgs args;
  const Sub* chosen = nullptr;
  for (const auto& s : subs) {
    auto* cmd = app.add_subcommand(s.name, s.help);
    add_common(cmd, args, true);
    cmd->callback([&chosen, &s] { chosen = &s; });
  }
  std::string report_in;
  std::optional<double> report_threshold;
  auto* report = app.add_subcommand("report", "summarize a trials CSV into tables");
  add_common(report, args, false);
  report->add_option("-i,--in", report_in, "trials CSV (default: <out>/trials.csv)");
  report->add_option("-t,--threshold", report_threshold, "success threshold on ||x - x_*||");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (report->parsed()) return run_report(args, report_in, report_threshold);
    return run_kind(args, chosen->kind, chosen->surf_only);
  } catch (const surfnet::InvalidConfig& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
}
