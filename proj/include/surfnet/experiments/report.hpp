#pragma once

// Per-trial records, their CSV form, and the summary statistics the runners
// and the `report` subcommand print.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "surfnet/experiments/config.hpp"

namespace surfnet::experiments {

struct TrialReport {
  Method method = Method::Surfing;
  std::size_t trial = 0;
  std::uint64_t seed = 0;
  /// Number of measurements (n when A = I).
  Index m = 0;
  /// ||x_hat - x_*||; NaN when the target has no known preimage.
  double distance = 0.0;
  double f_final = 0.0;
  /// sqrt(||G(x_hat) - y||^2 / n).
  double per_pixel_error = 0.0;
  std::size_t iterations = 0;
  double wall_ms = 0.0;

  friend bool operator==(const TrialReport&, const TrialReport&) = default;
};

inline constexpr const char* kTrialCsvHeader =
    "method,trial,seed,m,distance,f_final,per_pixel_error,iterations,wall_ms";

/// Shortest-round-trip is not required; 17 significant digits always
/// reproduce the double exactly.
std::string format_double(double v);
double parse_double(std::string_view text);

void write_trials_csv(std::ostream& out, const std::vector<TrialReport>& rows);
std::vector<TrialReport> read_trials_csv(std::istream& in);

void write_text_file(const std::filesystem::path& path, const std::string& contents);
std::string read_text_file(const std::filesystem::path& path);

struct Quartiles {
  double min = 0, q1 = 0, median = 0, q3 = 0, max = 0;
};

/// Linear interpolation between order statistics (type 7). Requires a
/// nonempty sample.
Quartiles quartiles(std::vector<double> values);

/// Spearman rank correlation with average ranks for ties. NaN when either
/// side is constant.
double spearman(const std::vector<double>& a, const std::vector<double>& b);

struct SuccessRow {
  Method method;
  Index m;
  std::size_t trials;
  std::size_t successes;
  double rate() const { return trials == 0 ? 0.0 : static_cast<double>(successes) / static_cast<double>(trials); }
};

/// Rows grouped by (method, m) in order of first appearance.
std::vector<SuccessRow> success_table(const std::vector<TrialReport>& rows, double threshold);

struct ErrorRow {
  Method method;
  Index m;
  Quartiles per_pixel;
};

std::vector<ErrorRow> error_table(const std::vector<TrialReport>& rows);

std::string render_success_csv(const std::vector<SuccessRow>& table);
std::string render_error_csv(const std::vector<ErrorRow>& table);
/// Markdown summary of both tables.
std::string render_summary_markdown(const std::vector<TrialReport>& rows, double threshold);

}  // namespace surfnet::experiments
