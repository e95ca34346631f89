#include "surfnet/experiments/report.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <istream>
#include <limits>
#include <numeric>
#include <ostream>
#include <sstream>

#include "surfnet/errors.hpp"

namespace surfnet::experiments {

std::string format_double(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

double parse_double(std::string_view text) {
  if (text == "nan") return std::numeric_limits<double>::quiet_NaN();
  if (text == "inf") return std::numeric_limits<double>::infinity();
  if (text == "-inf") return -std::numeric_limits<double>::infinity();
  double v = 0.0;
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw IoError("malformed number '" + std::string(text) + "'");
  return v;
}

namespace {

template <typename T>
T parse_integer(std::string_view text) {
  T v{};
  const auto res = std::from_chars(text.data(), text.data() + text.size(), v);
  if (res.ec != std::errc() || res.ptr != text.data() + text.size())
    throw IoError("malformed integer '" + std::string(text) + "'");
  return v;
}

std::vector<std::string_view> split(std::string_view line, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = line.find(sep, start);
    out.push_back(line.substr(start, pos - start));
    if (pos == std::string_view::npos) break;
    start = pos + 1;
  }
  return out;
}

}  // namespace

void write_trials_csv(std::ostream& out, const std::vector<TrialReport>& rows) {
  out << kTrialCsvHeader << '\n';
  for (const auto& r : rows) {
    out << to_string(r.method) << ',' << r.trial << ',' << r.seed << ',' << r.m << ','
        << format_double(r.distance) << ',' << format_double(r.f_final) << ','
        << format_double(r.per_pixel_error) << ',' << r.iterations << ','
        << format_double(r.wall_ms) << '\n';
  }
}

std::vector<TrialReport> read_trials_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kTrialCsvHeader)
    throw IoError("trial CSV must start with the header '" + std::string(kTrialCsvHeader) + "'");
  std::vector<TrialReport> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split(line, ',');
    if (f.size() != 9) throw IoError("trial CSV line " + std::to_string(lineno) + " has " +
                                     std::to_string(f.size()) + " fields, expected 9");
    TrialReport r;
    try {
      r.method = parse_method(f[0]);
    } catch (const InvalidConfig& e) {
      throw IoError("trial CSV line " + std::to_string(lineno) + ": " + e.what());
    }
    r.trial = parse_integer<std::size_t>(f[1]);
    r.seed = parse_integer<std::uint64_t>(f[2]);
    r.m = parse_integer<Index>(f[3]);
    r.distance = parse_double(f[4]);
    r.f_final = parse_double(f[5]);
    r.per_pixel_error = parse_double(f[6]);
    r.iterations = parse_integer<std::size_t>(f[7]);
    r.wall_ms = parse_double(f[8]);
    rows.push_back(r);
  }
  return rows;
}

void write_text_file(const std::filesystem::path& path, const std::string& contents) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  out << contents;
  if (!out) throw IoError("write failed for '" + path.string() + "'");
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read '" + path.string() + "'");
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

Quartiles quartiles(std::vector<double> values) {
  if (values.empty()) throw InvalidConfig("quartiles of an empty sample");
  std::sort(values.begin(), values.end());
  auto at = [&](double q) {
    const double pos = q * static_cast<double>(values.size() - 1);
    const auto lo = static_cast<std::size_t>(std::floor(pos));
    const auto hi = std::min(lo + 1, values.size() - 1);
    return values[lo] + (pos - static_cast<double>(lo)) * (values[hi] - values[lo]);
  };
  return {values.front(), at(0.25), at(0.5), at(0.75), values.back()};
}

namespace {

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> order(v.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](auto a, auto b) { return v[a] < v[b]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j + 1 < order.size() && v[order[j + 1]] == v[order[i]]) ++j;
    const double r = 0.5 * static_cast<double>(i + j) + 1.0;
    for (std::size_t t = i; t <= j; ++t) ranks[order[t]] = r;
    i = j + 1;
  }
  return ranks;
}

}  // namespace

double spearman(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) throw DimensionMismatch("spearman needs equal-length samples");
  const auto ra = average_ranks(a), rb = average_ranks(b);
  const double n = static_cast<double>(a.size());
  const double ma = std::accumulate(ra.begin(), ra.end(), 0.0) / n;
  const double mb = std::accumulate(rb.begin(), rb.end(), 0.0) / n;
  double sab = 0, saa = 0, sbb = 0;
  for (std::size_t i = 0; i < ra.size(); ++i) {
    sab += (ra[i] - ma) * (rb[i] - mb);
    saa += (ra[i] - ma) * (ra[i] - ma);
    sbb += (rb[i] - mb) * (rb[i] - mb);
  }
  if (saa == 0.0 || sbb == 0.0) return std::numeric_limits<double>::quiet_NaN();
  return sab / std::sqrt(saa * sbb);
}

std::vector<SuccessRow> success_table(const std::vector<TrialReport>& rows, double threshold) {
  std::vector<SuccessRow> table;
  for (const auto& r : rows) {
    auto it = std::find_if(table.begin(), table.end(),
                           [&](const SuccessRow& s) { return s.method == r.method && s.m == r.m; });
    if (it == table.end()) {
      table.push_back({r.method, r.m, 0, 0});
      it = table.end() - 1;
    }
    ++it->trials;
    if (r.distance < threshold) ++it->successes;
  }
  return table;
}

std::vector<ErrorRow> error_table(const std::vector<TrialReport>& rows) {
  std::vector<std::pair<std::pair<Method, Index>, std::vector<double>>> groups;
  for (const auto& r : rows) {
    auto it = std::find_if(groups.begin(), groups.end(), [&](const auto& g) {
      return g.first.first == r.method && g.first.second == r.m;
    });
    if (it == groups.end()) {
      groups.push_back({{r.method, r.m}, {}});
      it = groups.end() - 1;
    }
    it->second.push_back(r.per_pixel_error);
  }
  std::vector<ErrorRow> table;
  for (auto& [key, values] : groups) table.push_back({key.first, key.second, quartiles(values)});
  return table;
}

std::string render_success_csv(const std::vector<SuccessRow>& table) {
  std::ostringstream out;
  out << "method,m,trials,successes,success_rate\n";
  for (const auto& s : table)
    out << to_string(s.method) << ',' << s.m << ',' << s.trials << ',' << s.successes << ','
        << format_double(s.rate()) << '\n';
  return out.str();
}

std::string render_error_csv(const std::vector<ErrorRow>& table) {
  std::ostringstream out;
  out << "method,m,min,q1,median,q3,max\n";
  for (const auto& e : table) {
    const auto& q = e.per_pixel;
    out << to_string(e.method) << ',' << e.m << ',' << format_double(q.min) << ','
        << format_double(q.q1) << ',' << format_double(q.median) << ',' << format_double(q.q3)
        << ',' << format_double(q.max) << '\n';
  }
  return out.str();
}

std::string render_summary_markdown(const std::vector<TrialReport>& rows, double threshold) {
  std::ostringstream out;
  char buf[160];
  out << "| method | m | trials | success (%) |\n|---|---:|---:|---:|\n";
  for (const auto& s : success_table(rows, threshold)) {
    std::snprintf(buf, sizeof buf, "| %s | %ld | %zu | %.1f |\n",
                  std::string(to_string(s.method)).c_str(), static_cast<long>(s.m), s.trials,
                  100.0 * s.rate());
    out << buf;
  }
  out << "\n| method | m | min | q1 | median | q3 | max |\n|---|---:|---:|---:|---:|---:|---:|\n";
  for (const auto& e : error_table(rows)) {
    const auto& q = e.per_pixel;
    std::snprintf(buf, sizeof buf, "| %s | %ld | %.3g | %.3g | %.3g | %.3g | %.3g |\n",
                  std::string(to_string(e.method)).c_str(), static_cast<long>(e.m), q.min, q.q1,
                  q.median, q.q3, q.max);
    out << buf;
  }
  return out.str();
}

}  // namespace surfnet::experiments
