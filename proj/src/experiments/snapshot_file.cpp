#include "surfnet/experiments/snapshot_file.hpp"

#include <bit>
#include <cstring>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "surfnet/errors.hpp"
#include "surfnet/experiments/report.hpp"

namespace surfnet::experiments {

namespace {

constexpr char kMagic[8] = {'S', 'U', 'R', 'F', 'N', 'E', 'T', '1'};

class Writer {
 public:
  explicit Writer(std::ostream& out) : out_(out) {}

  void u32(std::uint32_t v) { le(v, 4); }
  void u64(std::uint64_t v) { le(v, 8); }
  void f64(double v) { le(std::bit_cast<std::uint64_t>(v), 8); }

 private:
  void le(std::uint64_t v, int bytes) {
    char buf[8];
    for (int i = 0; i < bytes; ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
    out_.write(buf, bytes);
  }
  std::ostream& out_;
};

class Reader {
 public:
  Reader(std::istream& in, std::string name) : in_(in), name_(std::move(name)) {}

  std::uint32_t u32() { return static_cast<std::uint32_t>(le(4)); }
  std::uint64_t u64() { return le(8); }
  double f64() { return std::bit_cast<double>(le(8)); }

 private:
  std::uint64_t le(int bytes) {
    unsigned char buf[8];
    in_.read(reinterpret_cast<char*>(buf), bytes);
    if (in_.gcount() != bytes) throw IoError("'" + name_ + "' is truncated");
    std::uint64_t v = 0;
    for (int i = 0; i < bytes; ++i) v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
    return v;
  }
  std::istream& in_;
  std::string name_;
};

std::uint32_t narrow(Index v, const char* what) {
  if (v < 0 || v > static_cast<Index>(std::numeric_limits<std::uint32_t>::max()))
    throw IoError(std::string(what) + " does not fit the snapshot header");
  return static_cast<std::uint32_t>(v);
}

}  // namespace

std::filesystem::path sidecar_path(const std::filesystem::path& file) {
  auto p = file;
  p += ".json";
  return p;
}

void write_snapshot_file(const std::filesystem::path& file, const ParameterFlow& flow,
                         const SnapshotMetadata& meta) {
  if (flow.kind() != FlowKind::SnapshotSequence)
    throw InvalidConfig("only snapshot sequences can be written to a snapshot file");
  std::ofstream out(file, std::ios::binary);
  if (!out) throw IoError("cannot write '" + file.string() + "'");
  Writer w(out);
  out.write(kMagic, sizeof kMagic);
  w.u32(kSnapshotVersion);
  const auto& dims = flow.dims();
  w.u32(narrow(dims.k, "k"));
  w.u32(narrow(dims.depth(), "depth"));
  for (Index width : dims.widths) w.u32(narrow(width, "width"));
  w.u32(narrow(dims.n, "n"));
  const auto& thetas = flow.snapshot_params();
  w.u32(narrow(static_cast<Index>(thetas.size()), "snapshot count"));
  w.u64(flow.cadence());
  for (auto step : flow.snapshot_steps()) w.u64(step);
  for (const auto& theta : thetas)
    for_each_parameter(theta, [&](double v) { w.f64(v); });
  if (!out) throw IoError("write failed for '" + file.string() + "'");

  nlohmann::json j;
  j["format"] = "SURFNET1";
  j["version"] = kSnapshotVersion;
  j["dims"] = {{"k", dims.k}, {"widths", dims.widths}, {"n", dims.n}};
  j["snapshots"] = thetas.size();
  j["cadence"] = flow.cadence();
  j["steps"] = flow.snapshot_steps();
  j["seed"] = meta.seed;
  j["train"] = {{"learning_rate", meta.train.learning_rate},
                {"steps", meta.train.steps},
                {"cadence", meta.train.cadence},
                {"batch_size", meta.train.batch_size}};
  std::vector<std::string> losses;
  for (double l : meta.losses) losses.push_back(format_double(l));
  j["losses"] = losses;
  j["source"] = meta.source;
  write_text_file(sidecar_path(file), j.dump(2) + "\n");
}

ParameterFlow read_snapshot_file(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw IoError("cannot read snapshot file '" + file.string() + "'");
  char magic[8];
  in.read(magic, sizeof magic);
  if (in.gcount() != 8 || std::memcmp(magic, kMagic, 8) != 0)
    throw IoError("'" + file.string() + "' is not a SURFNET1 snapshot file");
  Reader r(in, file.string());
  const auto version = r.u32();
  if (version != kSnapshotVersion)
    throw IoError("'" + file.string() + "' has unsupported version " + std::to_string(version));
  NetworkDims dims;
  dims.k = r.u32();
  const auto d = r.u32();
  if (d == 0 || d > 1024) throw IoError("'" + file.string() + "' has a bad depth");
  for (std::uint32_t i = 0; i < d; ++i) dims.widths.push_back(r.u32());
  dims.n = r.u32();
  try {
    dims.validate();
  } catch (const InvalidConfig& e) {
    throw IoError("'" + file.string() + "': " + e.what());
  }
  const auto count = r.u32();
  if (count == 0) throw IoError("'" + file.string() + "' holds no snapshots");
  const auto cadence = r.u64();
  std::vector<std::uint64_t> steps(count);
  for (auto& s : steps) s = r.u64();
  std::vector<NetworkParamsd> thetas;
  thetas.reserve(count);
  for (std::uint32_t t = 0; t < count; ++t) {
    auto theta = NetworkParamsd::zeros(dims);
    for_each_parameter(theta, [&](double& v) { v = r.f64(); });
    thetas.push_back(std::move(theta));
  }
  try {
    return ParameterFlow::snapshots(std::move(thetas), std::move(steps), cadence);
  } catch (const Error& e) {
    throw IoError("'" + file.string() + "': " + e.what());
  }
}

SnapshotMetadata read_snapshot_metadata(const std::filesystem::path& file) {
  const auto path = sidecar_path(file);
  SnapshotMetadata meta;
  try {
    const auto j = nlohmann::json::parse(read_text_file(path));
    meta.seed = j.at("seed").get<std::uint64_t>();
    const auto& t = j.at("train");
    meta.train.learning_rate = t.at("learning_rate").get<double>();
    meta.train.steps = t.at("steps").get<std::uint64_t>();
    meta.train.cadence = t.at("cadence").get<std::uint64_t>();
    meta.train.batch_size = t.at("batch_size").get<std::size_t>();
    for (const auto& l : j.at("losses")) meta.losses.push_back(parse_double(l.get<std::string>()));
    meta.source = j.at("source").get<std::string>();
  } catch (const nlohmann::json::exception& e) {
    throw IoError("malformed sidecar '" + path.string() + "': " + e.what());
  }
  return meta;
}

}  // namespace surfnet::experiments
