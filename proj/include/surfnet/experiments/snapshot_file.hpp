#pragma once

// Binary container for a recorded snapshot sequence, plus a JSON sidecar.
//
// Layout (all integers and floats little-endian):
//   char[8]  magic "SURFNET1"
//   u32      format version (1)
//   u32 k, u32 d, u32 widths[d], u32 n
//   u32      snapshot count (T + 1)
//   u64      cadence
//   u64      training step of each snapshot, T + 1 entries
//   f64      parameters of each snapshot in canonical order: V row-major,
//            then W_i row-major and b_i for i = 1..d
// The sidecar `<file>.json` holds the metadata below.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "surfnet/flow.hpp"

namespace surfnet::experiments {

inline constexpr std::uint32_t kSnapshotVersion = 1;

struct SnapshotMetadata {
  std::uint64_t seed = 0;
  TrainConfig train;
  std::vector<double> losses;
  std::string source;
};

std::filesystem::path sidecar_path(const std::filesystem::path& file);

/// Requires a snapshot-sequence flow.
void write_snapshot_file(const std::filesystem::path& file, const ParameterFlow& flow,
                         const SnapshotMetadata& meta);

ParameterFlow read_snapshot_file(const std::filesystem::path& file);

SnapshotMetadata read_snapshot_metadata(const std::filesystem::path& file);

}  // namespace surfnet::experiments
