#pragma once
// File formats: kernel JSON (row-major arrays plus grid metadata), trajectory
// CSV (fixed header, full round-trip double formatting, no timestamps), and
// the append-only run manifest.

#include <cstdint>
#include <string>
#include <vector>

#include "json.hpp"
#include "kdvb/kernel.hpp"
#include "kdvb/sim.hpp"

namespace kdvb {

inline constexpr const char* kVersionString = "kdvb 0.1.0";

// Shortest round-trip decimal representation ("%.17g").
std::string format_double(double v);

void write_kernel_json(const std::string& path, const KernelPair& kp);
KernelPair read_kernel_json(const std::string& path);

// Header exactly: t,E,f,g,x0_norm,target_norm. One row per recorded step;
// the target_norm field is left empty for open-loop trajectories.
void write_trajectory_csv(const std::string& path, const Trajectory& traj);

// FNV-1a 64-bit content hashes (hex strings) for manifest provenance.
std::uint64_t fnv1a(const std::string& bytes);
std::string file_hash_hex(const std::string& path);  // throws if unreadable

struct ManifestEntry {
  std::string subcommand;
  nlohmann::json resolved_config;
  std::vector<std::pair<std::string, std::string>> input_hashes;  // path, hex
  std::vector<std::string> output_paths;
  std::int64_t duration_ms = 0;
  std::vector<std::string> warnings;
  std::string status = "ok";  // or a stop reason on failure paths
};

// Appends one entry to the JSON array at `path` (created if absent; existing
// entries are never modified).
void append_manifest(const std::string& path, const ManifestEntry& entry);

}  // namespace kdvb
