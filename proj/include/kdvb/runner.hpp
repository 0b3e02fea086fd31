#pragma once
// Configuration ingestion and experiment orchestration for the CLI
// subcommands. Config files are strict JSON: a top-level "kind" selects the
// schema, unknown keys are rejected, and violations are reported with
// JSON-pointer paths. Every run appends one entry to the manifest in the
// output directory; numerical failures keep their partial outputs and map to
// exit code 2, config/usage errors to exit 1.

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "json.hpp"
#include "kdvb/sim.hpp"

namespace kdvb {

// Schema violation; message carries a JSON-pointer path (e.g. "/dt").
class ConfigError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct SimulateJob {
  SimConfig sim;
  double omega_fit = 1000.0;
  std::string kernel_source = "design";  // design | collocation | file
  nlohmann::json resolved;               // config with defaults materialized
};

struct KernelJob {
  double L = 1.0;
  int n = 0;
  double lambda = 1.0;
  std::string method = "design";  // design | collocation
  double omega_fit = 1000.0;
  int exclusion_band = 3;
  nlohmann::json resolved;
};

struct CriticalityJob {
  double L = 0.0;
  double tol = 1e-9;
  nlohmann::json resolved;
};

struct ResidualJob {
  int exclusion_band = 3;
  nlohmann::json resolved;
};

struct SweepJob {
  std::vector<double> Ls;
  std::vector<double> lambdas;
  std::vector<double> amplitudes;
  std::vector<int> ns;
  SimulateJob base;  // L, n, and initial amplitude overridden per run
  nlohmann::json resolved;
};

nlohmann::json load_config_file(const std::string& path);

// Strict per-kind parsers (throw ConfigError with JSON-pointer paths).
SimulateJob parse_simulate(const nlohmann::json& j);
KernelJob parse_kernel(const nlohmann::json& j);
CriticalityJob parse_criticality(const nlohmann::json& j);
ResidualJob parse_residual(const nlohmann::json& j);
SweepJob parse_sweep(const nlohmann::json& j);

// Dispatch on the file's "kind"; returns the kind string after validating
// the matching schema fully.
std::string parse_config_kind(const std::string& path);

struct RunContext {
  std::string out_dir;      // resolved output root (already created)
  std::string config_path;  // empty when the subcommand used direct flags
  std::string kernel_path;  // --kernel flag, where applicable
  int jobs = 1;
};

// Subcommand pipelines; each returns the process exit code
// (0 ok, 1 usage/config error, 2 numerical failure with partial outputs).
int run_simulate(const std::string& config_path, const RunContext& ctx);
int run_kernel(const std::optional<KernelJob>& direct_flags,
               const std::string& config_path, const std::string& out_file,
               const RunContext& ctx);
int run_criticality(std::optional<double> L_flag, std::optional<double> tol_flag,
                    const std::string& config_path, const RunContext& ctx);
int run_residual(const std::string& config_path,
                 const std::string& kernel_path, const RunContext& ctx);
int run_sweep(const std::string& config_path, const RunContext& ctx);

// Output root resolution: --out flag, else KDVB_OUT_DIR, else ".".
std::string resolve_out_dir(const std::string& out_flag);

}  // namespace kdvb
