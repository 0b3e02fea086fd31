#include "kdvb/runner.hpp"

#include <algorithm>
#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <mutex>
#include <set>
#include <thread>
#include <tuple>

#include "kdvb/critical.hpp"
#include "kdvb/design.hpp"
#include "kdvb/diagnostics.hpp"
#include "kdvb/io.hpp"
#include "kdvb/transform.hpp"

namespace kdvb {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;
using Clock = std::chrono::steady_clock;

std::int64_t ms_since(Clock::time_point t0) {
  return std::chrono::duration_cast<std::chrono::milliseconds>(Clock::now() -
                                                               t0)
      .count();
}

// ---------------------------------------------------------------- schema

void check_keys(const json& j, const std::set<std::string>& allowed,
                const std::string& prefix) {
  for (const auto& item : j.items()) {
    if (allowed.find(item.key()) == allowed.end()) {
      throw ConfigError("unknown key " + prefix + "/" + item.key());
    }
  }
}

const json& need(const json& j, const char* key, const std::string& prefix) {
  if (!j.is_object() || !j.contains(key)) {
    throw ConfigError("missing required key " + prefix + "/" + key);
  }
  return j.at(key);
}

double need_number(const json& j, const char* key, const std::string& prefix) {
  const json& v = need(j, key, prefix);
  if (!v.is_number()) {
    throw ConfigError("key " + prefix + "/" + key + " must be a number");
  }
  return v.get<double>();
}

double opt_number(const json& j, const char* key, double dflt,
                  const std::string& prefix) {
  if (!j.contains(key)) {
    return dflt;
  }
  if (!j.at(key).is_number()) {
    throw ConfigError("key " + prefix + "/" + key + " must be a number");
  }
  return j.at(key).get<double>();
}

int need_int(const json& j, const char* key, const std::string& prefix) {
  const json& v = need(j, key, prefix);
  if (!v.is_number_integer()) {
    throw ConfigError("key " + prefix + "/" + key + " must be an integer");
  }
  return v.get<int>();
}

int opt_int(const json& j, const char* key, int dflt,
            const std::string& prefix) {
  if (!j.contains(key)) {
    return dflt;
  }
  if (!j.at(key).is_number_integer()) {
    throw ConfigError("key " + prefix + "/" + key + " must be an integer");
  }
  return j.at(key).get<int>();
}

bool opt_bool(const json& j, const char* key, bool dflt,
              const std::string& prefix) {
  if (!j.contains(key)) {
    return dflt;
  }
  if (!j.at(key).is_boolean()) {
    throw ConfigError("key " + prefix + "/" + key + " must be a boolean");
  }
  return j.at(key).get<bool>();
}

std::string need_enum(const json& j, const char* key,
                      const std::vector<std::string>& values,
                      const std::string& prefix) {
  const json& v = need(j, key, prefix);
  if (!v.is_string()) {
    throw ConfigError("key " + prefix + "/" + key + " must be a string");
  }
  const std::string s = v.get<std::string>();
  for (const std::string& ok : values) {
    if (s == ok) {
      return s;
    }
  }
  std::string opts;
  for (const std::string& ok : values) {
    opts += (opts.empty() ? "" : ", ") + ok;
  }
  throw ConfigError("key " + prefix + "/" + key + " must be one of {" + opts +
                    "}, got \"" + s + "\"");
}

std::string opt_enum(const json& j, const char* key, const std::string& dflt,
                     const std::vector<std::string>& values,
                     const std::string& prefix) {
  if (!j.contains(key)) {
    return dflt;
  }
  return need_enum(j, key, values, prefix);
}

InitialField parse_field(const json& j, const std::string& prefix) {
  const std::string kind = need_enum(
      j, "kind", {"sine_mode", "gaussian", "explicit", "zero"}, prefix);
  InitialField f;
  if (kind == "sine_mode") {
    check_keys(j, {"kind", "m", "amplitude"}, prefix);
    f.kind = InitialField::Kind::sine_mode;
    f.mode = need_int(j, "m", prefix);
    if (f.mode < 1) {
      throw ConfigError("key " + prefix + "/m must be >= 1");
    }
    f.amplitude = need_number(j, "amplitude", prefix);
  } else if (kind == "gaussian") {
    check_keys(j, {"kind", "center", "width", "amplitude"}, prefix);
    f.kind = InitialField::Kind::gaussian;
    f.center = need_number(j, "center", prefix);
    f.width = need_number(j, "width", prefix);
    if (!(f.width > 0.0)) {
      throw ConfigError("key " + prefix + "/width must be positive");
    }
    f.amplitude = need_number(j, "amplitude", prefix);
  } else if (kind == "explicit") {
    check_keys(j, {"kind", "values"}, prefix);
    const json& v = need(j, "values", prefix);
    if (!v.is_array()) {
      throw ConfigError("key " + prefix + "/values must be an array");
    }
    f.kind = InitialField::Kind::explicit_values;
    for (const json& x : v) {
      if (!x.is_number()) {
        throw ConfigError("key " + prefix + "/values must contain numbers");
      }
      f.values.push_back(x.get<double>());
    }
  } else {
    check_keys(j, {"kind"}, prefix);
    f.kind = InitialField::Kind::zero;
  }
  return f;
}

InitialData parse_initial(const json& j, const std::string& prefix) {
  if (!j.is_object()) {
    throw ConfigError("key " + prefix + " must be an object");
  }
  InitialData d;
  if (j.contains("eta") || j.contains("w")) {
    check_keys(j, {"eta", "w"}, prefix);
    d.eta = parse_field(need(j, "eta", prefix), prefix + "/eta");
    d.w = parse_field(need(j, "w", prefix), prefix + "/w");
  } else {
    // flat form: the same field descriptor applies to both components
    d.eta = parse_field(j, prefix);
    d.w = d.eta;
  }
  return d;
}

json field_to_json(const InitialField& f) {
  json j;
  switch (f.kind) {
    case InitialField::Kind::sine_mode:
      j["kind"] = "sine_mode";
      j["m"] = f.mode;
      j["amplitude"] = f.amplitude;
      break;
    case InitialField::Kind::gaussian:
      j["kind"] = "gaussian";
      j["center"] = f.center;
      j["width"] = f.width;
      j["amplitude"] = f.amplitude;
      break;
    case InitialField::Kind::explicit_values:
      j["kind"] = "explicit";
      j["values"] = f.values;
      break;
    case InitialField::Kind::zero:
      j["kind"] = "zero";
      break;
  }
  return j;
}

void require_kind(const json& j, const std::string& expected) {
  const std::string kind =
      need_enum(j, "kind", {"simulate", "kernel", "criticality", "sweep",
                            "residual"},
                "");
  if (kind != expected) {
    throw ConfigError("key /kind is \"" + kind + "\" but this subcommand needs \"" +
                      expected + "\"");
  }
}

// Shared core of parse_simulate / parse_sweep base fields. `sweep` relaxes
// L, n (arrays) and forbids snapshots.
void parse_sim_common(const json& j, SimulateJob& job,
                      const std::string& prefix) {
  job.sim.dt = need_number(j, "dt", prefix);
  if (!(job.sim.dt > 0.0)) {
    throw ConfigError("key " + prefix + "/dt must be positive");
  }
  job.sim.T = need_number(j, "T", prefix);
  if (!(job.sim.T >= job.sim.dt)) {
    throw ConfigError("key " + prefix + "/T must be >= dt");
  }
  const std::string dyn =
      need_enum(j, "dynamics", {"linear", "nonlinear"}, prefix);
  job.sim.dynamics = dyn == "linear" ? Dynamics::linear : Dynamics::nonlinear;
  const std::string ctl = need_enum(j, "control", {"open", "closed"}, prefix);
  job.sim.control =
      ctl == "open" ? Control::open_loop : Control::closed_loop;
  const std::string bc =
      need_enum(j, "bc_variant", {"controlled", "homogeneous"}, prefix);
  job.sim.bc =
      bc == "controlled" ? BcVariant::controlled : BcVariant::homogeneous;
  job.sim.lambda = opt_number(j, "lambda", 1.0, prefix);
  if (job.sim.control == Control::closed_loop && !(job.sim.lambda > 0.0)) {
    throw ConfigError("key " + prefix +
                      "/lambda must be positive in closed loop");
  }
  job.sim.record_every = opt_int(j, "record_every", 1, prefix);
  if (job.sim.record_every < 1) {
    throw ConfigError("key " + prefix + "/record_every must be >= 1");
  }
  const std::string cpl = opt_enum(j, "feedback_coupling", "implicit",
                                   {"implicit", "lagged"}, prefix);
  job.sim.coupling = cpl == "implicit" ? FeedbackCoupling::implicit_rows
                                       : FeedbackCoupling::lagged_explicit;
  job.kernel_source = opt_enum(j, "kernel_source", "design",
                               {"design", "collocation", "file"}, prefix);
  job.omega_fit = opt_number(j, "omega_fit", 1000.0, prefix);
  if (!(job.omega_fit > 0.0)) {
    throw ConfigError("key " + prefix + "/omega_fit must be positive");
  }
  job.sim.init = parse_initial(need(j, "initial", prefix), prefix + "/initial");
}

json resolved_sim_json(const SimulateJob& job, const std::string& kind) {
  json r;
  r["kind"] = kind;
  r["L"] = job.sim.L;
  r["n"] = job.sim.n;
  r["dt"] = job.sim.dt;
  r["T"] = job.sim.T;
  r["lambda"] = job.sim.lambda;
  r["dynamics"] = job.sim.dynamics == Dynamics::linear ? "linear" : "nonlinear";
  r["control"] =
      job.sim.control == Control::open_loop ? "open" : "closed";
  r["bc_variant"] =
      job.sim.bc == BcVariant::controlled ? "controlled" : "homogeneous";
  r["record_every"] = job.sim.record_every;
  r["snapshots"] = job.sim.keep_snapshots;
  r["feedback_coupling"] =
      job.sim.coupling == FeedbackCoupling::implicit_rows ? "implicit"
                                                          : "lagged";
  r["kernel_source"] = job.kernel_source;
  r["omega_fit"] = job.omega_fit;
  json init;
  init["eta"] = field_to_json(job.sim.init.eta);
  init["w"] = field_to_json(job.sim.init.w);
  r["initial"] = init;
  return r;
}

}  // namespace

json load_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("config file not found: " + path);
  }
  json j;
  try {
    in >> j;
  } catch (const json::parse_error& e) {
    throw ConfigError("config is not valid JSON: " + std::string(e.what()));
  }
  if (!j.is_object()) {
    throw ConfigError("config root must be a JSON object");
  }
  return j;
}

SimulateJob parse_simulate(const json& j) {
  require_kind(j, "simulate");
  check_keys(j,
             {"kind", "L", "n", "dt", "T", "lambda", "dynamics", "control",
              "bc_variant", "initial", "record_every", "snapshots",
              "feedback_coupling", "kernel_source", "omega_fit"},
             "");
  SimulateJob job;
  job.sim.L = need_number(j, "L", "");
  if (!(job.sim.L > 0.0)) {
    throw ConfigError("key /L must be positive");
  }
  job.sim.n = need_int(j, "n", "");
  if (job.sim.n < 7) {
    throw ConfigError("key /n must be >= 7");
  }
  job.sim.keep_snapshots = opt_bool(j, "snapshots", false, "");
  parse_sim_common(j, job, "");
  if (job.sim.init.eta.kind == InitialField::Kind::explicit_values &&
      static_cast<int>(job.sim.init.eta.values.size()) != job.sim.n) {
    throw ConfigError("key /initial: explicit values must have n entries");
  }
  if (job.sim.init.w.kind == InitialField::Kind::explicit_values &&
      static_cast<int>(job.sim.init.w.values.size()) != job.sim.n) {
    throw ConfigError("key /initial: explicit values must have n entries");
  }
  job.resolved = resolved_sim_json(job, "simulate");
  return job;
}

KernelJob parse_kernel(const json& j) {
  require_kind(j, "kernel");
  check_keys(j, {"kind", "L", "n", "lambda", "method", "omega_fit",
                 "exclusion_band"},
             "");
  KernelJob job;
  job.L = need_number(j, "L", "");
  if (!(job.L > 0.0)) {
    throw ConfigError("key /L must be positive");
  }
  job.n = need_int(j, "n", "");
  if (job.n < 7) {
    throw ConfigError("key /n must be >= 7");
  }
  job.lambda = need_number(j, "lambda", "");
  if (job.lambda == 0.0) {
    throw ConfigError("key /lambda must be nonzero");
  }
  job.method = opt_enum(j, "method", "design", {"design", "collocation"}, "");
  if (job.method == "design" && !(job.lambda > 0.0)) {
    throw ConfigError("key /lambda must be positive for method \"design\"");
  }
  job.omega_fit = opt_number(j, "omega_fit", 1000.0, "");
  job.exclusion_band = opt_int(j, "exclusion_band", 3, "");
  if (job.exclusion_band < 2) {
    throw ConfigError("key /exclusion_band must be >= 2");
  }
  job.resolved = json{{"kind", "kernel"},      {"L", job.L},
                      {"n", job.n},            {"lambda", job.lambda},
                      {"method", job.method},  {"omega_fit", job.omega_fit},
                      {"exclusion_band", job.exclusion_band}};
  return job;
}

CriticalityJob parse_criticality(const json& j) {
  require_kind(j, "criticality");
  check_keys(j, {"kind", "L", "tol"}, "");
  CriticalityJob job;
  job.L = need_number(j, "L", "");
  if (!(job.L > 0.0)) {
    throw ConfigError("key /L must be positive");
  }
  job.tol = opt_number(j, "tol", 1e-9, "");
  if (!(job.tol > 0.0) || job.tol >= 1.0) {
    throw ConfigError("key /tol must lie in (0, 1)");
  }
  job.resolved =
      json{{"kind", "criticality"}, {"L", job.L}, {"tol", job.tol}};
  return job;
}

ResidualJob parse_residual(const json& j) {
  require_kind(j, "residual");
  check_keys(j, {"kind", "exclusion_band"}, "");
  ResidualJob job;
  job.exclusion_band = opt_int(j, "exclusion_band", 3, "");
  if (job.exclusion_band < 2) {
    throw ConfigError("key /exclusion_band must be >= 2");
  }
  job.resolved =
      json{{"kind", "residual"}, {"exclusion_band", job.exclusion_band}};
  return job;
}

SweepJob parse_sweep(const json& j) {
  require_kind(j, "sweep");
  check_keys(j,
             {"kind", "dt", "T", "lambda", "dynamics", "control", "bc_variant",
              "initial", "record_every", "feedback_coupling", "kernel_source",
              "omega_fit", "L", "n", "amplitude"},
             "");
  SweepJob job;
  auto need_num_array = [&](const char* key) {
    const json& v = need(j, key, "");
    if (!v.is_array() || v.empty()) {
      throw ConfigError(std::string("key /") + key +
                        " must be a non-empty array");
    }
    std::vector<double> out;
    for (const json& x : v) {
      if (!x.is_number()) {
        throw ConfigError(std::string("key /") + key +
                          " must contain numbers");
      }
      out.push_back(x.get<double>());
    }
    return out;
  };
  job.Ls = need_num_array("L");
  for (double L : job.Ls) {
    if (!(L > 0.0)) {
      throw ConfigError("key /L entries must be positive");
    }
  }
  {
    const json& v = need(j, "n", "");
    if (!v.is_array() || v.empty()) {
      throw ConfigError("key /n must be a non-empty array");
    }
    for (const json& x : v) {
      if (!x.is_number_integer() || x.get<int>() < 7) {
        throw ConfigError("key /n must contain integers >= 7");
      }
      job.ns.push_back(x.get<int>());
    }
  }
  // lambda doubles as a sweep axis here; the scalar default still applies
  // when the key is absent.
  if (j.contains("lambda")) {
    job.lambdas = need_num_array("lambda");
  } else {
    job.lambdas = {1.0};
  }
  job.amplitudes = need_num_array("amplitude");

  // Base simulate config: per-run L, n, lambda, amplitude are overridden.
  json base = j;
  base["kind"] = "simulate";
  base.erase("L");
  base.erase("n");
  base.erase("amplitude");
  base.erase("lambda");
  base["L"] = job.Ls.front();
  base["n"] = job.ns.front();
  base["lambda"] = job.lambdas.front();
  // The swept amplitude axis supplies the initial-data amplitude, so the
  // field objects may omit it; inject a placeholder for the base parse.
  auto ensure_amp = [](json& f) {
    if (f.is_object() && f.contains("kind") &&
        (f["kind"] == "sine_mode" || f["kind"] == "gaussian") &&
        !f.contains("amplitude")) {
      f["amplitude"] = 0.0;
    }
  };
  if (base.contains("initial") && base["initial"].is_object()) {
    json& init = base["initial"];
    if (init.contains("eta") || init.contains("w")) {
      if (init.contains("eta")) {
        ensure_amp(init["eta"]);
      }
      if (init.contains("w")) {
        ensure_amp(init["w"]);
      }
    } else {
      ensure_amp(init);
    }
  }
  job.base = parse_simulate(base);
  const auto sweepable = [](const InitialField& f) {
    return f.kind == InitialField::Kind::sine_mode ||
           f.kind == InitialField::Kind::gaussian;
  };
  if (!sweepable(job.base.sim.init.eta) || !sweepable(job.base.sim.init.w)) {
    throw ConfigError(
        "key /initial: sweep requires sine_mode or gaussian initial data "
        "(amplitude and n vary per run)");
  }
  job.resolved = j;
  job.resolved["record_every"] = job.base.sim.record_every;
  job.resolved["feedback_coupling"] =
      job.base.sim.coupling == FeedbackCoupling::implicit_rows ? "implicit"
                                                               : "lagged";
  job.resolved["kernel_source"] = job.base.kernel_source;
  job.resolved["omega_fit"] = job.base.omega_fit;
  if (!j.contains("lambda")) {
    job.resolved["lambda"] = job.lambdas;
  }
  return job;
}

std::string parse_config_kind(const std::string& path) {
  const json j = load_config_file(path);
  const std::string kind =
      need_enum(j, "kind",
                {"simulate", "kernel", "criticality", "sweep", "residual"},
                "");
  if (kind == "simulate") {
    parse_simulate(j);
  } else if (kind == "kernel") {
    parse_kernel(j);
  } else if (kind == "criticality") {
    parse_criticality(j);
  } else if (kind == "residual") {
    parse_residual(j);
  } else {
    parse_sweep(j);
  }
  return kind;
}

std::string resolve_out_dir(const std::string& out_flag) {
  std::string dir = out_flag;
  if (dir.empty()) {
    if (const char* env = std::getenv("KDVB_OUT_DIR")) {
      dir = env;
    }
  }
  if (dir.empty()) {
    dir = ".";
  }
  fs::create_directories(dir);
  return dir;
}

namespace {

std::string manifest_path(const RunContext& ctx) {
  return (fs::path(ctx.out_dir) / "manifest.json").string();
}

void add_config_hash(ManifestEntry& e, const std::string& path) {
  if (!path.empty()) {
    e.input_hashes.emplace_back(path, file_hash_hex(path));
  }
}

// Build (or load) the kernel pair for a closed-loop simulate job. Appends
// human-readable warnings; throws on hard errors.
KernelPair make_kernel_for(const SimulateJob& job, const std::string& kernel_path,
                           std::vector<std::string>* warnings) {
  const Grid1D g = make_grid(job.sim.L, job.sim.n);
  if (job.kernel_source == "file" || !kernel_path.empty()) {
    if (kernel_path.empty()) {
      throw ConfigError(
          "kernel_source \"file\" requires --kernel <path> on the command "
          "line");
    }
    KernelPair kp = read_kernel_json(kernel_path);
    if (kp.grid.gx.n() != job.sim.n ||
        std::abs(kp.grid.gx.length_L - job.sim.L) > 1e-12) {
      throw ConfigError("kernel file grid (L=" +
                        std::to_string(kp.grid.gx.length_L) +
                        ", n=" + std::to_string(kp.grid.gx.n()) +
                        ") does not match config (L=" +
                        std::to_string(job.sim.L) +
                        ", n=" + std::to_string(job.sim.n) + ")");
    }
    if (warnings != nullptr && std::abs(kp.lambda - job.sim.lambda) > 1e-12) {
      warnings->push_back("kernel file lambda " + std::to_string(kp.lambda) +
                          " differs from config lambda " +
                          std::to_string(job.sim.lambda) +
                          "; the kernel file governs the feedback");
    }
    return kp;
  }
  CriticalQuery cq;
  if (warnings != nullptr && is_critical(job.sim.L, cq)) {
    warnings->push_back(
        "domain length L is within tolerance of a critical length; "
        "controllability degenerates there and the design may be singular");
  }
  if (job.kernel_source == "collocation") {
    double rel = 0.0;
    KernelPair kp =
        solve_kernel_pair_collocation(make_grid2(g), job.sim.lambda, &rel);
    if (warnings != nullptr) {
      warnings->push_back(
          "kernel_source \"collocation\" solves the square collocation "
          "system, whose discrete solution is known to degrade under grid "
          "refinement; max relative solve residual " + format_double(rel));
    }
    return kp;
  }
  return fitted_kernel_pair(g, job.sim.lambda, job.omega_fit);
}

json decay_fit_json(const std::vector<double>& times,
                    const std::vector<double>& series, double t0, double t1) {
  try {
    const DecayFit fit = fit_decay_rate(times, series, t0, t1);
    return json{{"sigma", fit.sigma},
                {"C_fit", fit.C_fit},
                {"r_squared", fit.r_squared},
                {"t_start", fit.t_start},
                {"t_end", fit.t_end}};
  } catch (const std::invalid_argument&) {
    return json();  // null: not enough positive samples
  }
}

json summarize(const Trajectory& traj, double T) {
  json s;
  s["failed"] = traj.failed;
  s["fail_step"] = traj.fail_step;
  s["fail_reason"] = traj.fail_reason;
  if (!traj.energies.empty()) {
    const double E0 = traj.energies.front();
    s["E_initial"] = E0;
    s["E_final"] = traj.energies.back();
    s["x0_norm_initial"] = traj.x0_norms.front();
    s["x0_norm_final"] = traj.x0_norms.back();
    double drift = 0.0;
    if (E0 > 0.0) {
      for (double E : traj.energies) {
        drift = std::max(drift, std::abs(E - E0) / E0);
      }
      s["max_rel_energy_drift"] = drift;
    } else {
      s["max_rel_energy_drift"] = json();
    }
    const double t0 = 0.25 * T;
    s["decay_fit_x0"] = decay_fit_json(traj.times, traj.x0_norms, t0, T);
    if (!traj.target_norms.empty()) {
      s["target_norm_final"] = traj.target_norms.back();
      s["decay_fit_target"] =
          decay_fit_json(traj.times, traj.target_norms, t0, T);
    } else {
      s["target_norm_final"] = json();
      s["decay_fit_target"] = json();
    }
  }
  return s;
}

void write_json_file(const std::string& path, const json& j) {
  std::ofstream out(path);
  if (!out) {
    throw std::runtime_error("cannot open for writing: " + path);
  }
  out << j.dump(2) << "\n";
}

}  // namespace

int run_simulate(const std::string& config_path, const RunContext& ctx) {
  const Clock::time_point t0 = Clock::now();
  ManifestEntry entry;
  entry.subcommand = "simulate";
  SimulateJob job;
  try {
    job = parse_simulate(load_config_file(config_path));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  entry.resolved_config = job.resolved;
  try {
    add_config_hash(entry, config_path);
    const Grid1D g = make_grid(job.sim.L, job.sim.n);
    if (job.sim.dt > g.h()) {
      entry.warnings.push_back(
          "dt " + format_double(job.sim.dt) + " exceeds grid spacing h " +
          format_double(g.h()) +
          " (accuracy guard, not a stability bound); proceeding");
    }
    std::unique_ptr<KernelPair> kp;
    if (job.sim.control == Control::closed_loop) {
      kp = std::make_unique<KernelPair>(
          make_kernel_for(job, ctx.kernel_path, &entry.warnings));
      if (!ctx.kernel_path.empty()) {
        entry.input_hashes.emplace_back(ctx.kernel_path,
                                        file_hash_hex(ctx.kernel_path));
      }
    }
    const Trajectory traj = simulate(job.sim, kp.get());

    const std::string csv_path =
        (fs::path(ctx.out_dir) / "trajectory.csv").string();
    const std::string summary_path =
        (fs::path(ctx.out_dir) / "summary.json").string();
    write_trajectory_csv(csv_path, traj);
    write_json_file(summary_path, summarize(traj, job.sim.T));
    entry.output_paths = {csv_path, summary_path};
    entry.duration_ms = ms_since(t0);
    if (traj.failed) {
      entry.status = "numerical failure: " + traj.fail_reason +
                     "; partial outputs retained";
      append_manifest(manifest_path(ctx), entry);
      std::cerr << entry.status << "\n";
      return 2;
    }
    append_manifest(manifest_path(ctx), entry);
    std::cout << "wrote " << csv_path << " (" << traj.times.size()
              << " rows) and " << summary_path << "\n";
    return 0;
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    entry.status = std::string("numerical failure: ") + e.what();
    entry.duration_ms = ms_since(t0);
    append_manifest(manifest_path(ctx), entry);
    std::cerr << entry.status << "\n";
    return 2;
  }
}

int run_kernel(const std::optional<KernelJob>& direct_flags,
               const std::string& config_path, const std::string& out_file,
               const RunContext& ctx) {
  const Clock::time_point t0 = Clock::now();
  ManifestEntry entry;
  entry.subcommand = "kernel";
  KernelJob job;
  try {
    if (direct_flags.has_value()) {
      job = *direct_flags;
      job.resolved = json{{"kind", "kernel"},
                          {"L", job.L},
                          {"n", job.n},
                          {"lambda", job.lambda},
                          {"method", job.method},
                          {"omega_fit", job.omega_fit},
                          {"exclusion_band", job.exclusion_band}};
      if (!(job.L > 0.0)) {
        throw ConfigError("--L must be positive");
      }
      if (job.n < 7) {
        throw ConfigError("--n must be >= 7");
      }
      if (job.lambda == 0.0) {
        throw ConfigError("--lambda must be nonzero");
      }
      if (job.method == "design" && !(job.lambda > 0.0)) {
        throw ConfigError("--lambda must be positive for method \"design\"");
      }
    } else {
      job = parse_kernel(load_config_file(config_path));
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  entry.resolved_config = job.resolved;
  try {
    add_config_hash(entry, config_path);
    const Grid1D g = make_grid(job.L, job.n);
    CriticalQuery cq;
    if (is_critical(job.L, cq)) {
      entry.warnings.push_back(
          "domain length L is within tolerance of a critical length; the "
          "kernel problem may be degenerate there");
    }
    KernelPair kp;
    double solve_metric = 0.0;
    if (job.method == "collocation") {
      kp = solve_kernel_pair_collocation(make_grid2(g), job.lambda,
                                         &solve_metric);
    } else {
      kp = fitted_kernel_pair(g, job.lambda, job.omega_fit, &solve_metric);
    }
    const auto [res_k, res_s] = kernel_residual(kp, job.exclusion_band);

    std::string path = out_file;
    if (path.empty()) {
      path = (fs::path(ctx.out_dir) / "kernel.json").string();
    }
    write_kernel_json(path, kp);
    entry.output_paths = {path};
    entry.duration_ms = ms_since(t0);
    append_manifest(manifest_path(ctx), entry);
    const json summary{{"out", path},
                       {"L", job.L},
                       {"n", job.n},
                       {"lambda", job.lambda},
                       {"method", job.method},
                       {"residual_k", res_k},
                       {"residual_s", res_s},
                       {"exclusion_band", job.exclusion_band},
                       {"construction_residual", solve_metric}};
    std::cout << summary.dump() << "\n";
    return 0;
  } catch (const std::exception& e) {
    entry.status = std::string("numerical failure: ") + e.what();
    entry.duration_ms = ms_since(t0);
    append_manifest(manifest_path(ctx), entry);
    std::cerr << entry.status << "\n";
    return 2;
  }
}

int run_criticality(std::optional<double> L_flag, std::optional<double> tol_flag,
                    const std::string& config_path, const RunContext& ctx) {
  const Clock::time_point t0 = Clock::now();
  CriticalityJob job;
  try {
    if (L_flag.has_value()) {
      job.L = *L_flag;
      job.tol = tol_flag.value_or(1e-9);
      if (!(job.L > 0.0)) {
        throw ConfigError("--L must be positive");
      }
      if (!(job.tol > 0.0) || job.tol >= 1.0) {
        throw ConfigError("--tol must lie in (0, 1)");
      }
      job.resolved =
          json{{"kind", "criticality"}, {"L", job.L}, {"tol", job.tol}};
    } else if (!config_path.empty()) {
      job = parse_criticality(load_config_file(config_path));
    } else {
      throw ConfigError("criticality needs --L <real> or --config <path>");
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  CriticalQuery q;
  q.tolerance = job.tol;
  const bool verdict = is_critical(job.L, q);
  const std::vector<double> nearest = nearest_critical(job.L, 3);
  const json report{{"critical", verdict}, {"nearest", nearest}};
  std::cout << report.dump() << "\n";
  ManifestEntry entry;
  entry.subcommand = "criticality";
  entry.resolved_config = job.resolved;
  add_config_hash(entry, config_path);
  entry.duration_ms = ms_since(t0);
  append_manifest(manifest_path(ctx), entry);
  return 0;
}

int run_residual(const std::string& config_path,
                 const std::string& kernel_path, const RunContext& ctx) {
  const Clock::time_point t0 = Clock::now();
  ManifestEntry entry;
  entry.subcommand = "residual";
  ResidualJob job;
  try {
    if (kernel_path.empty()) {
      throw ConfigError("residual requires --kernel <path>");
    }
    job = config_path.empty() ? ResidualJob{}
                              : parse_residual(load_config_file(config_path));
    if (config_path.empty()) {
      job.resolved = json{{"kind", "residual"},
                          {"exclusion_band", job.exclusion_band}};
    }
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  entry.resolved_config = job.resolved;
  try {
    add_config_hash(entry, config_path);
    entry.input_hashes.emplace_back(kernel_path, file_hash_hex(kernel_path));
    const KernelPair kp = read_kernel_json(kernel_path);
    const auto [res_k, res_s] = kernel_residual(kp, job.exclusion_band);
    const StabilityConstants c = stability_constants(kp);
    const json report{
        {"residual", std::max(res_k, res_s)},
        {"K1", c.K1},
        {"K2", c.K2},
        {"K3", c.K3},
        {"C1", c.C1},
        {"condition_estimates",
         json{{"factor_plus", c.cond_plus}, {"factor_minus", c.cond_minus}}}};
    const std::string report_path =
        (fs::path(ctx.out_dir) / "residual_report.json").string();
    write_json_file(report_path, report);
    std::cout << report.dump() << "\n";
    entry.output_paths = {report_path};
    entry.duration_ms = ms_since(t0);
    append_manifest(manifest_path(ctx), entry);
    return 0;
  } catch (const std::exception& e) {
    entry.status = std::string("numerical failure: ") + e.what();
    entry.duration_ms = ms_since(t0);
    append_manifest(manifest_path(ctx), entry);
    std::cerr << entry.status << "\n";
    return 2;
  }
}

int run_sweep(const std::string& config_path, const RunContext& ctx) {
  const Clock::time_point t0 = Clock::now();
  ManifestEntry entry;
  entry.subcommand = "sweep";
  SweepJob job;
  try {
    job = parse_sweep(load_config_file(config_path));
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  }
  entry.resolved_config = job.resolved;

  struct Run {
    double L;
    double lambda;
    double amplitude;
    int n;
  };
  std::vector<Run> runs;
  for (double L : job.Ls) {
    for (double lam : job.lambdas) {
      for (double a : job.amplitudes) {
        for (int n : job.ns) {
          runs.push_back({L, lam, a, n});
        }
      }
    }
  }
  std::vector<std::string> rows(runs.size());
  std::vector<std::string> csv_paths(runs.size());
  std::atomic<size_t> next{0};
  std::mutex kernel_mutex;
  std::map<std::tuple<double, double, int>, std::shared_ptr<KernelPair>>
      kernel_cache;
  std::mutex error_mutex;
  std::string first_error;

  auto worker = [&]() {
    for (;;) {
      const size_t idx = next.fetch_add(1);
      if (idx >= runs.size()) {
        return;
      }
      const Run& r = runs[idx];
      SimulateJob run_job = job.base;
      run_job.sim.L = r.L;
      run_job.sim.n = r.n;
      run_job.sim.lambda = r.lambda;
      run_job.sim.init.eta.amplitude = r.amplitude;
      run_job.sim.init.w.amplitude = r.amplitude;
      char tag[32];
      std::snprintf(tag, sizeof(tag), "run_%04zu", idx);
      const fs::path run_dir = fs::path(ctx.out_dir) / tag;
      std::string status = "ok";
      double E_final = 0.0;
      double x0_final = 0.0;
      json fit = json();
      try {
        fs::create_directories(run_dir);
        std::shared_ptr<KernelPair> kp;
        if (run_job.sim.control == Control::closed_loop) {
          const auto key = std::make_tuple(r.L, r.lambda, r.n);
          std::lock_guard<std::mutex> lock(kernel_mutex);
          auto it = kernel_cache.find(key);
          if (it == kernel_cache.end()) {
            kp = std::make_shared<KernelPair>(
                make_kernel_for(run_job, ctx.kernel_path, nullptr));
            kernel_cache.emplace(key, kp);
          } else {
            kp = it->second;
          }
        }
        const Trajectory traj = simulate(run_job.sim, kp.get());
        const std::string csv = (run_dir / "trajectory.csv").string();
        write_trajectory_csv(csv, traj);
        csv_paths[idx] = csv;
        if (!traj.energies.empty()) {
          E_final = traj.energies.back();
          x0_final = traj.x0_norms.back();
        }
        if (traj.failed) {
          status = "blow-up at step " + std::to_string(traj.fail_step);
        } else {
          fit = decay_fit_json(traj.times, traj.x0_norms,
                               0.25 * run_job.sim.T, run_job.sim.T);
        }
      } catch (const std::exception& e) {
        status = std::string("error: ") + e.what();
        std::lock_guard<std::mutex> lock(error_mutex);
        if (first_error.empty()) {
          first_error = e.what();
        }
      }
      std::string sigma_s;
      std::string r2_s;
      if (fit.is_object()) {
        sigma_s = format_double(fit["sigma"].get<double>());
        r2_s = format_double(fit["r_squared"].get<double>());
      }
      rows[idx] = std::to_string(idx) + "," + format_double(r.L) + "," +
                  format_double(r.lambda) + "," + format_double(r.amplitude) +
                  "," + std::to_string(r.n) + ",\"" + status + "\"," +
                  format_double(E_final) + "," + format_double(x0_final) +
                  "," + sigma_s + "," + r2_s;
    }
  };

  const int jobs = std::max(1, ctx.jobs);
  std::vector<std::thread> pool;
  const size_t nthreads =
      std::min<size_t>(static_cast<size_t>(jobs), runs.size());
  pool.reserve(nthreads);
  for (size_t i = 0; i < nthreads; ++i) {
    pool.emplace_back(worker);
  }
  for (std::thread& th : pool) {
    th.join();
  }

  const std::string summary_path =
      (fs::path(ctx.out_dir) / "sweep_summary.csv").string();
  {
    std::ofstream out(summary_path);
    if (!out) {
      std::cerr << "cannot open for writing: " << summary_path << "\n";
      return 2;
    }
    out << "run,L,lambda,amplitude,n,status,E_final,x0_norm_final,sigma,"
           "r_squared\n";
    for (const std::string& row : rows) {
      out << row << "\n";
    }
  }
  add_config_hash(entry, config_path);
  entry.output_paths.push_back(summary_path);
  for (const std::string& p : csv_paths) {
    if (!p.empty()) {
      entry.output_paths.push_back(p);
    }
  }
  entry.duration_ms = ms_since(t0);
  if (!first_error.empty()) {
    entry.status = "numerical failure in at least one run: " + first_error;
    append_manifest(manifest_path(ctx), entry);
    std::cerr << entry.status << "\n";
    return 2;
  }
  append_manifest(manifest_path(ctx), entry);
  std::cout << "wrote " << summary_path << " (" << runs.size() << " runs)\n";
  return 0;
}

}  // namespace kdvb
