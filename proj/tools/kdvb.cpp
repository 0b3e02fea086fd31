// kdvb: boundary-stabilized dispersive wave toolbox.
//
// Subcommands:
//   simulate    time-domain run from a JSON config (open or closed loop)
//   kernel      construct a stabilizing kernel pair and write it as JSON
//   criticality test a domain length against the critical-length lattice
//   residual    stability report for a stored kernel file
//   sweep       batch of simulations over (L, lambda, amplitude, n)
//
// Exit codes: 0 success, 1 usage/config error, 2 numerical failure
// (partial outputs and a manifest entry are kept).

#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "kdvb/io.hpp"
#include "kdvb/runner.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Boundary feedback stabilization of a coupled dispersive "
               "wave system: kernel construction, simulation, verification"};
  app.set_version_flag("--version", std::string(kdvb::kVersionString));
  app.require_subcommand(1);

  std::string config;
  std::string out_dir;
  std::string kernel_path;
  std::string out_file;
  int jobs = 1;

  CLI::App* sim = app.add_subcommand(
      "simulate", "Run one simulation described by a JSON config");
  sim->add_option("--config", config, "Simulation config (kind: simulate)")
      ->required();
  sim->add_option("--out", out_dir,
                  "Output directory (default: $KDVB_OUT_DIR, else .)");
  sim->add_option("--kernel", kernel_path,
                  "Kernel JSON file to use for the closed loop");

  CLI::App* ker = app.add_subcommand(
      "kernel", "Construct a kernel pair and write it as JSON");
  double kL = 0.0;
  int kn = 0;
  double klambda = 0.0;
  std::string method = "design";
  double omega_fit = 1000.0;
  int band = 3;
  ker->add_option("--config", config, "Kernel config (kind: kernel)");
  ker->add_option("--L", kL, "Domain length");
  ker->add_option("--n", kn, "Grid nodes per direction");
  ker->add_option("--lambda", klambda, "Decay design rate");
  ker->add_option("--method", method, "design | collocation")
      ->check(CLI::IsMember({"design", "collocation"}));
  ker->add_option("--omega-fit", omega_fit,
                  "Frequency band for the structured fit (design method)");
  ker->add_option("--exclusion-band", band,
                  "Diagonal band excluded from the reported residual");
  ker->add_option("--out", out_file,
                  "Output kernel file (default: kernel.json in output dir)");

  CLI::App* crit = app.add_subcommand(
      "criticality", "Test a domain length against the critical lattice");
  double cL = 0.0;
  double ctol = 1e-9;
  crit->add_option("--L", cL, "Domain length to test");
  crit->add_option("--tol", ctol, "Match tolerance (default 1e-9)");
  crit->add_option("--config", config, "Config file (kind: criticality)");

  CLI::App* res = app.add_subcommand(
      "residual", "Stability report for a stored kernel file");
  res->add_option("--kernel", kernel_path, "Kernel JSON file")->required();
  res->add_option("--config", config, "Optional config (kind: residual)");
  res->add_option("--out", out_dir,
                  "Output directory (default: $KDVB_OUT_DIR, else .)");

  CLI::App* swp = app.add_subcommand(
      "sweep", "Run a batch of simulations over (L, lambda, amplitude, n)");
  swp->add_option("--config", config, "Sweep config (kind: sweep)")
      ->required();
  swp->add_option("--out", out_dir,
                  "Output directory (default: $KDVB_OUT_DIR, else .)");
  swp->add_option("--jobs", jobs, "Worker threads (default 1)")
      ->check(CLI::PositiveNumber);

  CLI11_PARSE(app, argc, argv);

  try {
    kdvb::RunContext ctx;
    ctx.config_path = config;
    ctx.kernel_path = kernel_path;
    ctx.jobs = jobs;
    ctx.out_dir = kdvb::resolve_out_dir(out_dir);

    if (sim->parsed()) {
      return kdvb::run_simulate(config, ctx);
    }
    if (ker->parsed()) {
      std::optional<kdvb::KernelJob> direct;
      if (config.empty()) {
        if (ker->count("--L") == 0 || ker->count("--n") == 0 ||
            ker->count("--lambda") == 0) {
          std::cerr << "kernel needs --L, --n and --lambda, or --config "
                       "<path>\n";
          return 1;
        }
        kdvb::KernelJob kj;
        kj.L = kL;
        kj.n = kn;
        kj.lambda = klambda;
        kj.method = method;
        kj.omega_fit = omega_fit;
        kj.exclusion_band = band;
        direct = kj;
      }
      return kdvb::run_kernel(direct, config, out_file, ctx);
    }
    if (crit->parsed()) {
      std::optional<double> L_flag;
      std::optional<double> tol_flag;
      if (crit->count("--L") > 0) {
        L_flag = cL;
      }
      if (crit->count("--tol") > 0) {
        tol_flag = ctol;
      }
      return kdvb::run_criticality(L_flag, tol_flag, config, ctx);
    }
    if (res->parsed()) {
      return kdvb::run_residual(config, kernel_path, ctx);
    }
    if (swp->parsed()) {
      return kdvb::run_sweep(config, ctx);
    }
  } catch (const kdvb::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}
