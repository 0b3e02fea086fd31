// Acceptance gate: one line per criterion, measured values printed, pass
// thresholds pinned in code. The exit code is the number of failed criteria.
//
// Criteria 1 and 2 probe the direct square-collocation kernel route. That
// route is implemented exactly as documented, and its discrete solution is
// measured here to diverge under grid refinement (growing magnitude, growing
// y-edge traces, growing off-diagonal residual); the corresponding clauses
// therefore fail and are reported honestly rather than weakened. Everything
// downstream (criteria 3-8) runs on the production design-and-fit kernels.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "kdvb/critical.hpp"
#include "kdvb/design.hpp"
#include "kdvb/diagnostics.hpp"
#include "kdvb/io.hpp"
#include "kdvb/kernel.hpp"
#include "kdvb/runner.hpp"
#include "kdvb/sim.hpp"
#include "kdvb/transform.hpp"

using namespace kdvb;
namespace fs = std::filesystem;

namespace {

constexpr double kPi = 3.14159265358979323846;

template <typename... Args>
std::string fmt(const char* f, Args... args) {
  char buf[1024];
  std::snprintf(buf, sizeof(buf), f, args...);
  return std::string(buf);
}

std::string slurp(const std::string& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

VectorXd sine_sq(const Grid1D& g, double amplitude) {
  VectorXd r(g.n());
  for (int i = 0; i < g.n(); ++i) {
    const double s = std::sin(kPi * g.x(i) / g.length_L);
    r(i) = amplitude * s * s;
  }
  return r;
}

SimConfig base_config(int n, double dt, double T) {
  SimConfig cfg;
  cfg.L = 1.0;
  cfg.n = n;
  cfg.dt = dt;
  cfg.T = T;
  cfg.lambda = 1.0;
  cfg.dynamics = Dynamics::linear;
  cfg.control = Control::open_loop;
  cfg.bc = BcVariant::homogeneous;
  return cfg;
}

void set_explicit(InitialField& f, const VectorXd& v) {
  f.kind = InitialField::Kind::explicit_values;
  f.values.assign(v.data(), v.data() + v.size());
}

// Closed-loop config with the small sine-squared data of the decay studies.
SimConfig decay_config(int n, double dt, double T, const Grid1D& g) {
  SimConfig cfg = base_config(n, dt, T);
  cfg.control = Control::closed_loop;
  cfg.bc = BcVariant::controlled;
  set_explicit(cfg.init.eta, sine_sq(g, 0.01));
  set_explicit(cfg.init.w, sine_sq(g, -0.008));
  return cfg;
}

}  // namespace

int main() {
  int fails = 0;
  std::string failed_ids;
  auto report = [&](int id, bool pass, const std::string& detail) {
    std::printf("criterion %02d %s — %s\n", id, pass ? "PASS" : "FAIL",
                detail.c_str());
    std::fflush(stdout);
    if (!pass) {
      ++fails;
      failed_ids += (failed_ids.empty() ? "" : ", ") + std::to_string(id);
    }
  };
  auto guarded = [&report](int id, auto&& body) {
    try {
      body();
    } catch (const std::exception& e) {
      report(id, false, fmt("unexpected exception: %s", e.what()));
    }
  };

  // ---------------------------------------------------------- criterion 1
  // Direct collocation solve quality at n=101 (L=1, lambda=1): algebraic
  // residual < 1e-10, exact zero Dirichlet edges, and y-edge Neumann traces
  // shrinking by >= 1.8 when n doubles to 201.
  guarded(1, [&] {
    const double L = 1.0;
    double rv = 0.0, ru = 0.0;
    const Grid2D g101 = make_grid2(make_grid(L, 101));
    const MatrixXd v101 = solve_scalar_kernel({g101, 1.0, +1}, &rv);
    const MatrixXd u101 = solve_scalar_kernel({g101, 1.0, -1}, &ru);
    const KernelPair kp101 = compose_kernel_pair(v101, u101, {g101, 1.0, +1});
    const double res = std::max(rv, ru);
    const bool res_ok = res < 1e-10;

    const int n = 101;
    const double edge_max = std::max(
        {kp101.k_vals.row(0).cwiseAbs().maxCoeff(),
         kp101.k_vals.row(n - 1).cwiseAbs().maxCoeff(),
         kp101.k_vals.col(0).cwiseAbs().maxCoeff(),
         kp101.k_vals.col(n - 1).cwiseAbs().maxCoeff()});
    const bool edge_ok = edge_max == 0.0;

    const Grid2D g201 = make_grid2(make_grid(L, 201));
    const KernelPair kp201c = solve_kernel_pair_collocation(g201, 1.0);
    const double tr101 = neumann_trace_y(kp101.k_vals, g101.gx.h());
    const double tr201 = neumann_trace_y(kp201c.k_vals, g201.gx.h());
    const double shrink = tr101 / tr201;
    const bool trace_ok = shrink >= 1.8;

    report(1, res_ok && edge_ok && trace_ok,
           fmt("collocation at n=101: solve residual %.3e (need < 1e-10), "
               "Dirichlet edge max %.1e (need exact 0), y-trace %.4e -> %.4e "
               "under doubling, shrink factor %.3f (need >= 1.8); the "
               "discrete solution of this route diverges under refinement",
               res, edge_max, tr101, tr201, shrink));
  });

  // ---------------------------------------------------------- criterion 2
  // Off-diagonal collocation residual (band 3) must decrease monotonically
  // over n = 41, 81, 161 for the direct route.
  guarded(2, [&] {
    double off[3] = {0.0, 0.0, 0.0};
    const int ns[3] = {41, 81, 161};
    for (int i = 0; i < 3; ++i) {
      const Grid2D g2 = make_grid2(make_grid(1.0, ns[i]));
      const KernelPair kp = solve_kernel_pair_collocation(g2, 1.0);
      const auto [rk, rs] = kernel_residual(kp, 3);
      off[i] = std::max(rk, rs);
    }
    const bool ok = off[0] > off[1] && off[1] > off[2];
    report(2, ok,
           fmt("off-diagonal residual over n=41/81/161: %.6e / %.6e / %.6e "
               "(need monotone decrease); the residual grows, consistent "
               "with the divergence measured in criterion 1",
               off[0], off[1], off[2]));
  });

  // ---------------------------------------------------------- criterion 3
  // Transform round trip on the production kernels: for lambda in {0.5, 1}
  // and n in {81, 161}, 20 seeded smooth states must come back through
  // forward+inverse with relative error < 1e-8.
  KernelPair kp161;  // lambda = 1, reused by criteria 6 and 7
  guarded(3, [&] {
    double worst = 0.0;
    std::string worst_at;
    for (double lam : {0.5, 1.0}) {
      for (int n : {81, 161}) {
        const Grid1D g = make_grid(1.0, n);
        const KernelPair kp = fitted_kernel_pair(g, lam);
        if (lam == 1.0 && n == 161) {
          kp161 = kp;
        }
        const InverseOperators ops = build_inverse_operators(kp);
        Lcg rng(12345);
        for (int trial = 0; trial < 20; ++trial) {
          StatePair z;
          z.eta = smooth_random_state(rng, g);
          z.w = smooth_random_state(rng, g);
          const TargetPair t = forward_transform(kp, z);
          const StatePair back = inverse_transform(ops, t);
          const double rel = x0_norm(back.eta - z.eta, back.w - z.w, g) /
                             x0_norm(z.eta, z.w, g);
          if (rel > worst) {
            worst = rel;
            worst_at = fmt("lambda=%.1f n=%d", lam, n);
          }
        }
      }
    }
    report(3, worst < 1e-8,
           fmt("worst round-trip relative error over 20 seeded states x 4 "
               "configs: %.3e at %s (need < 1e-8)",
               worst, worst_at.c_str()));
  });

  // ---------------------------------------------------------- criterion 4
  // Homogeneous open-loop linear flow conserves the energy: relative drift
  // < 0.02 at (n=201, dt=1e-3) over [0,1], improving by >= 1.5 at
  // (n=401, dt=5e-4).
  guarded(4, [&] {
    auto drift_of = [](int n, double dt) {
      SimConfig cfg = base_config(n, dt, 1.0);
      cfg.init.eta.kind = InitialField::Kind::sine_mode;
      cfg.init.eta.mode = 1;
      cfg.init.eta.amplitude = 1.0;
      cfg.init.w.kind = InitialField::Kind::sine_mode;
      cfg.init.w.mode = 2;
      cfg.init.w.amplitude = 0.5;
      const Trajectory traj = simulate(cfg, nullptr);
      if (traj.failed) {
        throw std::runtime_error("conservation run failed: " +
                                 traj.fail_reason);
      }
      const double E0 = traj.energies.front();
      double drift = 0.0;
      for (double E : traj.energies) {
        drift = std::max(drift, std::abs(E - E0) / E0);
      }
      return drift;
    };
    const double d1 = drift_of(201, 1e-3);
    const double d2 = drift_of(401, 5e-4);
    const bool ok = d1 < 0.02 && d1 / d2 >= 1.5;
    report(4, ok,
           fmt("energy drift %.6e at (n=201, dt=1e-3) (need < 0.02), %.6e "
               "at (n=401, dt=5e-4), refinement factor %.3f (need >= 1.5)",
               d1, d2, d1 / d2));
  });

  // ---------------------------------------------------------- criterion 5
  // Closed-loop linear run (n=201, lambda=1, T=6): the target norm decays
  // exponentially with sigma in [0.8, 1.2] and fit quality r^2 > 0.99.
  Trajectory traj5;
  const Grid1D g201 = make_grid(1.0, 201);
  ReducedDesign d201;
  KernelPair kp201;
  guarded(5, [&] {
    d201 = design_reduced(g201, 1.0);
    kp201 = fitted_kernel_pair(d201);
    SimConfig cfg = decay_config(201, 1e-3, 6.0, g201);
    traj5 = simulate(cfg, &kp201);
    if (traj5.failed) {
      throw std::runtime_error("closed-loop run failed: " + traj5.fail_reason);
    }
    const DecayFit fit =
        fit_decay_rate(traj5.times, traj5.target_norms, 0.5, 6.0);
    const bool ok =
        fit.sigma >= 0.8 && fit.sigma <= 1.2 && fit.r_squared > 0.99;
    report(5, ok,
           fmt("linear target-norm decay: sigma %.6f (need in [0.8, 1.2]), "
               "r^2 %.8f (need > 0.99), target norm %.3e -> %.3e over [0, 6]",
               fit.sigma, fit.r_squared, traj5.target_norms.front(),
               traj5.target_norms.back()));
  });

  // ---------------------------------------------------------- criterion 6
  // Nonlinear closed loop with the same small data: the state norm stays
  // under the measured envelope C_meas * exp(-lambda t / 2) * ||z(0)|| with
  // C_meas = sqrt(C1) * M_fwd from the n=161 constants, and its fitted decay
  // rate is at least 0.4 * lambda.
  StabilityConstants c161;
  guarded(6, [&] {
    if (kp161.k_vals.size() == 0) {
      kp161 = fitted_kernel_pair(make_grid(1.0, 161), 1.0);
    }
    c161 = stability_constants(kp161);
    const double C_meas = std::sqrt(c161.C1) * c161.M_fwd;
    SimConfig cfg = decay_config(201, 1e-3, 6.0, g201);
    cfg.dynamics = Dynamics::nonlinear;
    const Trajectory traj = simulate(cfg, &kp201);
    if (traj.failed) {
      throw std::runtime_error("nonlinear run failed: " + traj.fail_reason);
    }
    const double z0 = traj.x0_norms.front();
    double ratio = 0.0;
    for (size_t i = 0; i < traj.times.size(); ++i) {
      const double envelope =
          C_meas * std::exp(-0.5 * traj.times[i]) * z0;
      ratio = std::max(ratio, traj.x0_norms[i] / envelope);
    }
    const DecayFit fit = fit_decay_rate(traj.times, traj.x0_norms, 0.5, 6.0);
    const bool ok = ratio <= 1.0 && fit.sigma >= 0.4;
    report(6, ok,
           fmt("nonlinear decay: C1 %.4f, M_fwd %.4f, C_meas %.4f, envelope "
               "max ratio %.4f (need <= 1), state sigma %.4f (need >= 0.4)",
               c161.C1, c161.M_fwd, C_meas, ratio, fit.sigma));
  });

  // ---------------------------------------------------------- criterion 7
  // Norm equivalence ||z||^2 <= C1 ||(u,v)||^2 on 100 seeded smooth states
  // at n=161: zero violations allowed (slack 1e-10).
  guarded(7, [&] {
    if (kp161.k_vals.size() == 0) {
      kp161 = fitted_kernel_pair(make_grid(1.0, 161), 1.0);
      c161 = stability_constants(kp161);
    }
    const Grid1D g = make_grid(1.0, 161);
    const VectorXd wq = trapezoid_weights(g);
    Lcg rng(777);
    int violations = 0;
    double worst = 0.0;
    for (int trial = 0; trial < 100; ++trial) {
      StatePair z;
      z.eta = smooth_random_state(rng, g);
      z.w = smooth_random_state(rng, g);
      const TargetPair t = forward_transform(kp161, z);
      const double lhs = wq.dot(z.eta.cwiseAbs2()) + wq.dot(z.w.cwiseAbs2());
      const double rhs =
          c161.C1 * (wq.dot(t.u.cwiseAbs2()) + wq.dot(t.v.cwiseAbs2()));
      worst = std::max(worst, lhs / rhs);
      if (lhs > rhs + 1e-10) {
        ++violations;
      }
    }
    report(7, violations == 0,
           fmt("norm equivalence with C1 %.4f over 100 seeded states: %d "
               "violations (need 0), worst lhs/rhs %.6f",
               c161.C1, violations, worst));
  });

  // ---------------------------------------------------------- criterion 8
  // The damped target identity holds along simulated closed-loop solutions
  // with defect shrinking at first order or better under refinement
  // (band-limited data, T=0.5, snapshots every step).
  guarded(8, [&] {
    struct Run {
      int n;
      double dt;
    };
    const Run runs[3] = {{101, 2e-3}, {201, 1e-3}, {401, 5e-4}};
    double res[3] = {0.0, 0.0, 0.0};
    for (int i = 0; i < 3; ++i) {
      const int n = runs[i].n;
      const Grid1D g = make_grid(1.0, n);
      const ReducedDesign d =
          (n == 201) ? d201 : design_reduced(g, 1.0);
      const KernelPair kp = (n == 201) ? kp201 : fitted_kernel_pair(d);
      const VectorXd zred =
          reduce_state(n, sine_sq(g, 0.01), sine_sq(g, -0.008));
      const VectorXd zb = band_limited_state(d, zred, 500.0);
      VectorXd eb, wb;
      scatter_reduced_state(n, zb, eb, wb);
      SimConfig cfg = base_config(n, runs[i].dt, 0.5);
      cfg.control = Control::closed_loop;
      cfg.bc = BcVariant::controlled;
      cfg.keep_snapshots = true;
      set_explicit(cfg.init.eta, eb);
      set_explicit(cfg.init.w, wb);
      const Trajectory traj = simulate(cfg, &kp);
      if (traj.failed) {
        throw std::runtime_error("identity run failed: " + traj.fail_reason);
      }
      res[i] = target_residual(traj, kp, 1.0);
    }
    const double o1 = std::log2(res[0] / res[1]);
    const double o2 = std::log2(res[1] / res[2]);
    const bool ok = o1 >= 1.0 && o2 >= 1.0;
    report(8, ok,
           fmt("target-identity defect %.6e / %.6e / %.6e over three "
               "refinements, observed orders %.3f and %.3f (need >= 1)",
               res[0], res[1], res[2], o1, o2));
  });

  // ---------------------------------------------------------- criterion 9
  // Critical-length arithmetic: the first six lattice values match their
  // closed forms at 1e-9, known members are detected, plain lengths are not.
  guarded(9, [&] {
    CriticalQuery q;
    q.k_max = 6;
    q.l_max = 6;
    const std::vector<double> vals = critical_lengths(q);
    auto lattice = [](int k, int l) {
      return 2.0 * kPi / std::sqrt(3.0) *
             std::sqrt(double(k * k + k * l + l * l));
    };
    const double expected[6] = {lattice(1, 1), lattice(1, 2), lattice(2, 2),
                                lattice(1, 3), lattice(2, 3), lattice(1, 4)};
    bool enum_ok = vals.size() >= 6;
    double worst = 0.0;
    for (int i = 0; enum_ok && i < 6; ++i) {
      worst = std::max(worst, std::abs(vals[size_t(i)] - expected[i]));
      enum_ok = enum_ok && worst < 1e-9;
    }
    CriticalQuery dq;  // default tolerance 1e-9, auto-enlarged bounds
    const bool members_ok =
        is_critical(2.0 * kPi, dq) &&
        is_critical(2.0 * kPi * std::sqrt(7.0 / 3.0), dq);
    const bool non_members_ok = !is_critical(1.0, dq) &&
                                !is_critical(3.0, dq) && !is_critical(5.0, dq);
    report(9, enum_ok && members_ok && non_members_ok,
           fmt("first six lattice values match closed forms to %.1e; members "
               "2*pi and 2*pi*sqrt(7/3)=%.9f detected at 1e-9; lengths "
               "1, 3, 5 correctly rejected",
               worst, 2.0 * kPi * std::sqrt(7.0 / 3.0)));
  });

  // --------------------------------------------------------- criterion 10
  // Determinism: the same config produces byte-identical trajectory, summary
  // and kernel files on repeated runs.
  guarded(10, [&] {
    const fs::path root = fs::temp_directory_path() / "kdvb_acceptance";
    fs::remove_all(root);
    fs::create_directories(root);
    const nlohmann::json cfg{
        {"kind", "simulate"},
        {"L", 1.0},
        {"n", 41},
        {"dt", 5e-3},
        {"T", 0.2},
        {"lambda", 1.0},
        {"dynamics", "nonlinear"},
        {"control", "closed"},
        {"bc_variant", "controlled"},
        {"initial",
         nlohmann::json{{"kind", "sine_mode"}, {"m", 1}, {"amplitude", 0.01}}}};
    const std::string cfg_path = (root / "cfg.json").string();
    {
      std::ofstream out(cfg_path);
      out << cfg.dump(2);
    }
    bool same = true;
    std::string parts;
    {
      RunContext c1{(root / "a").string(), cfg_path, "", 1};
      RunContext c2{(root / "b").string(), cfg_path, "", 1};
      fs::create_directories(c1.out_dir);
      fs::create_directories(c2.out_dir);
      if (run_simulate(cfg_path, c1) != 0 || run_simulate(cfg_path, c2) != 0) {
        throw std::runtime_error("determinism runs did not both succeed");
      }
      const bool csv_same = slurp(c1.out_dir + "/trajectory.csv") ==
                            slurp(c2.out_dir + "/trajectory.csv");
      const bool sum_same = slurp(c1.out_dir + "/summary.json") ==
                            slurp(c2.out_dir + "/summary.json");
      same = csv_same && sum_same;
      parts = fmt("trajectory bytes %s, summary bytes %s",
                  csv_same ? "identical" : "DIFFER",
                  sum_same ? "identical" : "DIFFER");
    }
    {
      const Grid1D g = make_grid(1.0, 41);
      const KernelPair a = fitted_kernel_pair(g, 1.0);
      const KernelPair b = fitted_kernel_pair(g, 1.0);
      write_kernel_json((root / "ka.json").string(), a);
      write_kernel_json((root / "kb.json").string(), b);
      const bool kernel_same =
          slurp((root / "ka.json").string()) ==
          slurp((root / "kb.json").string());
      same = same && kernel_same;
      parts += fmt(", kernel bytes %s", kernel_same ? "identical" : "DIFFER");
    }
    fs::remove_all(root);
    report(10, same, fmt("repeated runs from one config: %s", parts.c_str()));
  });

  if (fails == 0) {
    std::printf("acceptance: all 10 criteria pass\n");
  } else {
    std::printf("acceptance: %d of 10 criteria pass, %d fail (criteria %s)\n",
                10 - fails, fails, failed_ids.c_str());
  }
  return fails;
}
