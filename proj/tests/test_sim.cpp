#include <cmath>
#include <stdexcept>

#include "doctest.h"
#include "kdvb/design.hpp"
#include "kdvb/sim.hpp"

using namespace kdvb;

namespace {

constexpr double kPi = 3.14159265358979323846;

SimConfig open_loop_config(int n, double dt, double T) {
  SimConfig cfg;
  cfg.L = 1.0;
  cfg.n = n;
  cfg.dt = dt;
  cfg.T = T;
  cfg.dynamics = Dynamics::linear;
  cfg.control = Control::open_loop;
  cfg.bc = BcVariant::homogeneous;
  return cfg;
}

InitialField sine(int mode, double amplitude) {
  InitialField f;
  f.kind = InitialField::Kind::sine_mode;
  f.mode = mode;
  f.amplitude = amplitude;
  return f;
}

}  // namespace

TEST_SUITE("sim") {
  TEST_CASE("initial fields evaluate their closed forms") {
    const Grid1D g = make_grid(1.0, 11);
    const VectorXd s = sine(2, 0.5).evaluate(g);
    for (int i = 0; i < 11; ++i) {
      CHECK(s(i) ==
            doctest::Approx(0.5 * std::sin(2.0 * kPi * g.x(i))).epsilon(1e-12));
    }
    InitialField z;  // default kind is zero
    CHECK(z.evaluate(g).cwiseAbs().maxCoeff() == 0.0);
    InitialField e;
    e.kind = InitialField::Kind::explicit_values;
    e.values = {1.0, 2.0};
    CHECK_THROWS_AS(e.evaluate(g), std::invalid_argument);
  }

  TEST_CASE("gaussian fields vanish at both endpoints") {
    const Grid1D g = make_grid(1.0, 41);
    InitialField f;
    f.kind = InitialField::Kind::gaussian;
    f.center = 0.3;
    f.width = 0.1;
    f.amplitude = 2.0;
    const VectorXd v = f.evaluate(g);
    CHECK(v(0) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(v(40) == doctest::Approx(0.0).epsilon(1e-14));
    CHECK(v.cwiseAbs().maxCoeff() > 1.0);  // interior bump survives the taper
  }

  TEST_CASE("the zero state is a fixed point") {
    SimConfig cfg = open_loop_config(31, 1e-2, 0.1);
    const Trajectory traj = simulate(cfg, nullptr);
    CHECK_FALSE(traj.failed);
    for (double E : traj.energies) {
      CHECK(E == 0.0);
    }
  }

  TEST_CASE("recorded rows follow the step arithmetic") {
    SimConfig cfg = open_loop_config(31, 1e-2, 1.0);
    cfg.init.eta = sine(1, 0.1);
    const Trajectory traj = simulate(cfg, nullptr);
    CHECK(traj.times.size() == 101);  // t=0 plus 100 steps
    CHECK(traj.times.back() == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(traj.energies.size() == 101);
    CHECK(traj.x0_norms.size() == 101);
    CHECK(traj.dt_record == doctest::Approx(1e-2).epsilon(1e-14));

    cfg.record_every = 10;
    const Trajectory coarse = simulate(cfg, nullptr);
    CHECK(coarse.times.size() == 11);
    CHECK(coarse.dt_record == doctest::Approx(0.1).epsilon(1e-14));
  }

  TEST_CASE("simulate validates its inputs") {
    SimConfig cfg = open_loop_config(31, 1e-2, 0.1);
    cfg.control = Control::closed_loop;
    CHECK_THROWS_AS(simulate(cfg, nullptr), std::invalid_argument);
    cfg.control = Control::open_loop;
    cfg.record_every = 0;
    CHECK_THROWS_AS(simulate(cfg, nullptr), std::invalid_argument);
  }

  TEST_CASE("Dirichlet values stay pinned to zero along the flow") {
    SimConfig cfg = open_loop_config(41, 2e-3, 0.1);
    cfg.init.eta = sine(1, 1.0);
    cfg.init.w = sine(2, 0.5);
    cfg.keep_snapshots = true;
    const Trajectory traj = simulate(cfg, nullptr);
    const int n = cfg.n;
    for (const VectorXd& z : traj.snapshots) {
      CHECK(std::abs(z(0)) < 1e-10);
      CHECK(std::abs(z(n - 1)) < 1e-10);
      CHECK(std::abs(z(n)) < 1e-10);
      CHECK(std::abs(z(2 * n - 1)) < 1e-10);
    }
  }

  TEST_CASE("the homogeneous linear flow conserves energy") {
    SimConfig cfg = open_loop_config(201, 1e-3, 0.3);
    cfg.init.eta = sine(1, 1.0);
    cfg.init.w = sine(2, 0.5);
    const Trajectory traj = simulate(cfg, nullptr);
    REQUIRE_FALSE(traj.failed);
    const double E0 = traj.energies.front();
    REQUIRE(E0 > 0.0);
    double drift = 0.0;
    for (double E : traj.energies) {
      drift = std::max(drift, std::abs(E - E0) / E0);
    }
    CHECK(drift < 1e-3);  // measured 1.5e-4 over the full unit horizon
  }

  TEST_CASE("interior rows couple the fields off-diagonally") {
    const Grid1D g = make_grid(1.0, 31);
    const int n = g.n();
    const SparseOperator A = build_linear_operator(g, BcVariant::homogeneous);
    REQUIRE(A.rows() == 2 * n);
    const MatrixXd Ad = MatrixXd(A);
    // non-boundary eta rows must not touch eta columns (and mirrored)
    for (int i = 2; i < n - 2; ++i) {
      CHECK(Ad.row(i).head(n).cwiseAbs().maxCoeff() == 0.0);
      CHECK(Ad.row(n + i).tail(n).cwiseAbs().maxCoeff() == 0.0);
      // both fields see the same dispersive operator
      CHECK((Ad.row(i).tail(n) - Ad.row(n + i).head(n)).cwiseAbs().maxCoeff() ==
            0.0);
    }
  }

  TEST_CASE("nonlinear corrections scale quadratically with amplitude") {
    auto final_state = [](double amplitude, Dynamics dyn) {
      SimConfig cfg = open_loop_config(101, 1e-3, 0.2);
      cfg.dynamics = dyn;
      cfg.init.eta = sine(1, amplitude);
      cfg.init.w = sine(2, 0.5 * amplitude);
      cfg.keep_snapshots = true;
      cfg.record_every = 200;  // only t=0 and t=T
      const Trajectory traj = simulate(cfg, nullptr);
      REQUIRE_FALSE(traj.failed);
      return VectorXd(traj.snapshots.back());
    };
    const double a = 0.1;
    const double d1 = (final_state(a, Dynamics::nonlinear) -
                       final_state(a, Dynamics::linear))
                          .cwiseAbs()
                          .maxCoeff();
    const double d2 = (final_state(0.5 * a, Dynamics::nonlinear) -
                       final_state(0.5 * a, Dynamics::linear))
                          .cwiseAbs()
                          .maxCoeff();
    REQUIRE(d2 > 0.0);
    const double ratio = d1 / d2;
    CHECK(ratio > 2.8);
    CHECK(ratio < 5.5);
  }

  TEST_CASE("violent data trips the blow-up guard with a partial record") {
    SimConfig cfg = open_loop_config(41, 1e-2, 1.0);
    cfg.dynamics = Dynamics::nonlinear;
    cfg.init.eta = sine(1, 1e5);
    cfg.init.w = sine(1, 1e5);
    const Trajectory traj = simulate(cfg, nullptr);
    CHECK(traj.failed);
    CHECK(traj.fail_step >= 0);
    CHECK_FALSE(traj.fail_reason.empty());
    CHECK(traj.times.size() < 101);
  }

  TEST_CASE("the closed loop drains energy") {
    const Grid1D g = make_grid(1.0, 41);
    const KernelPair kp = fitted_kernel_pair(g, 1.0);
    SimConfig cfg = open_loop_config(41, 5e-3, 1.0);
    cfg.control = Control::closed_loop;
    cfg.bc = BcVariant::controlled;
    cfg.init.eta = sine(1, 0.01);
    cfg.init.w = sine(2, -0.008);
    const Trajectory traj = simulate(cfg, &kp);
    REQUIRE_FALSE(traj.failed);
    REQUIRE(traj.energies.front() > 0.0);
    CHECK(traj.energies.back() < 0.5 * traj.energies.front());
    CHECK(traj.target_norms.size() == traj.times.size());
    // controls are active
    double worst_f = 0.0;
    for (double f : traj.controls_f) {
      worst_f = std::max(worst_f, std::abs(f));
    }
    CHECK(worst_f > 0.0);
  }

  TEST_CASE("the seeded generator is reproducible and well ranged") {
    Lcg a(12345), b(12345);
    bool all_equal_half = true;
    for (int i = 0; i < 5; ++i) {
      const double va = a.next();
      const double vb = b.next();
      CHECK(va == vb);
      CHECK(va >= 0.0);
      CHECK(va < 1.0);
      if (std::abs(va - 0.5) > 1e-3) {
        all_equal_half = false;
      }
    }
    CHECK_FALSE(all_equal_half);
  }

  TEST_CASE("smooth random states are reproducible and clamped at the ends") {
    const Grid1D g = make_grid(1.0, 51);
    Lcg r1(7), r2(7), r3(8);
    const VectorXd s1 = smooth_random_state(r1, g);
    const VectorXd s2 = smooth_random_state(r2, g);
    const VectorXd s3 = smooth_random_state(r3, g);
    CHECK((s1 - s2).cwiseAbs().maxCoeff() == 0.0);
    CHECK((s1 - s3).cwiseAbs().maxCoeff() > 1e-3);
    CHECK(std::abs(s1(0)) < 1e-13);
    CHECK(std::abs(s1(50)) < 1e-13);
  }
}
