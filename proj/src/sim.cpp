#include "kdvb/sim.hpp"

#include <cmath>
#include <stdexcept>

#include "kdvb/transform.hpp"

namespace kdvb {

namespace {

constexpr double kBlowUpMagnitude = 1e6;
constexpr int kLiftIterations = 50;

struct BcRow {
  int row;
  std::vector<std::pair<int, double>> coeffs;
};

// Rows replaced in the implicit matrix: Dirichlet values at the four edges,
// one-sided eta_x at x=0 and w_x at x=L (second order).
std::vector<BcRow> boundary_rows(int n, double h) {
  const double c = 1.0 / (2.0 * h);
  std::vector<BcRow> bc;
  bc.push_back({0, {{0, 1.0}}});
  bc.push_back({1, {{0, -3.0 * c}, {1, 4.0 * c}, {2, -1.0 * c}}});
  bc.push_back({n - 1, {{n - 1, 1.0}}});
  bc.push_back({n, {{n, 1.0}}});
  bc.push_back({2 * n - 2,
                {{n + n - 3, 1.0 * c}, {n + n - 2, -4.0 * c},
                 {n + n - 1, 3.0 * c}}});
  bc.push_back({2 * n - 1, {{2 * n - 1, 1.0}}});
  return bc;
}

}  // namespace

VectorXd InitialField::evaluate(const Grid1D& g) const {
  const int n = g.n();
  const double L = g.length_L;
  VectorXd r = VectorXd::Zero(n);
  switch (kind) {
    case Kind::zero:
      break;
    case Kind::sine_mode:
      for (int i = 0; i < n; ++i) {
        r(i) = amplitude * std::sin(mode * M_PI * g.x(i) / L);
      }
      break;
    case Kind::gaussian: {
      for (int i = 0; i < n; ++i) {
        const double dx = g.x(i) - center;
        r(i) = amplitude * std::exp(-dx * dx / (2.0 * width * width));
      }
      // taper to zero endpoints by removing the linear blend
      const double r0 = r(0);
      const double rL = r(n - 1);
      for (int i = 0; i < n; ++i) {
        const double th = g.x(i) / L;
        r(i) -= (1.0 - th) * r0 + th * rL;
      }
      break;
    }
    case Kind::explicit_values:
      if (static_cast<int>(values.size()) != n) {
        throw std::invalid_argument(
            "initial data: explicit value list length does not match n");
      }
      for (int i = 0; i < n; ++i) {
        r(i) = values[static_cast<size_t>(i)];
      }
      break;
  }
  return r;
}

SparseOperator build_linear_operator(const Grid1D& g, BcVariant variant) {
  (void)variant;  // both variants share the same coefficient rows
  const int n = g.n();
  SparseOperator D = d3_matrix(g) + d1_matrix(g);
  const std::vector<BcRow> bc = boundary_rows(n, g.h());
  std::vector<bool> is_bc(static_cast<size_t>(2 * n), false);
  for (const BcRow& row : bc) {
    is_bc[static_cast<size_t>(row.row)] = true;
  }
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<size_t>(D.nonZeros()) * 2 + 16);
  for (int o = 0; o < D.outerSize(); ++o) {
    for (SparseOperator::InnerIterator it(D, o); it; ++it) {
      const int r = static_cast<int>(it.row());
      const int c = static_cast<int>(it.col());
      if (!is_bc[static_cast<size_t>(r)]) {
        t.emplace_back(r, c + n, it.value());
      }
      if (!is_bc[static_cast<size_t>(r + n)]) {
        t.emplace_back(r + n, c, it.value());
      }
    }
  }
  for (const BcRow& row : bc) {
    for (const auto& [cidx, v] : row.coeffs) {
      t.emplace_back(row.row, cidx, v);
    }
  }
  SparseOperator A(2 * n, 2 * n);
  A.setFromTriplets(t.begin(), t.end());
  return A;
}

VectorXd smooth_random_state(Lcg& rng, const Grid1D& g) {
  const int n = g.n();
  VectorXd r = VectorXd::Zero(n);
  for (int m = 1; m <= 5; ++m) {
    const double a = 2.0 * rng.next() - 1.0;
    for (int i = 0; i < n; ++i) {
      r(i) += a * std::sin(m * M_PI * g.x(i) / g.length_L);
    }
  }
  return r;
}

Trajectory simulate(const SimConfig& cfg, const KernelPair* kp) {
  const bool closed = cfg.control == Control::closed_loop;
  if (closed && kp == nullptr) {
    throw std::invalid_argument("simulate: closed loop requires a kernel pair");
  }
  if (cfg.dt <= 0.0 || cfg.T <= 0.0) {
    throw std::invalid_argument("simulate: dt and T must be positive");
  }
  if (cfg.record_every < 1) {
    throw std::invalid_argument("simulate: record_every must be >= 1");
  }
  const Grid1D g = make_grid(cfg.L, cfg.n);
  const int n = g.n();
  const double h = g.h();
  const double dt = cfg.dt;
  const VectorXd wq = trapezoid_weights(g);
  const MatrixXd D = MatrixXd(d3_matrix(g)) + MatrixXd(d1_matrix(g));
  const MatrixXd D1 = MatrixXd(d1_matrix(g));

  MatrixXd A = MatrixXd::Zero(2 * n, 2 * n);
  A.topRightCorner(n, n) = D;
  A.bottomLeftCorner(n, n) = D;
  MatrixXd Mp = MatrixXd::Identity(2 * n, 2 * n) + 0.5 * dt * A;
  MatrixXd Mm = MatrixXd::Identity(2 * n, 2 * n) - 0.5 * dt * A;
  const std::vector<BcRow> bc = boundary_rows(n, h);
  std::vector<bool> is_bc(static_cast<size_t>(2 * n), false);
  for (const BcRow& row : bc) {
    Mp.row(row.row).setZero();
    Mm.row(row.row).setZero();
    for (const auto& [cidx, v] : row.coeffs) {
      Mp(row.row, cidx) = v;
    }
    is_bc[static_cast<size_t>(row.row)] = true;
  }
  const int rf = 1;
  const int rg = 2 * n - 2;

  // Feedback functionals on the stacked state: f = gf . z, g = gg . z.
  VectorXd gf = VectorXd::Zero(2 * n);
  VectorXd gg = VectorXd::Zero(2 * n);
  MatrixXd Kh, Sh;
  if (closed) {
    gf.head(n) = wq.cwiseProduct(kp->trace_kx0);
    gf.tail(n) = wq.cwiseProduct(kp->trace_sx0);
    gg.head(n) = wq.cwiseProduct(kp->trace_sxL);
    gg.tail(n) = wq.cwiseProduct(kp->trace_kxL);
    if (cfg.coupling == FeedbackCoupling::implicit_rows) {
      Mp.row(rf) -= gf.transpose();
      Mp.row(rg) -= gg.transpose();
    }
    Kh = apply_matrix(kp->k_vals, wq);
    Sh = apply_matrix(kp->s_vals, wq);
  }
  Eigen::PartialPivLU<MatrixXd> lu(Mp);

  VectorXd z(2 * n);
  z.head(n) = cfg.init.eta.evaluate(g);
  z.tail(n) = cfg.init.w.evaluate(g);
  // Consistent boundary lift of the initial state: Dirichlet edges exactly
  // zero, Neumann rows satisfied (iterated in closed loop because the
  // feedback functionals touch the lifted entries themselves).
  z(0) = 0.0;
  z(n - 1) = 0.0;
  z(n) = 0.0;
  z(2 * n - 1) = 0.0;
  if (closed) {
    for (int it = 0; it < kLiftIterations; ++it) {
      z(1) = (z(2) + 2.0 * h * gf.dot(z)) / 4.0;
      z(2 * n - 2) = (z(2 * n - 3) - 2.0 * h * gg.dot(z)) / 4.0;
    }
  } else {
    z(1) = z(2) / 4.0;
    z(2 * n - 2) = z(2 * n - 3) / 4.0;
  }

  Trajectory traj;
  traj.dynamics = cfg.dynamics;
  traj.control = cfg.control;
  traj.dt_record = cfg.record_every * dt;

  auto record = [&](int step_index, const VectorXd& state) {
    const auto eta = state.head(n);
    const auto w = state.tail(n);
    const double E =
        0.5 * (wq.dot(eta.cwiseAbs2()) + wq.dot(w.cwiseAbs2()));
    traj.times.push_back(step_index * dt);
    traj.energies.push_back(E);
    traj.x0_norms.push_back(std::sqrt(2.0 * E));
    if (closed) {
      traj.controls_f.push_back(gf.dot(state));
      traj.controls_g.push_back(gg.dot(state));
      const VectorXd u = eta - Kh * eta - Sh * w;
      const VectorXd v = w - Kh * w - Sh * eta;
      traj.target_norms.push_back(
          std::sqrt(wq.dot(u.cwiseAbs2()) + wq.dot(v.cwiseAbs2())));
    } else {
      traj.controls_f.push_back(0.0);
      traj.controls_g.push_back(0.0);
    }
    if (cfg.keep_snapshots) {
      traj.snapshots.push_back(state);
    }
  };

  record(0, z);
  const int steps = static_cast<int>(std::lround(cfg.T / dt));
  VectorXd rhs(2 * n);
  for (int step = 0; step < steps; ++step) {
    rhs.noalias() = Mm * z;
    if (cfg.dynamics == Dynamics::nonlinear) {
      const auto eta = z.head(n);
      const auto w = z.tail(n);
      VectorXd Ne = -(D1 * eta.cwiseProduct(w));
      VectorXd Nw = -w.cwiseProduct(D1 * w);
      for (int i = 0; i < n; ++i) {
        if (!is_bc[static_cast<size_t>(i)]) {
          rhs(i) += dt * Ne(i);
        }
        if (!is_bc[static_cast<size_t>(n + i)]) {
          rhs(n + i) += dt * Nw(i);
        }
      }
    }
    double f_now = 0.0;
    double g_now = 0.0;
    if (closed && cfg.coupling == FeedbackCoupling::lagged_explicit) {
      f_now = gf.dot(z);
      g_now = gg.dot(z);
    }
    for (const BcRow& row : bc) {
      if (row.row == rf) {
        rhs(row.row) = f_now;
      } else if (row.row == rg) {
        rhs(row.row) = g_now;
      } else {
        rhs(row.row) = 0.0;
      }
    }
    z = lu.solve(rhs);
    if (!z.allFinite() || z.cwiseAbs().maxCoeff() > kBlowUpMagnitude) {
      traj.failed = true;
      traj.fail_step = step;
      traj.fail_reason = "state magnitude exceeded 1e6 at step " +
                         std::to_string(step) + " (time " +
                         std::to_string((step + 1) * dt) + ")";
      return traj;
    }
    if ((step + 1) % cfg.record_every == 0) {
      record(step + 1, z);
    }
  }
  return traj;
}

}  // namespace kdvb
