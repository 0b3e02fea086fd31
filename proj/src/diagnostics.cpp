#include "kdvb/diagnostics.hpp"

#include <cmath>
#include <stdexcept>

#include "kdvb/linalg.hpp"
#include "kdvb/transform.hpp"

namespace kdvb {

double energy(const VectorXd& eta, const VectorXd& w, const Grid1D& g) {
  const VectorXd wq = trapezoid_weights(g);
  return 0.5 * (wq.dot(eta.cwiseAbs2()) + wq.dot(w.cwiseAbs2()));
}

DecayFit fit_decay_rate(const std::vector<double>& times,
                        const std::vector<double>& series, double t_start,
                        double t_end) {
  if (times.size() != series.size()) {
    throw std::invalid_argument("fit_decay_rate: series length mismatch");
  }
  std::vector<double> tt;
  std::vector<double> yy;
  for (size_t i = 0; i < times.size(); ++i) {
    if (times[i] >= t_start - 1e-12 && times[i] <= t_end + 1e-12 &&
        series[i] > 0.0) {
      tt.push_back(times[i]);
      yy.push_back(std::log(series[i]));
    }
  }
  if (tt.size() < 10) {
    throw std::invalid_argument(
        "fit_decay_rate: need at least 10 positive samples in the window");
  }
  const Eigen::Index ns = static_cast<Eigen::Index>(tt.size());
  MatrixXd A(ns, 2);
  VectorXd y(ns);
  for (Eigen::Index i = 0; i < ns; ++i) {
    A(i, 0) = tt[static_cast<size_t>(i)];
    A(i, 1) = 1.0;
    y(i) = yy[static_cast<size_t>(i)];
  }
  const VectorXd coef = lstsq_min_norm(A, y);
  const VectorXd pred = A * coef;
  const double ss_res = (y - pred).squaredNorm();
  const double ss_tot = (y.array() - y.mean()).square().sum();
  DecayFit fit;
  fit.sigma = -coef(0);
  fit.C_fit = std::exp(coef(1));
  fit.r_squared = ss_tot > 0.0 ? 1.0 - ss_res / ss_tot : 1.0;
  fit.t_start = t_start;
  fit.t_end = t_end;
  return fit;
}

DecayFit fit_decay_rate(const Trajectory& traj, double t_start, double t_end) {
  DecayFit fit = fit_decay_rate(traj.times, traj.x0_norms, t_start, t_end);
  if (!traj.x0_norms.empty() && traj.x0_norms.front() > 0.0) {
    fit.C_fit /= traj.x0_norms.front();
  }
  return fit;
}

StabilityConstants stability_constants(const KernelPair& kp) {
  const Grid1D& g = kp.grid.gx;
  const int n = g.n();
  const VectorXd wq = trapezoid_weights(g);
  const MatrixXd D1 = MatrixXd(d1_matrix(g));

  InverseOperators ops = build_inverse_operators(kp);
  // Weighted operator norms of the inverse factors via power iteration on
  // the inverse action (never forming the dense inverses). The adjoint
  // action uses a second factorization of the transpose.
  const MatrixXd I = MatrixXd::Identity(n, n);
  Eigen::PartialPivLU<MatrixXd> lu_pt((I - (ops.Kh + ops.Sh)).transpose().eval());
  Eigen::PartialPivLU<MatrixXd> lu_mt((I - (ops.Kh - ops.Sh)).transpose().eval());
  const VectorXd sw = wq.array().sqrt();
  auto inv_norm = [&](const Eigen::PartialPivLU<MatrixXd>& fwd,
                      const Eigen::PartialPivLU<MatrixXd>& adj) {
    auto apply = [&](const VectorXd& x) {
      return VectorXd(sw.cwiseProduct(fwd.solve(x.cwiseQuotient(sw))));
    };
    auto apply_adj = [&](const VectorXd& x) {
      return VectorXd(adj.solve(sw.cwiseProduct(x)).cwiseQuotient(sw));
    };
    return opnorm_power(apply, apply_adj, n, 1e-6);
  };
  const double nP = inv_norm(ops.factor_plus, lu_pt);
  const double nM = inv_norm(ops.factor_minus, lu_mt);

  StabilityConstants c;
  c.C1 = 0.5 * (nP * nP + nM * nM);
  c.cond_plus = ops.cond_plus;
  c.cond_minus = ops.cond_minus;

  // Forward block [[I-Kh, -Sh], [-Sh, I-Kh]] in the stacked weighted metric.
  MatrixXd Fwd = MatrixXd::Zero(2 * n, 2 * n);
  const MatrixXd ImK = MatrixXd::Identity(n, n) - ops.Kh;
  Fwd.topLeftCorner(n, n) = ImK;
  Fwd.bottomRightCorner(n, n) = ImK;
  Fwd.topRightCorner(n, n) = -ops.Sh;
  Fwd.bottomLeftCorner(n, n) = -ops.Sh;
  VectorXd wq2(2 * n);
  wq2.head(n) = wq;
  wq2.tail(n) = wq;
  c.M_fwd = weighted_opnorm(Fwd, wq2);

  const MatrixXd kx = D1 * kp.k_vals;
  const MatrixXd sx = D1 * kp.s_vals;
  const MatrixXd ky = kp.k_vals * D1.transpose();
  const MatrixXd sy = kp.s_vals * D1.transpose();

  auto max_row_norm = [&](const MatrixXd& M) {
    double best = 0.0;
    for (int i = 0; i < n; ++i) {
      best = std::max(
          best, std::sqrt(wq.dot(M.row(i).transpose().cwiseAbs2().eval())));
    }
    return best;
  };
  auto max_col_norm = [&](const MatrixXd& M) {
    double best = 0.0;
    for (int j = 0; j < n; ++j) {
      best = std::max(best, std::sqrt(wq.dot(M.col(j).cwiseAbs2())));
    }
    return best;
  };
  const double norm_k = std::sqrt(wq.dot((kp.k_vals.cwiseAbs2() * wq)));
  const double norm_s = std::sqrt(wq.dot((kp.s_vals.cwiseAbs2() * wq)));
  c.K1 = max_row_norm(kx) + max_row_norm(sx);
  c.K2 = max_col_norm(ky) * (1.0 + norm_k + norm_s);
  c.K3 = 0.5 * max_col_norm(sy) * (1.0 + norm_k + norm_s);
  return c;
}

std::pair<VectorXd, VectorXd> target_sources(const KernelPair& kp,
                                             const VectorXd& eta,
                                             const VectorXd& w) {
  const Grid1D& g = kp.grid.gx;
  const VectorXd wq = trapezoid_weights(g);
  const MatrixXd D1 = MatrixXd(d1_matrix(g));
  const MatrixXd ky = kp.k_vals * D1.transpose();
  const MatrixXd sy = kp.s_vals * D1.transpose();
  const VectorXd ew = eta.cwiseProduct(w);
  const VectorXd w2 = w.cwiseAbs2();
  VectorXd psi = -(D1 * ew) - ky * wq.cwiseProduct(ew) -
                 0.5 * (sy * wq.cwiseProduct(w2));
  VectorXd phi = -w.cwiseProduct(D1 * w) - sy * wq.cwiseProduct(ew) -
                 0.5 * (ky * wq.cwiseProduct(w2));
  return {psi, phi};
}

double target_residual(const Trajectory& traj, const KernelPair& kp,
                       double lambda) {
  if (traj.snapshots.size() < 3) {
    throw std::invalid_argument(
        "target_residual: need at least 3 recorded snapshots");
  }
  const Grid1D& g = kp.grid.gx;
  const int n = g.n();
  const double dtr = traj.dt_record;
  const VectorXd wq = trapezoid_weights(g);
  const MatrixXd D = MatrixXd(d3_matrix(g)) + MatrixXd(d1_matrix(g));
  const MatrixXd Kh = apply_matrix(kp.k_vals, wq);
  const MatrixXd Sh = apply_matrix(kp.s_vals, wq);
  const bool nonlinear = traj.dynamics == Dynamics::nonlinear;

  const size_t ns = traj.snapshots.size();
  std::vector<VectorXd> us(ns);
  std::vector<VectorXd> vs(ns);
  for (size_t j = 0; j < ns; ++j) {
    const auto eta = traj.snapshots[j].head(n);
    const auto w = traj.snapshots[j].tail(n);
    us[j] = eta - Kh * eta - Sh * w;
    vs[j] = w - Kh * w - Sh * eta;
  }
  double worst = 0.0;
  for (size_t j = 1; j + 1 < ns; ++j) {
    const VectorXd u_t = (us[j + 1] - us[j - 1]) / (2.0 * dtr);
    const VectorXd v_t = (vs[j + 1] - vs[j - 1]) / (2.0 * dtr);
    VectorXd ru = u_t + D * vs[j] + lambda * us[j];
    VectorXd rv = v_t + D * us[j] + lambda * vs[j];
    if (nonlinear) {
      const auto eta = traj.snapshots[j].head(n);
      const auto w = traj.snapshots[j].tail(n);
      auto [psi, phi] = target_sources(kp, eta, w);
      ru -= psi;
      rv -= phi;
    }
    for (int i = 2; i <= n - 3; ++i) {
      worst = std::max(worst, std::abs(ru(i)));
      worst = std::max(worst, std::abs(rv(i)));
    }
  }
  return worst;
}

}  // namespace kdvb
