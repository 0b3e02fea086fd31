#pragma once
// Post-hoc verification helpers: exponential-decay fits of recorded norm
// series, kernel-derived stability constants in the quadrature-weighted
// metric, and the discrete defect of the damped target identity along a
// simulated trajectory.

#include <vector>

#include "kdvb/grid.hpp"
#include "kdvb/kernel.hpp"
#include "kdvb/sim.hpp"

namespace kdvb {

struct DecayFit {
  double sigma = 0.0;      // fitted decay rate (series ~ C exp(-sigma t))
  double C_fit = 0.0;
  double r_squared = 0.0;
  double t_start = 0.0;
  double t_end = 0.0;
};

struct StabilityConstants {
  double K1 = 0.0;  // sup_x of the weighted L2 norms of k_x, s_x rows
  double K2 = 0.0;  // sup_y ||k_y|| growth factor
  double K3 = 0.0;  // sup_y ||s_y|| growth factor (halved)
  double C1 = 0.0;  // norm-equivalence constant: |z|^2 <= C1 |(u,v)|^2
  double M_fwd = 0.0;      // forward-transform operator norm (2n block)
  double cond_plus = 0.0;  // condition estimates of the inverse factors
  double cond_minus = 0.0;
};

double energy(const VectorXd& eta, const VectorXd& w, const Grid1D& g);

// Least-squares fit of log(series) over t in [t_start, t_end]; only strictly
// positive samples enter. Throws std::invalid_argument if fewer than 10
// usable samples remain.
DecayFit fit_decay_rate(const std::vector<double>& times,
                        const std::vector<double>& series, double t_start,
                        double t_end);

// Fit of the recorded state-norm series of a trajectory; C_fit is
// additionally normalized by the initial norm.
DecayFit fit_decay_rate(const Trajectory& traj, double t_start, double t_end);

// Kernel-derived constants in the trapezoid-weighted metric. C1 comes from
// the inverse factors (power iteration on the weighted operators), M_fwd
// from the stacked forward block. The K's are reported, not certified: they
// bound the source terms in the damped target identity.
StabilityConstants stability_constants(const KernelPair& kp);

// Quadratic source terms of the damped target identity for the nonlinear
// flow, evaluated at one state:
//   psi = -(eta w)_x - int k_y (eta w) - (1/2) int s_y w^2
//   phi = -w w_x     - int s_y (eta w) - (1/2) int k_y w^2
std::pair<VectorXd, VectorXd> target_sources(const KernelPair& kp,
                                             const VectorXd& eta,
                                             const VectorXd& w);

// Max-norm defect of  u_t + v_x + v_xxx + lambda u  (and the v-counterpart)
// over interior nodes 2..n-3 and all interior snapshot times, with u_t from
// centered differences of the recorded snapshots. The quadratic sources are
// subtracted for nonlinear trajectories; the linear flow has none. Requires
// a trajectory recorded with snapshots at uniform spacing dt_record. The
// rate is passed explicitly so a deliberately wrong value can be probed.
double target_residual(const Trajectory& traj, const KernelPair& kp,
                       double lambda);

}  // namespace kdvb
