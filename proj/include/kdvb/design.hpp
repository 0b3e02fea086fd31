#pragma once
// Production kernel construction. The controlled linearized plant is reduced
// to its free interior unknowns (the Dirichlet edges and the two Neumann
// rows eliminated), a one-shot Sylvester equation places the closed-loop
// spectrum exactly on Re = -lambda, and structured kernel arrays are fitted
// so that the induced state transform intertwines the closed loop with the
// damped target dynamics on the resolved frequency band. The boundary rows
// of the fitted arrays reproduce the designed feedback gains exactly.

#include <Eigen/Dense>

#include "kdvb/grid.hpp"
#include "kdvb/kernel.hpp"

namespace kdvb {

using Eigen::MatrixXcd;
using Eigen::VectorXcd;

// Reduced controlled plant and its designed feedback.
//   state ordering: [eta_2..eta_{n-2}; w_1..w_{n-3}], m = n-3 entries each;
//   eliminated rows: eta_1 = eta_2/4 + (h/2) f,  w_{n-2} = w_{n-3}/4 - (h/2) g.
struct ReducedDesign {
  int n = 0;       // full grid nodes
  int m = 0;       // n - 3 (per-field reduced size)
  double L = 0.0;
  double lambda = 0.0;
  double h = 0.0;
  MatrixXd A;      // 2m x 2m reduced drift
  MatrixXd B;      // 2m x 2  control influence (col 0: f, col 1: g)
  MatrixXd F;      // 2 x 2m  feedback gains (row 0: f, row 1: g)
  MatrixXd Acl;    // A + B F, spectrum on Re = -lambda
  VectorXcd ev_cl; // eigenvalues of Acl
  MatrixXcd V_cl;  // eigenvectors of Acl (unit columns)
  // Feedback gain rows scattered onto full-grid coupling vectors:
  //   f = ffe . eta + ffw . w,   g = gge . eta + ggw . w.
  VectorXd ffe, ffw, gge, ggw;
};

// Assemble the reduced plant, solve the placement Sylvester equation
// (A + lambda I) X - X A = B B^T, set F = -B^T X^{-1}, and diagonalize the
// closed loop. Throws std::invalid_argument for lambda <= 0 and
// std::runtime_error if X is numerically singular.
ReducedDesign design_reduced(const Grid1D& g, double lambda);

// Fit full-grid kernel arrays (k, s) to the designed closed loop: rows
// 2..n-3 from mode interpolation on the band 0 < Im(mu) <= omega_fit
// (minimum-norm least squares in quadrature-premultiplied unknowns, folded
// trace equations adjoining rows), rows 1 and n-2 pinned by the exact gain
// identities, edges zero. If worst_fit is non-null it receives the largest
// absolute fit-equation residual across rows.
KernelPair fitted_kernel_pair(const ReducedDesign& d, double omega_fit = 1000.0,
                              double* worst_fit = nullptr);
KernelPair fitted_kernel_pair(const Grid1D& g, double lambda,
                              double omega_fit = 1000.0,
                              double* worst_fit = nullptr);

// Orthogonal projection of a reduced state (length 2m) onto the span of the
// closed-loop modes with |Im(mu)| <= omega_max (real/imaginary parts,
// orthonormalized with a relative singular-value cutoff of 1e-8).
VectorXd band_limited_state(const ReducedDesign& d, const VectorXd& z_reduced,
                            double omega_max);

// Gather the interior windows of a full-grid state into the reduced ordering
// [eta_2..eta_{n-2}; w_1..w_{n-3}].
VectorXd reduce_state(int n, const VectorXd& eta, const VectorXd& w);

// Scatter a reduced state back onto full-grid fields; the eliminated and
// edge entries are left zero (the time stepper applies its consistent
// boundary lift before stepping).
void scatter_reduced_state(int n, const VectorXd& z_reduced, VectorXd& eta,
                           VectorXd& w);

}  // namespace kdvb
