#pragma once
// The stationary kernel pair (k, s) on the square [0,L]^2 and its boundary
// derivative traces. Two construction routes exist:
//   * the direct collocation route in this header (scalar third-order
//     problems with a diagonal line source, composed as k=(v+u)/2,
//     s=(v-u)/2) — kept as specified and measured honestly by the
//     acceptance suite, which shows its discrete solution diverging under
//     refinement;
//   * the production route in design.hpp (closed-loop gain design plus a
//     structured kernel fit), used for feedback synthesis and simulation.

#include <utility>

#include "kdvb/grid.hpp"

namespace kdvb {

struct KernelPair {
  Grid2D grid;
  double lambda = 0.0;
  MatrixXd k_vals;       // k(x_i, y_j)
  MatrixXd s_vals;       // s(x_i, y_j)
  VectorXd trace_kx0;    // d/dx k(0, y_j)
  VectorXd trace_sx0;    // d/dx s(0, y_j)
  VectorXd trace_kxL;    // d/dx k(L, y_j)
  VectorXd trace_sxL;    // d/dx s(L, y_j)
};

struct ScalarKernelProblem {
  Grid2D grid;
  double lambda = 0.0;
  int sign = +1;  // +1: reaction +lambda, source +lambda/h on the diagonal
                  // -1: reaction -lambda, source -lambda/h
};

// Square collocation system over the interior nodes (1 <= i,j <= n-2):
// third+first derivative operators in each direction (Dirichlet edges
// substituted; mirror-ghost elimination of the y-Neumann conditions at the
// first and last interior y-rows) plus sign*lambda on the identity. The
// right-hand side carries the discrete diagonal line source sign*lambda/h.
// Unknown ordering is row-major over (i, j).
std::pair<SparseOperator, VectorXd> assemble_scalar_kernel(
    const ScalarKernelProblem& p);

// Sparse-LU solve of the assembled system, scattered back to an n-by-n
// matrix with zero boundary values. If rel_residual is non-null it receives
// ||A z - b|| / ||b||.
MatrixXd solve_scalar_kernel(const ScalarKernelProblem& p,
                             double* rel_residual = nullptr);

// k = (v+u)/2, s = (v-u)/2, plus second-order one-sided x-derivative traces
// at x=0 and x=L.
KernelPair compose_kernel_pair(const MatrixXd& v, const MatrixXd& u,
                               const ScalarKernelProblem& meta);

// Convenience: solve both scalar problems (signs +1 and -1) and compose.
// max_rel_residual (optional) receives the worse of the two solve residuals.
KernelPair solve_kernel_pair_collocation(const Grid2D& grid, double lambda,
                                         double* max_rel_residual = nullptr);

// Max-norm collocation residual of the coupled pair equations evaluated at
// interior nodes more than `exclusion_band` cells away from the diagonal
// (where the line source lives). Returns (k-equation, s-equation) maxima.
std::pair<double, double> kernel_residual(const KernelPair& kp,
                                          int exclusion_band);

// One-sided y-derivative magnitude at the y-edges (diagnostic for the
// homogeneous Neumann conditions).
double neumann_trace_y(const MatrixXd& K, double h);

}  // namespace kdvb
