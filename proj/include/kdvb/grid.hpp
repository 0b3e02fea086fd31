#pragma once
// Uniform 1-D/2-D grids, finite-difference derivative operators, quadrature
// weights, and the discrete state norm shared by every other module.

#include <Eigen/Dense>
#include <Eigen/Sparse>
#include <vector>

namespace kdvb {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using SparseOperator = Eigen::SparseMatrix<double>;

struct Grid1D {
  double length_L = 0.0;
  int node_count_n = 0;
  double spacing_h = 0.0;
  std::vector<double> nodes;

  int n() const { return node_count_n; }
  double h() const { return spacing_h; }
  double x(int i) const { return nodes[static_cast<size_t>(i)]; }
};

// The kernel domain is a square: both directions share one grid.
struct Grid2D {
  Grid1D gx;
  Grid1D gy;
};

// Throws std::invalid_argument naming the offending parameter.
Grid1D make_grid(double L, int n);
Grid2D make_grid2(const Grid1D& g);

// First derivative: centered interior rows, second-order one-sided rows at
// both ends.
SparseOperator d1_matrix(const Grid1D& g);

// Third derivative: centered 5-point stencil on rows 2..n-3, one-sided
// 5-node stencils (Taylor-matched, order >= 1) on the four near-boundary
// rows; the last two rows are the antisymmetric mirrors of the first two.
SparseOperator d3_matrix(const Grid1D& g);

// Trapezoid weights (h/2, h, ..., h, h/2); sum equals L.
VectorXd trapezoid_weights(const Grid1D& g);

// Discrete [L2(0,L)]^2 norm of the state pair: sqrt(sum w_i (eta_i^2+w_i^2)).
double x0_norm(const VectorXd& eta, const VectorXd& w, const Grid1D& g);

}  // namespace kdvb
