#include "kdvb/kernel.hpp"

#include <Eigen/SparseLU>
#include <cmath>
#include <stdexcept>
#include <string>
#include <vector>

namespace kdvb {

namespace {

// (d3 + d1) restricted to rows/cols 1..n-2 (Dirichlet ends dropped).
SparseOperator reduced_x_operator(const Grid1D& g) {
  const int n = g.n();
  MatrixXd D = MatrixXd(d3_matrix(g)) + MatrixXd(d1_matrix(g));
  MatrixXd Dr = D.block(1, 1, n - 2, n - 2);
  return Dr.sparseView();
}

// (d3 + d1) in y on the interior nodes with zero Dirichlet ends and
// mirror-ghost elimination of the homogeneous Neumann conditions at both
// edges. The ghost value comes from the one-sided zero-slope relation over
// {ghost, edge, first, second} nodes with the edge value already zero.
SparseOperator reduced_y_operator(const Grid1D& g) {
  const int n = g.n();
  const int m = n - 2;
  const double h = g.h();
  const double c3 = 1.0 / (2.0 * h * h * h);
  const double c1 = 1.0 / (2.0 * h);
  std::vector<Eigen::Triplet<double>> t;
  for (int j = 1; j < m - 1; ++j) {
    const int node = j + 1;
    const std::pair<int, double> d3s[4] = {
        {-2, -1.0}, {-1, 2.0}, {1, -2.0}, {2, 1.0}};
    for (const auto& [off, v] : d3s) {
      const int nb = node + off;
      if (nb >= 1 && nb <= n - 2) {
        t.emplace_back(j, nb - 1, v * c3);
      }
    }
    const std::pair<int, double> d1s[2] = {{-1, -1.0}, {1, 1.0}};
    for (const auto& [off, v] : d1s) {
      const int nb = node + off;
      if (nb >= 1 && nb <= n - 2) {
        t.emplace_back(j, nb - 1, v * c1);
      }
    }
  }
  // Ghost rows: zero slope at y=0 over {ghost,0,1,2} with value(0)=0 gives
  // ghost = 3*value(1) - value(2)/2; substituted into the centered stencils.
  t.emplace_back(0, 0, -3.0 * c3);
  t.emplace_back(0, 1, -1.5 * c3);
  if (m > 2) {
    t.emplace_back(0, 2, 1.0 * c3);
  }
  t.emplace_back(0, 1, 1.0 * c1);
  t.emplace_back(m - 1, m - 1, 3.0 * c3);
  t.emplace_back(m - 1, m - 2, 1.5 * c3);
  if (m > 2) {
    t.emplace_back(m - 1, m - 3, -1.0 * c3);
  }
  t.emplace_back(m - 1, m - 2, -1.0 * c1);
  SparseOperator Dy(m, m);
  Dy.setFromTriplets(t.begin(), t.end());
  return Dy;
}

void check_problem(const ScalarKernelProblem& p) {
  if (p.lambda == 0.0) {
    throw std::invalid_argument("scalar kernel problem: lambda must be nonzero");
  }
  if (p.sign != 1 && p.sign != -1) {
    throw std::invalid_argument("scalar kernel problem: sign must be +1 or -1");
  }
}

}  // namespace

std::pair<SparseOperator, VectorXd> assemble_scalar_kernel(
    const ScalarKernelProblem& p) {
  check_problem(p);
  const Grid1D& g = p.grid.gx;
  const int n = g.n();
  const int m = n - 2;
  SparseOperator Dx = reduced_x_operator(g);
  SparseOperator Dy = reduced_y_operator(g);

  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<size_t>(Dx.nonZeros()) * m +
            static_cast<size_t>(Dy.nonZeros()) * m + static_cast<size_t>(m) * m);
  for (int o = 0; o < Dx.outerSize(); ++o) {
    for (SparseOperator::InnerIterator it(Dx, o); it; ++it) {
      for (int j = 0; j < m; ++j) {
        t.emplace_back(static_cast<int>(it.row()) * m + j,
                       static_cast<int>(it.col()) * m + j, it.value());
      }
    }
  }
  for (int o = 0; o < Dy.outerSize(); ++o) {
    for (SparseOperator::InnerIterator it(Dy, o); it; ++it) {
      for (int i = 0; i < m; ++i) {
        t.emplace_back(i * m + static_cast<int>(it.row()),
                       i * m + static_cast<int>(it.col()), it.value());
      }
    }
  }
  const double react = p.sign * p.lambda;
  for (int idx = 0; idx < m * m; ++idx) {
    t.emplace_back(idx, idx, react);
  }
  SparseOperator A(m * m, m * m);
  A.setFromTriplets(t.begin(), t.end());

  VectorXd b = VectorXd::Zero(m * m);
  const double src = p.sign * p.lambda / g.h();
  for (int i = 0; i < m; ++i) {
    b(i * m + i) = src;
  }
  return {A, b};
}

MatrixXd solve_scalar_kernel(const ScalarKernelProblem& p,
                             double* rel_residual) {
  auto [A, b] = assemble_scalar_kernel(p);
  Eigen::SparseLU<SparseOperator> lu;
  lu.compute(A);
  if (lu.info() != Eigen::Success) {
    throw std::runtime_error(
        "solve_scalar_kernel: singular collocation system (n=" +
        std::to_string(p.grid.gx.n()) + ", lambda=" + std::to_string(p.lambda) +
        ", sign=" + std::to_string(p.sign) + ")");
  }
  VectorXd z = lu.solve(b);
  if (rel_residual != nullptr) {
    *rel_residual = (A * z - b).norm() / b.norm();
  }
  const int n = p.grid.gx.n();
  const int m = n - 2;
  MatrixXd Z = MatrixXd::Zero(n, n);
  for (int i = 0; i < m; ++i) {
    for (int j = 0; j < m; ++j) {
      Z(i + 1, j + 1) = z(i * m + j);
    }
  }
  return Z;
}

KernelPair compose_kernel_pair(const MatrixXd& v, const MatrixXd& u,
                               const ScalarKernelProblem& meta) {
  if (v.rows() != u.rows() || v.cols() != u.cols() ||
      v.rows() != meta.grid.gx.n()) {
    throw std::invalid_argument("compose_kernel_pair: shape mismatch");
  }
  KernelPair kp;
  kp.grid = meta.grid;
  kp.lambda = meta.lambda;
  kp.k_vals = 0.5 * (v + u);
  kp.s_vals = 0.5 * (v - u);
  const int n = meta.grid.gx.n();
  const double h = meta.grid.gx.h();
  // Second-order one-sided x-derivatives; the edge rows are Dirichlet-zero.
  kp.trace_kx0 =
      ((4.0 * kp.k_vals.row(1) - kp.k_vals.row(2)) / (2.0 * h)).transpose();
  kp.trace_sx0 =
      ((4.0 * kp.s_vals.row(1) - kp.s_vals.row(2)) / (2.0 * h)).transpose();
  kp.trace_kxL = ((-4.0 * kp.k_vals.row(n - 2) + kp.k_vals.row(n - 3)) /
                  (2.0 * h)).transpose();
  kp.trace_sxL = ((-4.0 * kp.s_vals.row(n - 2) + kp.s_vals.row(n - 3)) /
                  (2.0 * h)).transpose();
  return kp;
}

KernelPair solve_kernel_pair_collocation(const Grid2D& grid, double lambda,
                                         double* max_rel_residual) {
  ScalarKernelProblem pp{grid, lambda, +1};
  ScalarKernelProblem pm{grid, lambda, -1};
  double rv = 0.0;
  double ru = 0.0;
  MatrixXd v = solve_scalar_kernel(pp, &rv);
  MatrixXd u = solve_scalar_kernel(pm, &ru);
  if (max_rel_residual != nullptr) {
    *max_rel_residual = std::max(rv, ru);
  }
  return compose_kernel_pair(v, u, pp);
}

std::pair<double, double> kernel_residual(const KernelPair& kp,
                                          int exclusion_band) {
  if (exclusion_band < 2) {
    throw std::invalid_argument("kernel_residual: exclusion_band must be >= 2");
  }
  const Grid1D& g = kp.grid.gx;
  const int n = g.n();
  MatrixXd D = MatrixXd(d3_matrix(g)) + MatrixXd(d1_matrix(g));
  MatrixXd Rk = D * kp.k_vals + kp.k_vals * D.transpose() + kp.lambda * kp.s_vals;
  MatrixXd Rs = D * kp.s_vals + kp.s_vals * D.transpose() + kp.lambda * kp.k_vals;
  double res_k = 0.0;
  double res_s = 0.0;
  for (int i = 1; i <= n - 2; ++i) {
    for (int j = 1; j <= n - 2; ++j) {
      if (std::abs(i - j) <= exclusion_band) {
        continue;
      }
      res_k = std::max(res_k, std::abs(Rk(i, j)));
      res_s = std::max(res_s, std::abs(Rs(i, j)));
    }
  }
  return {res_k, res_s};
}

double neumann_trace_y(const MatrixXd& K, double h) {
  const Eigen::Index n = K.rows();
  const VectorXd ky0 = (4.0 * K.col(1) - K.col(2)) / (2.0 * h);
  const VectorXd kyL = (-4.0 * K.col(n - 2) + K.col(n - 3)) / (2.0 * h);
  return std::max(ky0.cwiseAbs().maxCoeff(), kyL.cwiseAbs().maxCoeff());
}

}  // namespace kdvb
