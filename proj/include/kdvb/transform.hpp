#pragma once
// The discrete state transform induced by a kernel pair:
//   u = eta - K eta - S w,   v = w - K w - S eta,
// where K, S integrate the kernel rows against the quadrature weights. The
// inverse splits into the sum/difference factors P = I - (K+S) and
// M = I - (K-S) acting on eta+w and eta-w. The boundary feedback couples the
// kernel x-derivative traces to the state through the same quadrature.

#include <Eigen/Dense>

#include "kdvb/grid.hpp"
#include "kdvb/kernel.hpp"

namespace kdvb {

struct StatePair {
  VectorXd eta;
  VectorXd w;
  double time_t = 0.0;
};

struct TargetPair {
  VectorXd u;
  VectorXd v;
  double time_t = 0.0;
};

// Cached transform data: quadrature-scaled kernel actions and the LU factors
// of the two inverse blocks, with reciprocal condition estimates.
struct InverseOperators {
  MatrixXd Kh;  // k_ij * wq_j
  MatrixXd Sh;  // s_ij * wq_j
  Eigen::PartialPivLU<MatrixXd> factor_plus;   // P = I - (Kh + Sh)
  Eigen::PartialPivLU<MatrixXd> factor_minus;  // M = I - (Kh - Sh)
  double cond_plus = 0.0;   // 1 / rcond estimates of P and M
  double cond_minus = 0.0;
};

// Quadrature-scaled kernel action matrix: entry (i,j) = vals(i,j) * wq(j).
MatrixXd apply_matrix(const MatrixXd& kernel_vals, const VectorXd& wq);

// (K v)_i = sum_j wq_j k(x_i, y_j) v_j, and the S counterpart.
VectorXd apply_K(const KernelPair& kp, const VectorXd& v);
VectorXd apply_S(const KernelPair& kp, const VectorXd& v);

TargetPair forward_transform(const KernelPair& kp, const StatePair& z);

// Factor both inverse blocks. Throws std::runtime_error("discrete transform
// not invertible...") if either factor is numerically singular.
InverseOperators build_inverse_operators(const KernelPair& kp);

StatePair inverse_transform(const InverseOperators& ops, const TargetPair& t);

// Boundary feedback values from the kernel traces:
//   f = sum_j wq_j (kx0_j eta_j + sx0_j w_j)      (eta_x at x=0)
//   g = sum_j wq_j (kxL_j w_j  + sxL_j eta_j)     (w_x at x=L)
double feedback_f(const KernelPair& kp, const StatePair& z);
double feedback_g(const KernelPair& kp, const StatePair& z);

}  // namespace kdvb
