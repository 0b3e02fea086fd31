#include "kdvb/transform.hpp"

#include <limits>
#include <stdexcept>

namespace kdvb {

MatrixXd apply_matrix(const MatrixXd& kernel_vals, const VectorXd& wq) {
  if (kernel_vals.cols() != wq.size()) {
    throw std::invalid_argument("apply_matrix: weight length mismatch");
  }
  return kernel_vals * wq.asDiagonal();
}

VectorXd apply_K(const KernelPair& kp, const VectorXd& v) {
  if (v.size() != kp.grid.gx.n()) {
    throw std::invalid_argument("apply_K: vector length does not match grid");
  }
  const VectorXd wq = trapezoid_weights(kp.grid.gx);
  return kp.k_vals * wq.cwiseProduct(v);
}

VectorXd apply_S(const KernelPair& kp, const VectorXd& v) {
  if (v.size() != kp.grid.gx.n()) {
    throw std::invalid_argument("apply_S: vector length does not match grid");
  }
  const VectorXd wq = trapezoid_weights(kp.grid.gx);
  return kp.s_vals * wq.cwiseProduct(v);
}

TargetPair forward_transform(const KernelPair& kp, const StatePair& z) {
  if (z.eta.size() != kp.grid.gx.n() || z.w.size() != kp.grid.gx.n()) {
    throw std::invalid_argument(
        "forward_transform: state length does not match kernel grid");
  }
  const VectorXd wq = trapezoid_weights(kp.grid.gx);
  const MatrixXd Kh = apply_matrix(kp.k_vals, wq);
  const MatrixXd Sh = apply_matrix(kp.s_vals, wq);
  TargetPair t;
  t.time_t = z.time_t;
  t.u = z.eta - Kh * z.eta - Sh * z.w;
  t.v = z.w - Kh * z.w - Sh * z.eta;
  return t;
}

InverseOperators build_inverse_operators(const KernelPair& kp) {
  const VectorXd wq = trapezoid_weights(kp.grid.gx);
  InverseOperators ops;
  ops.Kh = apply_matrix(kp.k_vals, wq);
  ops.Sh = apply_matrix(kp.s_vals, wq);
  const Eigen::Index n = ops.Kh.rows();
  const MatrixXd I = MatrixXd::Identity(n, n);
  ops.factor_plus.compute(I - (ops.Kh + ops.Sh));
  ops.factor_minus.compute(I - (ops.Kh - ops.Sh));
  const double rc_p = ops.factor_plus.rcond();
  const double rc_m = ops.factor_minus.rcond();
  const double floor = std::numeric_limits<double>::epsilon();
  if (!(rc_p > floor) || !(rc_m > floor)) {
    throw std::runtime_error(
        "discrete transform not invertible: inverse factor is numerically "
        "singular");
  }
  ops.cond_plus = 1.0 / rc_p;
  ops.cond_minus = 1.0 / rc_m;
  return ops;
}

StatePair inverse_transform(const InverseOperators& ops, const TargetPair& t) {
  const VectorXd p = ops.factor_plus.solve(t.u + t.v);
  const VectorXd m = ops.factor_minus.solve(t.u - t.v);
  StatePair z;
  z.time_t = t.time_t;
  z.eta = 0.5 * (p + m);
  z.w = 0.5 * (p - m);
  return z;
}

double feedback_f(const KernelPair& kp, const StatePair& z) {
  if (z.eta.size() != kp.grid.gx.n() || z.w.size() != kp.grid.gx.n()) {
    throw std::invalid_argument("feedback_f: state length does not match grid");
  }
  const VectorXd wq = trapezoid_weights(kp.grid.gx);
  return wq.dot(kp.trace_kx0.cwiseProduct(z.eta) +
                kp.trace_sx0.cwiseProduct(z.w));
}

double feedback_g(const KernelPair& kp, const StatePair& z) {
  if (z.eta.size() != kp.grid.gx.n() || z.w.size() != kp.grid.gx.n()) {
    throw std::invalid_argument("feedback_g: state length does not match grid");
  }
  const VectorXd wq = trapezoid_weights(kp.grid.gx);
  return wq.dot(kp.trace_kxL.cwiseProduct(z.w) +
                kp.trace_sxL.cwiseProduct(z.eta));
}

}  // namespace kdvb
