#pragma once
// Dense linear-algebra building blocks that Eigen does not ship directly:
// a Bartels-Stewart Sylvester solver (complex Schur route) and power-
// iteration operator-norm estimates in the quadrature-weighted metric.

#include <Eigen/Dense>
#include <functional>

namespace kdvb {

using Eigen::MatrixXcd;
using Eigen::MatrixXd;
using Eigen::VectorXcd;
using Eigen::VectorXd;

// Solve P X + X Q = R for X (all real, dense) by reducing P and Q to complex
// Schur form and back-substituting column by column.
MatrixXd solve_sylvester(const MatrixXd& P, const MatrixXd& Q,
                         const MatrixXd& R);

// Largest singular value of the linear map given by `apply` / `apply_adj`
// (the adjoint), estimated by power iteration on A^* A with relative
// tolerance `tol` on the dominant value.
double opnorm_power(const std::function<VectorXd(const VectorXd&)>& apply,
                    const std::function<VectorXd(const VectorXd&)>& apply_adj,
                    int dim, double tol = 1e-6, int max_iter = 500);

// Operator 2-norm of dense A measured in the weighted inner product
// <x,y> = sum_i w_i x_i y_i  (i.e. the 2-norm of W^{1/2} A W^{-1/2}).
double weighted_opnorm(const MatrixXd& A, const VectorXd& w,
                       double tol = 1e-8);

// Minimum-norm least-squares solution of the (possibly underdetermined)
// real system A x ~= b via a complete orthogonal decomposition.
VectorXd lstsq_min_norm(const MatrixXd& A, const VectorXd& b);

}  // namespace kdvb
