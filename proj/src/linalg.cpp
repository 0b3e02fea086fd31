#include "kdvb/linalg.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>
#include <stdexcept>

namespace kdvb {

MatrixXd solve_sylvester(const MatrixXd& P, const MatrixXd& Q,
                         const MatrixXd& R) {
  const Eigen::Index np = P.rows();
  const Eigen::Index nq = Q.rows();
  if (P.cols() != np || Q.cols() != nq || R.rows() != np || R.cols() != nq) {
    throw std::invalid_argument("solve_sylvester: inconsistent shapes");
  }
  Eigen::ComplexSchur<MatrixXcd> sp(P.cast<std::complex<double>>());
  Eigen::ComplexSchur<MatrixXcd> sq(Q.cast<std::complex<double>>());
  if (sp.info() != Eigen::Success || sq.info() != Eigen::Success) {
    throw std::runtime_error("solve_sylvester: Schur reduction failed");
  }
  const MatrixXcd& Tp = sp.matrixT();
  const MatrixXcd& Tq = sq.matrixT();
  const MatrixXcd& Up = sp.matrixU();
  const MatrixXcd& Uq = sq.matrixU();

  MatrixXcd C = Up.adjoint() * R.cast<std::complex<double>>() * Uq;
  MatrixXcd Y(np, nq);
  MatrixXcd Tshift = Tp;
  for (Eigen::Index j = 0; j < nq; ++j) {
    VectorXcd rhs = C.col(j);
    if (j > 0) {
      rhs.noalias() -= Y.leftCols(j) * Tq.block(0, j, j, 1);
    }
    // (Tp + Tq(j,j) I) y = rhs, upper triangular
    Tshift.diagonal() = Tp.diagonal().array() + Tq(j, j);
    Y.col(j) = Tshift.triangularView<Eigen::Upper>().solve(rhs);
  }
  MatrixXcd X = Up * Y * Uq.adjoint();
  return X.real();
}

double opnorm_power(const std::function<VectorXd(const VectorXd&)>& apply,
                    const std::function<VectorXd(const VectorXd&)>& apply_adj,
                    int dim, double tol, int max_iter) {
  VectorXd v = VectorXd::Ones(dim);
  // deterministic perturbation so symmetric-null starting vectors cannot stall
  for (int i = 0; i < dim; ++i) {
    v(i) += 1e-3 * std::sin(1.0 + 2.7 * i);
  }
  v.normalize();
  double sigma = 0.0;
  for (int it = 0; it < max_iter; ++it) {
    VectorXd u = apply_adj(apply(v));
    const double lam = u.norm();
    if (lam == 0.0) {
      return 0.0;
    }
    v = u / lam;
    const double s = std::sqrt(lam);
    if (it > 2 && std::abs(s - sigma) <= tol * s) {
      return s;
    }
    sigma = s;
  }
  return sigma;
}

double weighted_opnorm(const MatrixXd& A, const VectorXd& w, double tol) {
  const VectorXd sw = w.array().sqrt();
  MatrixXd B = sw.asDiagonal() * A;
  B = B * sw.cwiseInverse().asDiagonal();
  MatrixXd Bt = B.transpose();
  return opnorm_power([&](const VectorXd& x) { return VectorXd(B * x); },
                      [&](const VectorXd& x) { return VectorXd(Bt * x); },
                      static_cast<int>(A.rows()), tol);
}

VectorXd lstsq_min_norm(const MatrixXd& A, const VectorXd& b) {
  Eigen::CompleteOrthogonalDecomposition<MatrixXd> cod(A);
  return cod.solve(b);
}

}  // namespace kdvb
