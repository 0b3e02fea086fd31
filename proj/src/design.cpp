#include "kdvb/design.hpp"

#include <Eigen/Eigenvalues>
#include <Eigen/SVD>
#include <cmath>
#include <complex>
#include <limits>
#include <stdexcept>
#include <vector>

#include "kdvb/linalg.hpp"

namespace kdvb {

namespace {

using Complex = std::complex<double>;

// Minimal-defect image vector for one mode: psi = c0*wt + gamma with
//   gamma = argmin ||(mu I - At) gamma||  s.t.  C gamma = delta,
// solved by the null-space method (QR of C^H; a raw KKT system is far too
// ill-conditioned for the nearly defective directions involved here).
VectorXcd corrected_psi(Complex mu, const VectorXcd& wt, Complex c0,
                        const MatrixXd& At, const MatrixXcd& C,
                        const VectorXcd& delta_rhs) {
  const Eigen::Index N = At.rows();
  VectorXcd psi0 = c0 * wt;
  VectorXcd dlt = delta_rhs - C * psi0;

  MatrixXcd Ch = C.adjoint();  // N x 2
  Eigen::HouseholderQR<MatrixXcd> qr(Ch);
  MatrixXcd Q = qr.householderQ() * MatrixXcd::Identity(N, N);
  MatrixXcd Q1 = Q.leftCols(2);
  MatrixXcd Z = Q.rightCols(N - 2);
  MatrixXcd R2 = qr.matrixQR().topLeftCorner(2, 2)
                     .triangularView<Eigen::Upper>();
  // C g0 = dlt with g0 in range(C^H): g0 = Q1 * (R2^H)^{-1} dlt.
  VectorXcd y2 = R2.adjoint().triangularView<Eigen::Lower>().solve(dlt);
  VectorXcd g0 = Q1 * y2;

  MatrixXcd M = mu * MatrixXcd::Identity(N, N) - At.cast<Complex>();
  Eigen::CompleteOrthogonalDecomposition<MatrixXcd> cod(M * Z);
  VectorXcd y = cod.solve(-(M * g0));
  return psi0 + g0 + Z * y;
}

void fill_gain_vectors(ReducedDesign& d) {
  const int n = d.n;
  const int m = d.m;
  d.ffe = VectorXd::Zero(n);
  d.ffw = VectorXd::Zero(n);
  d.gge = VectorXd::Zero(n);
  d.ggw = VectorXd::Zero(n);
  d.ffe.segment(2, m) = d.F.row(0).head(m);
  d.ffw.segment(1, m) = d.F.row(0).tail(m);
  d.gge.segment(2, m) = d.F.row(1).head(m);
  d.ggw.segment(1, m) = d.F.row(1).tail(m);
}

}  // namespace

ReducedDesign design_reduced(const Grid1D& g, double lambda) {
  if (lambda <= 0.0) {
    throw std::invalid_argument("design_reduced: lambda must be positive");
  }
  const int n = g.n();
  const int m = n - 3;
  const double h = g.h();
  const int N = 2 * m;

  MatrixXd D = MatrixXd(d3_matrix(g)) + MatrixXd(d1_matrix(g));

  // Embeddings from reduced unknowns to full-grid fields, with the two
  // Neumann rows eliminated into the neighbouring unknown plus the control.
  MatrixXd Ee = MatrixXd::Zero(n, m);  // eta_2..eta_{n-2}
  MatrixXd Ew = MatrixXd::Zero(n, m);  // w_1..w_{n-3}
  for (int j = 0; j < m; ++j) {
    Ee(j + 2, j) = 1.0;
    Ew(j + 1, j) = 1.0;
  }
  Ee(1, 0) = 0.25;          // eta_1 = eta_2/4 + (h/2) f
  Ew(n - 2, m - 1) = 0.25;  // w_{n-2} = w_{n-3}/4 - (h/2) g
  VectorXd ef = VectorXd::Zero(n);
  ef(1) = h / 2.0;
  VectorXd wg = VectorXd::Zero(n);
  wg(n - 2) = -h / 2.0;

  ReducedDesign d;
  d.n = n;
  d.m = m;
  d.L = g.length_L;
  d.lambda = lambda;
  d.h = h;
  d.A = MatrixXd::Zero(N, N);
  d.A.topRightCorner(m, m) = -(D.middleRows(2, m) * Ew);
  d.A.bottomLeftCorner(m, m) = -(D.middleRows(1, m) * Ee);
  d.B = MatrixXd::Zero(N, 2);
  d.B.col(1).head(m) = -(D.middleRows(2, m) * wg);
  d.B.col(0).tail(m) = -(D.middleRows(1, m) * ef);

  MatrixXd P = d.A + lambda * MatrixXd::Identity(N, N);
  MatrixXd X0 = solve_sylvester(P, -d.A, d.B * d.B.transpose());

  Eigen::PartialPivLU<MatrixXd> lu(X0.transpose());
  if (lu.rcond() < std::numeric_limits<double>::epsilon()) {
    throw std::runtime_error(
        "design_reduced: placement operator is numerically singular "
        "(domain length may be critical)");
  }
  d.F = lu.solve(-d.B).transpose();  // F = -B^T X0^{-1}
  d.Acl = d.A + d.B * d.F;

  Eigen::EigenSolver<MatrixXd> es(d.Acl);
  if (es.info() != Eigen::Success) {
    throw std::runtime_error("design_reduced: closed-loop eigensolve failed");
  }
  d.ev_cl = es.eigenvalues();
  d.V_cl = es.eigenvectors();
  fill_gain_vectors(d);
  return d;
}

KernelPair fitted_kernel_pair(const ReducedDesign& d, double omega_fit,
                              double* worst_fit) {
  const int n = d.n;
  const int m = d.m;
  const int N = 2 * m;
  const double h = d.h;
  const double lambda = d.lambda;

  Grid1D g = make_grid(d.L, n);
  VectorXd wq = trapezoid_weights(g);
  MatrixXd At = d.A - lambda * MatrixXd::Identity(N, N);
  Eigen::EigenSolver<MatrixXd> est(At);
  if (est.info() != Eigen::Success) {
    throw std::runtime_error("fitted_kernel_pair: target eigensolve failed");
  }
  VectorXcd evt = est.eigenvalues();
  MatrixXcd Vt = est.eigenvectors();

  struct Mode {
    VectorXcd ve, vw;  // full-grid eigenfields (length n)
    VectorXcd pu, pv;  // corrected target image (lengths m, m)
  };
  std::vector<Mode> modes;
  for (int j = 0; j < N; ++j) {
    const Complex mu = d.ev_cl(j);
    if (!(mu.imag() > 1e-9 && mu.imag() <= omega_fit)) {
      continue;
    }
    int jt = 0;
    double best = std::numeric_limits<double>::infinity();
    for (int q = 0; q < N; ++q) {
      double dist = std::abs(evt(q) - mu);
      if (dist < best) {
        best = dist;
        jt = q;
      }
    }
    VectorXcd wt = Vt.col(jt);
    Complex c0 = wt.dot(d.V_cl.col(j)) / wt.dot(wt);

    Mode md;
    md.ve = VectorXcd::Zero(n);
    md.vw = VectorXcd::Zero(n);
    md.ve.segment(2, m) = d.V_cl.col(j).head(m);
    md.vw.segment(1, m) = d.V_cl.col(j).tail(m);
    const Complex fj = (d.F.row(0).cast<Complex>() * d.V_cl.col(j)).value();
    const Complex gj = (d.F.row(1).cast<Complex>() * d.V_cl.col(j)).value();
    md.ve(1) = md.ve(2) / 4.0 + (h / 2.0) * fj;
    md.vw(n - 2) = md.vw(n - 3) / 4.0 - (h / 2.0) * gj;
    // Trace functionals with swapped arguments: in the v-transform the
    // k-row couplings act on w-values and vice versa.
    const Complex ft = (d.ffe.cast<Complex>().transpose() * md.vw).value() +
                       (d.ffw.cast<Complex>().transpose() * md.ve).value();
    const Complex gt = (d.ggw.cast<Complex>().transpose() * md.ve).value() +
                       (d.gge.cast<Complex>().transpose() * md.vw).value();
    const Complex D1 = md.vw(1) - 0.25 * md.vw(2) - (h / 2.0) * ft;
    const Complex D2 = md.ve(n - 2) - 0.25 * md.ve(n - 3) + (h / 2.0) * gt;
    MatrixXcd C = MatrixXcd::Zero(2, N);
    C(0, m + 0) = 1.0;
    C(0, m + 1) = -0.25;
    C(1, m - 1) = 1.0;
    C(1, m - 2) = -0.25;
    VectorXcd delta_rhs(2);
    delta_rhs << D1, D2;
    VectorXcd psi = corrected_psi(mu, wt, c0, At, C, delta_rhs);
    md.pu = psi.head(m);
    md.pv = psi.tail(m);
    modes.push_back(std::move(md));
  }
  if (modes.empty()) {
    throw std::runtime_error(
        "fitted_kernel_pair: no closed-loop modes inside the fit band");
  }

  const int nc = n - 2;  // columns 1..n-2
  MatrixXd k = MatrixXd::Zero(n, n);
  MatrixXd s = MatrixXd::Zero(n, n);
  double worst = 0.0;
  for (int i = 2; i <= n - 3; ++i) {
    const int iu = i - 2;
    const int iv = i - 1;
    std::vector<Eigen::RowVectorXcd> rows_eq;
    std::vector<Complex> rhs_eq;
    for (const Mode& md : modes) {
      Eigen::RowVectorXcd vex = md.ve.segment(1, nc).transpose();
      Eigen::RowVectorXcd vwx = md.vw.segment(1, nc).transpose();
      Eigen::RowVectorXcd r1(2 * nc);
      r1 << vex, vwx;
      rows_eq.push_back(r1);
      rhs_eq.push_back(md.ve(i) - md.pu(iu));
      Eigen::RowVectorXcd r2(2 * nc);
      r2 << vwx, vex;
      rows_eq.push_back(r2);
      rhs_eq.push_back(md.vw(i) - md.pv(iv));
      if (i == 2) {
        rows_eq.push_back(r2 / 4.0);
        const Complex corr =
            (d.ffe.segment(1, nc).cast<Complex>().transpose() *
             vwx.transpose()).value() +
            (d.ffw.segment(1, nc).cast<Complex>().transpose() *
             vex.transpose()).value();
        rhs_eq.push_back((md.vw(1) - md.pv(0)) - (h / 2.0) * corr);
      }
      if (i == n - 3) {
        rows_eq.push_back(r1 / 4.0);
        const Complex corr =
            (d.ggw.segment(1, nc).cast<Complex>().transpose() *
             vex.transpose()).value() +
            (d.gge.segment(1, nc).cast<Complex>().transpose() *
             vwx.transpose()).value();
        rhs_eq.push_back((md.ve(n - 2) - md.pu(m - 1)) + (h / 2.0) * corr);
      }
    }
    const int ne = static_cast<int>(rows_eq.size());
    MatrixXd Ful(2 * ne, 2 * nc);
    VectorXd ful(2 * ne);
    for (int r = 0; r < ne; ++r) {
      Ful.row(r) = rows_eq[static_cast<size_t>(r)].real();
      Ful.row(ne + r) = rows_eq[static_cast<size_t>(r)].imag();
      ful(r) = rhs_eq[static_cast<size_t>(r)].real();
      ful(ne + r) = rhs_eq[static_cast<size_t>(r)].imag();
    }
    VectorXd sol = lstsq_min_norm(Ful, ful);
    worst = std::max(worst, (Ful * sol - ful).cwiseAbs().maxCoeff());
    for (int c = 0; c < nc; ++c) {
      k(i, c + 1) = sol(c) / wq(c + 1);
      s(i, c + 1) = sol(nc + c) / wq(c + 1);
    }
  }
  // Rows 1 and n-2 from the exact gain-trace identities
  //   (4 k1 - k2) wq/(2h) = ffe  and  (-4 k_{n-2} + k_{n-3}) wq/(2h) = ggw.
  for (int jcol = 1; jcol <= n - 2; ++jcol) {
    k(1, jcol) = (2.0 * h * d.ffe(jcol) / wq(jcol) + k(2, jcol)) / 4.0;
    s(1, jcol) = (2.0 * h * d.ffw(jcol) / wq(jcol) + s(2, jcol)) / 4.0;
    k(n - 2, jcol) = (k(n - 3, jcol) - 2.0 * h * d.ggw(jcol) / wq(jcol)) / 4.0;
    s(n - 2, jcol) = (s(n - 3, jcol) - 2.0 * h * d.gge(jcol) / wq(jcol)) / 4.0;
  }
  k.row(0).setZero();
  k.row(n - 1).setZero();
  k.col(0).setZero();
  k.col(n - 1).setZero();
  s.row(0).setZero();
  s.row(n - 1).setZero();
  s.col(0).setZero();
  s.col(n - 1).setZero();

  if (worst_fit != nullptr) {
    *worst_fit = worst;
  }

  KernelPair kp;
  kp.grid = make_grid2(g);
  kp.lambda = lambda;
  kp.k_vals = k;
  kp.s_vals = s;
  kp.trace_kx0 = ((4.0 * k.row(1) - k.row(2)) / (2.0 * h)).transpose();
  kp.trace_sx0 = ((4.0 * s.row(1) - s.row(2)) / (2.0 * h)).transpose();
  kp.trace_kxL = ((-4.0 * k.row(n - 2) + k.row(n - 3)) / (2.0 * h)).transpose();
  kp.trace_sxL = ((-4.0 * s.row(n - 2) + s.row(n - 3)) / (2.0 * h)).transpose();
  return kp;
}

KernelPair fitted_kernel_pair(const Grid1D& g, double lambda, double omega_fit,
                              double* worst_fit) {
  ReducedDesign d = design_reduced(g, lambda);
  return fitted_kernel_pair(d, omega_fit, worst_fit);
}

VectorXd band_limited_state(const ReducedDesign& d, const VectorXd& z_reduced,
                            double omega_max) {
  const int N = 2 * d.m;
  if (z_reduced.size() != N) {
    throw std::invalid_argument("band_limited_state: reduced size mismatch");
  }
  std::vector<VectorXd> cols;
  for (int j = 0; j < N; ++j) {
    const Complex mu = d.ev_cl(j);
    if (mu.imag() >= -1e-9 && std::abs(mu.imag()) <= omega_max) {
      cols.push_back(d.V_cl.col(j).real());
      if (mu.imag() > 1e-9) {
        cols.push_back(d.V_cl.col(j).imag());
      }
    }
  }
  if (cols.empty()) {
    return VectorXd::Zero(N);
  }
  MatrixXd S(N, static_cast<Eigen::Index>(cols.size()));
  for (size_t c = 0; c < cols.size(); ++c) {
    S.col(static_cast<Eigen::Index>(c)) = cols[c];
  }
  Eigen::BDCSVD<MatrixXd> svd(S, Eigen::ComputeThinU);
  const VectorXd& sv = svd.singularValues();
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > 1e-8 * sv(0)) {
      ++rank;
    }
  }
  MatrixXd U = svd.matrixU().leftCols(rank);
  return U * (U.transpose() * z_reduced);
}

VectorXd reduce_state(int n, const VectorXd& eta, const VectorXd& w) {
  const int m = n - 3;
  VectorXd z(2 * m);
  z.head(m) = eta.segment(2, m);
  z.tail(m) = w.segment(1, m);
  return z;
}

void scatter_reduced_state(int n, const VectorXd& z_reduced, VectorXd& eta,
                           VectorXd& w) {
  const int m = n - 3;
  eta = VectorXd::Zero(n);
  w = VectorXd::Zero(n);
  eta.segment(2, m) = z_reduced.head(m);
  w.segment(1, m) = z_reduced.tail(m);
}

}  // namespace kdvb
