#include "kdvb/grid.hpp"

#include <stdexcept>
#include <string>

namespace kdvb {

Grid1D make_grid(double L, int n) {
  if (L <= 0.0) {
    throw std::invalid_argument("make_grid: length_L must be positive, got " +
                                std::to_string(L));
  }
  if (n < 7) {
    throw std::invalid_argument(
        "make_grid: node_count_n must be >= 7 (stencil width), got " +
        std::to_string(n));
  }
  Grid1D g;
  g.length_L = L;
  g.node_count_n = n;
  g.spacing_h = L / (n - 1);
  g.nodes.resize(static_cast<size_t>(n));
  for (int i = 0; i < n; ++i) {
    g.nodes[static_cast<size_t>(i)] = L * static_cast<double>(i) / (n - 1);
  }
  g.nodes.back() = L;
  return g;
}

Grid2D make_grid2(const Grid1D& g) { return Grid2D{g, g}; }

SparseOperator d1_matrix(const Grid1D& g) {
  const int n = g.n();
  const double c = 1.0 / (2.0 * g.h());
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<size_t>(2 * n + 2));
  t.emplace_back(0, 0, -3 * c);
  t.emplace_back(0, 1, 4 * c);
  t.emplace_back(0, 2, -1 * c);
  for (int i = 1; i < n - 1; ++i) {
    t.emplace_back(i, i - 1, -c);
    t.emplace_back(i, i + 1, c);
  }
  t.emplace_back(n - 1, n - 1, 3 * c);
  t.emplace_back(n - 1, n - 2, -4 * c);
  t.emplace_back(n - 1, n - 3, c);
  SparseOperator D(n, n);
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

SparseOperator d3_matrix(const Grid1D& g) {
  const int n = g.n();
  const double c = 1.0 / (2.0 * g.h() * g.h() * g.h());
  const double r0[5] = {-5.0, 18.0, -24.0, 14.0, -3.0};
  const double r1[5] = {-3.0, 10.0, -12.0, 6.0, -1.0};
  std::vector<Eigen::Triplet<double>> t;
  t.reserve(static_cast<size_t>(4 * n + 20));
  for (int j = 0; j < 5; ++j) {
    t.emplace_back(0, j, r0[j] * c);
    t.emplace_back(1, j, r1[j] * c);
  }
  for (int i = 2; i < n - 2; ++i) {
    t.emplace_back(i, i - 2, -c);
    t.emplace_back(i, i - 1, 2 * c);
    t.emplace_back(i, i + 1, -2 * c);
    t.emplace_back(i, i + 2, c);
  }
  for (int j = 0; j < 5; ++j) {
    t.emplace_back(n - 1, n - 1 - j, -r0[j] * c);
    t.emplace_back(n - 2, n - 1 - j, -r1[j] * c);
  }
  SparseOperator D(n, n);
  D.setFromTriplets(t.begin(), t.end());
  return D;
}

VectorXd trapezoid_weights(const Grid1D& g) {
  VectorXd w = VectorXd::Constant(g.n(), g.h());
  w(0) = 0.5 * g.h();
  w(g.n() - 1) = 0.5 * g.h();
  return w;
}

double x0_norm(const VectorXd& eta, const VectorXd& w, const Grid1D& g) {
  if (eta.size() != g.n() || w.size() != g.n()) {
    throw std::invalid_argument("x0_norm: state length does not match grid");
  }
  const VectorXd wq = trapezoid_weights(g);
  const double s =
      (wq.array() * (eta.array().square() + w.array().square())).sum();
  return std::sqrt(s);
}

}  // namespace kdvb
