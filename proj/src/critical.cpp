#include "kdvb/critical.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace kdvb {

namespace {
constexpr double kDedupTol = 1e-12;

double lattice_value(int k, int l) {
  return 2.0 * std::numbers::pi / std::sqrt(3.0) *
         std::sqrt(static_cast<double>(k) * k + static_cast<double>(k) * l +
                   static_cast<double>(l) * l);
}
}  // namespace

std::vector<double> critical_lengths(const CriticalQuery& q) {
  std::vector<double> vals;
  vals.reserve(static_cast<size_t>(q.k_max) * static_cast<size_t>(q.l_max));
  for (int k = 1; k <= q.k_max; ++k) {
    for (int l = 1; l <= q.l_max; ++l) {
      vals.push_back(lattice_value(k, l));
    }
  }
  std::sort(vals.begin(), vals.end());
  std::vector<double> out;
  for (double v : vals) {
    if (out.empty() || v - out.back() > kDedupTol) {
      out.push_back(v);
    }
  }
  return out;
}

bool is_critical(double L, const CriticalQuery& q) {
  if (!(q.tolerance > 0.0) || q.tolerance >= 1.0) {
    throw std::invalid_argument(
        "is_critical: tolerance must lie in (0, 1) length units");
  }
  CriticalQuery qq = q;
  // The smallest value using an index above K is at (K+1, 1), which exceeds
  // (2*pi/sqrt(3))*(K+1); enlarge until that clears L + tolerance.
  const int needed = static_cast<int>(std::ceil(
                         (L + q.tolerance) * std::sqrt(3.0) /
                         (2.0 * std::numbers::pi))) +
                     1;
  qq.k_max = std::max(q.k_max, needed);
  qq.l_max = std::max(q.l_max, needed);
  for (double v : critical_lengths(qq)) {
    if (std::abs(v - L) < q.tolerance) {
      return true;
    }
  }
  return false;
}

std::vector<double> nearest_critical(double L, int count) {
  CriticalQuery q;
  q.k_max = q.l_max =
      static_cast<int>(std::ceil(L * std::sqrt(3.0) /
                                 (2.0 * std::numbers::pi))) +
      count + 2;
  std::vector<double> vals = critical_lengths(q);
  std::sort(vals.begin(), vals.end(), [L](double a, double b) {
    return std::abs(a - L) < std::abs(b - L);
  });
  if (static_cast<int>(vals.size()) > count) {
    vals.resize(static_cast<size_t>(count));
  }
  std::sort(vals.begin(), vals.end());
  return vals;
}

}  // namespace kdvb
