#pragma once
// The set of domain lengths at which the linearized system loses
// controllability: (2*pi/sqrt(3)) * sqrt(k^2 + k*l + l^2), k,l >= 1.

#include <vector>

namespace kdvb {

struct CriticalQuery {
  int k_max = 1;
  int l_max = 1;
  double tolerance = 1e-9;
};

// All lattice values for 1 <= k <= k_max, 1 <= l <= l_max, deduplicated
// within 1e-12 and sorted ascending.
std::vector<double> critical_lengths(const CriticalQuery& q);

// True iff L is within q.tolerance of some lattice value. The enumeration
// bound is auto-enlarged until the smallest value generated by higher
// indices exceeds L, so callers never under-enumerate.
bool is_critical(double L, const CriticalQuery& q);

// The `count` lattice values closest to L (for reporting).
std::vector<double> nearest_critical(double L, int count);

}  // namespace kdvb
