#include <cmath>
#include <stdexcept>
#include <vector>

#include "doctest.h"
#include "kdvb/critical.hpp"

using namespace kdvb;

namespace {

constexpr double kPi = 3.14159265358979323846;

double lattice(int k, int l) {
  return 2.0 * kPi / std::sqrt(3.0) *
         std::sqrt(double(k * k + k * l + l * l));
}

}  // namespace

TEST_SUITE("critical") {
  TEST_CASE("the first six lattice values match the closed form") {
    CriticalQuery q;
    q.k_max = 6;
    q.l_max = 6;
    const std::vector<double> vals = critical_lengths(q);
    REQUIRE(vals.size() >= 6);
    const double expected[6] = {6.283185307, 9.597724092, 12.566370614,
                                13.079493222, 15.812336265, 16.623745764};
    for (int i = 0; i < 6; ++i) {
      CHECK(vals[size_t(i)] == doctest::Approx(expected[i]).epsilon(1e-9));
    }
    // the smallest member is 2*pi, from (k,l) = (1,1)
    CHECK(vals[0] == doctest::Approx(2.0 * kPi).epsilon(1e-12));
  }

  TEST_CASE("enumeration is sorted and deduplicated") {
    CriticalQuery q;
    q.k_max = 5;
    q.l_max = 5;
    const std::vector<double> vals = critical_lengths(q);
    for (size_t i = 1; i < vals.size(); ++i) {
      CHECK(vals[i] > vals[i - 1] + 1e-12);  // strictly increasing
    }
  }

  TEST_CASE("known members are detected at tight tolerance") {
    CriticalQuery q;  // defaults; the bound auto-enlarges
    CHECK(is_critical(2.0 * kPi, q));
    // 2*pi*sqrt(7/3) equals the (1,2) lattice value
    CHECK(is_critical(2.0 * kPi * std::sqrt(7.0 / 3.0), q));
    CHECK(is_critical(lattice(2, 3), q));
  }

  TEST_CASE("non-members are rejected") {
    CriticalQuery q;
    CHECK_FALSE(is_critical(1.0, q));
    CHECK_FALSE(is_critical(3.0, q));
    CHECK_FALSE(is_critical(5.0, q));
    // the decimal 9.28245 is NOT a member (nearest is 9.5977...)
    CHECK_FALSE(is_critical(9.28245, q));
  }

  TEST_CASE("large lengths are found despite a tiny initial bound") {
    // regression: the slowest-growing family is (k,1), value ~ 3.63 k, so a
    // bound proportional to L/(2*pi) under-enumerates for L beyond ~21
    CriticalQuery q;
    q.k_max = 1;
    q.l_max = 1;
    CHECK(is_critical(lattice(6, 1), q));
    CHECK(is_critical(lattice(9, 2), q));
    CHECK_FALSE(is_critical(lattice(6, 1) + 0.01, q));
  }

  TEST_CASE("tolerance must lie in (0, 1)") {
    CriticalQuery q;
    q.tolerance = 0.0;
    CHECK_THROWS_AS(is_critical(1.0, q), std::invalid_argument);
    q.tolerance = 1.0;
    CHECK_THROWS_AS(is_critical(1.0, q), std::invalid_argument);
    q.tolerance = -1e-9;
    CHECK_THROWS_AS(is_critical(1.0, q), std::invalid_argument);
  }

  TEST_CASE("tolerance window accepts nearby lengths") {
    CriticalQuery q;
    q.tolerance = 1e-3;
    CHECK(is_critical(2.0 * kPi + 5e-4, q));
    CHECK_FALSE(is_critical(2.0 * kPi + 5e-3, q));
  }

  TEST_CASE("nearest values bracket the query") {
    const std::vector<double> near = nearest_critical(10.0, 3);
    REQUIRE(near.size() == 3);
    // nearest to 10 is the (1,2) value 9.5977...
    bool found = false;
    for (double v : near) {
      if (std::abs(v - lattice(1, 2)) < 1e-9) {
        found = true;
      }
    }
    CHECK(found);
  }
}
