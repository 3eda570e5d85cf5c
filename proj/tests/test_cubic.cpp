#include <random>

#include <catch_amalgamated.hpp>

#include "mfid/cubic.hpp"
#include "mfid/errors.hpp"

using namespace mfid;

namespace {
double eval(double q1, double q2, double q3, double x) {
  return ((x + q1) * x + q2) * x + q3;
}
}  // namespace

TEST_CASE("simple closed forms", "[cubic]") {
  CHECK(cubic_root_plus(0, 0, -8) == Catch::Approx(2.0).margin(1e-12));
  CHECK(cubic_root_plus(1, 1, -3) == Catch::Approx(1.0).margin(1e-12));
}

TEST_CASE("no nonnegative root throws", "[cubic]") {
  CHECK_THROWS_AS(cubic_root_plus(0, 0, 8), SolverError);       // only root -2
  CHECK_THROWS_AS(cubic_root_plus(3, 3, 1), SolverError);       // (x+1)^3
  CHECK_THROWS_AS(cubic_root_plus(6, 11, 6), SolverError);      // -1,-2,-3
}

TEST_CASE("degenerate double root at zero is found", "[cubic]") {
  // x^2 (x + k2) with k2 > 0: largest root is the double root 0, recovered
  // up to rounding of the closed form
  CHECK(cubic_root_plus(2.5, 0.0, 0.0) < 1e-12 * 3.5);
  CHECK(cubic_root_plus(1e3, 0.0, 0.0) < 1e-12 * 1.001e3);
}

TEST_CASE("forward-constructed optimality roots are recovered", "[cubic]") {
  // pick u*, c3, k2 on the increasing branch, set k1 so u* solves
  // (u+c3)^2 (u+k2) + k1 = 0, and invert
  std::mt19937_64 gen(2024);
  std::uniform_real_distribution<double> du(0.0, 5.0), dc(0.0, 2.0), dk(-1.0, 4.0);
  int checked = 0;
  while (checked < 500) {
    const double us = du(gen), c3 = dc(gen);
    double k2 = dk(gen);
    if (k2 < -us) k2 = -us;  // keep -k1 = (u*+c3)^2 (u*+k2) >= 0
    const double hp = (us + c3) * (3.0 * us + 2.0 * k2 + c3);
    if (hp <= 1e-6) continue;  // increasing branch only
    const double k1 = -(us + c3) * (us + c3) * (us + k2);
    const double q1 = 2.0 * c3 + k2;
    const double q2 = c3 * (c3 + 2.0 * k2);
    const double q3 = k1 + k2 * c3 * c3;
    const double r = cubic_root_plus(q1, q2, q3);
    const double scale = std::max(1.0, std::abs(q1) + std::abs(q2) + std::abs(q3));
    CHECK(std::abs(r - us) < 1e-10 * (1.0 + us));
    CHECK(std::abs(eval(q1, q2, q3, r)) < 1e-10 * scale);
    ++checked;
  }
}

TEST_CASE("residual bound holds on random coefficients with a real nonnegative root",
          "[cubic]") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> d(-3.0, 3.0);
  int checked = 0;
  while (checked < 500) {
    const double q1 = d(gen), q2 = d(gen), q3 = d(gen);
    double r;
    try {
      r = cubic_root_plus(q1, q2, q3);
    } catch (const SolverError&) {
      continue;
    }
    const double scale = std::max(1.0, std::abs(q1) + std::abs(q2) + std::abs(q3));
    CHECK(r >= 0.0);
    CHECK(std::abs(eval(q1, q2, q3, r)) < 1e-10 * scale);
    // largest admissible root: nothing above it can vanish
    const double dp = (3.0 * r + 2.0 * q1) * r + q2;
    CHECK(dp >= -1e-6 * scale);
    ++checked;
  }
}
