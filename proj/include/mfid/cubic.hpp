#pragma once

#include <cmath>
#include <string>

#include "mfid/errors.hpp"

namespace mfid {

/// Nonnegative root of x^3 + q1 x^2 + q2 x + q3 = 0.
///
/// The density optimality condition has the form (u+c3)^2 (u+k2) = -k1 with
/// -k1 >= 0, so the admissible solution sits on the final increasing branch
/// of the cubic: the largest real root. When several nonnegative roots
/// exist this is also the largest one where the cubic's derivative is
/// positive. Trigonometric / Cardano evaluation (keeping the double root of
/// the degenerate Cardano case as a candidate), then Newton polish.
/// Throws SolverError when the largest real root is negative.
inline double cubic_root_plus(double q1, double q2, double q3) {
  const double scale = std::max(1.0, std::abs(q1) + std::abs(q2) + std::abs(q3));

  double root;
  const double Q = (q1 * q1 - 3.0 * q2) / 9.0;
  const double R = (q1 * (2.0 * q1 * q1 - 9.0 * q2) + 27.0 * q3) / 54.0;
  const double R2 = R * R, Q3 = Q * Q * Q;
  if (R2 < Q3) {
    // three distinct real roots
    double t = R / std::sqrt(Q3);
    t = std::min(1.0, std::max(-1.0, t));
    const double theta = std::acos(t);
    const double q = -2.0 * std::sqrt(Q);
    const double r0 = q * std::cos(theta / 3.0) - q1 / 3.0;
    const double r1 = q * std::cos((theta + 2.0 * M_PI) / 3.0) - q1 / 3.0;
    const double r2 = q * std::cos((theta - 2.0 * M_PI) / 3.0) - q1 / 3.0;
    root = std::max(r0, std::max(r1, r2));
  } else {
    const double u = std::cbrt(-R - std::copysign(std::sqrt(R2 - Q3), R));
    const double v = (u == 0.0) ? 0.0 : Q / u;
    root = u + v - q1 / 3.0;
    // near-zero imaginary part: the conjugate pair degenerates into a real
    // double root that may exceed the Cardano root
    if (std::sqrt(3.0) * 0.5 * std::abs(u - v) <= 1e-8 * (1.0 + std::abs(u) + std::abs(v)))
      root = std::max(root, -0.5 * (u + v) - q1 / 3.0);
  }

  // polish (simple roots only; at a degenerate root the derivative guard
  // keeps the closed-form value)
  for (int it = 0; it < 3; ++it) {
    const double p = ((root + q1) * root + q2) * root + q3;
    const double dp = (3.0 * root + 2.0 * q1) * root + q2;
    if (std::abs(dp) > 1e-8 * scale) root -= p / dp;
  }

  if (root < -1e-12 * scale)
    throw SolverError("cubic_root_plus: no nonnegative root for coefficients q1=" +
                      std::to_string(q1) + " q2=" + std::to_string(q2) + " q3=" +
                      std::to_string(q3));
  return std::max(root, 0.0);
}

}  // namespace mfid
