#pragma once

#include <cmath>
#include <limits>

#include "mfid/errors.hpp"

namespace mfid {

struct ScalarRoot {
  double x = 0.0;
  int iters = 0;
  bool converged = false;
  double residual = 0.0;
};

/// Safeguarded Newton for an increasing f with a bracketing pair
/// f(lo) <= 0 <= f(hi): Newton steps that leave the bracket fall back to
/// bisection, the bracket shrinks monotonically.
template <class F, class DF>
inline ScalarRoot newton_bisection(F f, DF df, double lo, double hi, double x0, double xtol,
                                   int max_iters) {
  ScalarRoot r;
  double x = std::min(std::max(x0, lo), hi);
  double fx = f(x);
  for (int it = 1; it <= max_iters; ++it) {
    r.iters = it;
    if (fx > 0.0)
      hi = x;
    else
      lo = x;
    const double d = df(x);
    double xn = (d > 0.0) ? x - fx / d : lo;  // nonpositive slope: bisect
    if (!(xn > lo && xn < hi)) xn = 0.5 * (lo + hi);
    const double step = std::abs(xn - x);
    x = xn;
    fx = f(x);
    r.x = x;
    r.residual = fx;
    if (step <= xtol * (1.0 + std::abs(x)) || hi - lo <= xtol * (1.0 + std::abs(x))) {
      r.converged = true;
      return r;
    }
  }
  return r;
}

/// Plain bisection on an increasing f with f(lo) <= 0 <= f(hi).
template <class F>
inline double bisect(F f, double lo, double hi, double xtol, int max_iters = 200) {
  for (int it = 0; it < max_iters && hi - lo > xtol * (1.0 + std::abs(lo)); ++it) {
    const double mid = 0.5 * (lo + hi);
    if (f(mid) > 0.0)
      hi = mid;
    else
      lo = mid;
  }
  return 0.5 * (lo + hi);
}

/// Solves w + log w = z for w > 0 (i.e. w = W(e^z), the Lambert W of e^z).
/// Used by the entropy-potential resolvent; stable for the whole double
/// range because e^z is never formed for large z.
inline double lambert_w_log(double z) {
  if (z < -36.0) return std::exp(z);  // w ~ e^z, relative error below e^z
  double w = (z > 1.0) ? z - std::log(z) : std::exp(0.5 * (z - 1.0));
  for (int it = 0; it < 64; ++it) {
    const double f = w + std::log(w) - z;
    const double d = 1.0 + 1.0 / w;
    double wn = w - f / d;
    if (wn <= 0.0) wn = 0.5 * w;
    const double change = std::abs(wn - w);
    w = wn;
    if (change <= 1e-16 * (1.0 + std::abs(w))) break;
  }
  return w;
}

}  // namespace mfid
