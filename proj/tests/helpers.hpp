#pragma once

#include <random>
#include <vector>

#include <Eigen/Dense>

#include "mfid/grid.hpp"
#include "mfid/stencils.hpp"

namespace mfid::test {

inline std::mt19937_64 rng(std::uint64_t seed) { return std::mt19937_64(seed); }

inline Field random_field(const Grid& g, std::mt19937_64& gen, double lo = -1.0,
                          double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  Field f(g);
  for (double& x : f.v) x = d(gen);
  return f;
}

inline SpatialField random_spatial(const SpaceGrid& g, std::mt19937_64& gen, double lo,
                                   double hi) {
  std::uniform_real_distribution<double> d(lo, hi);
  SpatialField f(g);
  for (double& x : f.v) x = d(gen);
  return f;
}

/// Random flux field respecting the no-flux invariant (zero on the stored
/// boundary faces j = 0 resp. l = 0).
inline FluxField random_flux(const Grid& g, std::mt19937_64& gen, double lo = -1.0,
                             double hi = 1.0) {
  std::uniform_real_distribution<double> d(lo, hi);
  FluxField m(g);
  for (int n = 0; n < g.nt; ++n)
    for (int j = 0; j < g.nx1; ++j)
      for (int l = 0; l < g.nx2; ++l) {
        const std::ptrdiff_t i = g.idx(n, j, l);
        m.x1[i] = (j > 0) ? d(gen) : 0.0;
        m.x2[i] = (l > 0) ? d(gen) : 0.0;
      }
  return m;
}

/// Dense matrix of a linear Field -> Field operator, by unit vectors.
template <class Op>
inline Eigen::MatrixXd dense_operator(const Grid& g, Op&& op) {
  const std::ptrdiff_t n = g.size();
  Eigen::MatrixXd A(n, n);
  Field e(g), out(g);
  for (std::ptrdiff_t k = 0; k < n; ++k) {
    std::fill(e.v.begin(), e.v.end(), 0.0);
    e.v[k] = 1.0;
    op(out, e);
    for (std::ptrdiff_t r = 0; r < n; ++r) A(r, k) = out.v[r];
  }
  return A;
}

inline double centered_diff(double (*f)(double), double u, double h) {
  return (f(u + h) - f(u - h)) / (2.0 * h);
}

}  // namespace mfid::test
