#pragma once

#include <cmath>
#include <mutex>
#include <vector>

#include <fftw3.h>

#include "mfid/errors.hpp"
#include "mfid/grid.hpp"
#include "mfid/parallel.hpp"

namespace mfid {

/// Fast solver for the dual-metric operator (-d_tt - Laplace + Id) under
/// the Neumann-compatible even-reflection closures in all three axes.
/// DCT-II diagonalizes exactly the second-difference stencils with
/// reflected ghosts, with symbol
///   lambda = (2/dt^2)(1 - cos(pi n / nt)) + (2/dx1^2)(1 - cos(pi j / nx1))
///          + (2/dx2^2)(1 - cos(pi l / nx2)) + 1,
/// so solve is transform / divide / inverse-transform.
///
/// Plans are immutable after construction and shareable across workers;
/// concurrent solve calls on distinct buffers are permitted (FFTW execution
/// is thread-safe, only planning is serialized).
class TransformPlan {
 public:
  explicit TransformPlan(const Grid& grid, bool measure = false) : grid_(grid) {
    lambda_.resize(grid.size());
    const int nt = grid.nt, nx1 = grid.nx1, nx2 = grid.nx2;
    std::vector<double> lt(nt), l1(nx1), l2(nx2);
    for (int n = 0; n < nt; ++n)
      lt[n] = 2.0 / (grid.dt * grid.dt) * (1.0 - std::cos(M_PI * n / nt));
    for (int j = 0; j < nx1; ++j)
      l1[j] = 2.0 / (grid.dx1 * grid.dx1) * (1.0 - std::cos(M_PI * j / nx1));
    for (int l = 0; l < nx2; ++l)
      l2[l] = 2.0 / (grid.dx2 * grid.dx2) * (1.0 - std::cos(M_PI * l / nx2));
    std::ptrdiff_t i = 0;
    for (int n = 0; n < nt; ++n)
      for (int j = 0; j < nx1; ++j)
        for (int l = 0; l < nx2; ++l) lambda_[i++] = lt[n] + l1[j] + l2[l] + 1.0;
    for (double lam : lambda_)
      if (!(lam >= 1.0 - 1e-12))
        throw SolverError("TransformPlan: eigenvalue below the identity floor");

    norm_ = 8.0 * double(nt) * double(nx1) * double(nx2);

    std::vector<double> scratch(grid.size());
    const unsigned flags = (measure ? FFTW_MEASURE : FFTW_ESTIMATE) | FFTW_UNALIGNED;
    std::lock_guard<std::mutex> lock(planner_mutex());
    fwd_ = fftw_plan_r2r_3d(nt, nx1, nx2, scratch.data(), scratch.data(), FFTW_REDFT10,
                            FFTW_REDFT10, FFTW_REDFT10, flags);
    inv_ = fftw_plan_r2r_3d(nt, nx1, nx2, scratch.data(), scratch.data(), FFTW_REDFT01,
                            FFTW_REDFT01, FFTW_REDFT01, flags);
    if (!fwd_ || !inv_) throw SolverError("TransformPlan: FFTW plan creation failed");
  }

  ~TransformPlan() {
    std::lock_guard<std::mutex> lock(planner_mutex());
    if (fwd_) fftw_destroy_plan(fwd_);
    if (inv_) fftw_destroy_plan(inv_);
  }

  TransformPlan(const TransformPlan&) = delete;
  TransformPlan& operator=(const TransformPlan&) = delete;

  const Grid& grid() const { return grid_; }
  const std::vector<double>& eigenvalues() const { return lambda_; }

  /// q = (-d_tt - Laplace + Id)^{-1} r. Aliasing out == r is allowed.
  void solve_into(Field& out, const Field& r) const {
    if (&out != &r) out.v = r.v;
    fftw_execute_r2r(fwd_, out.v.data(), out.v.data());
    const std::ptrdiff_t cells = grid_.cells();
    parallel_rows(grid_.nt, [&](int n) {
      double* o = out.v.data() + std::ptrdiff_t(n) * cells;
      const double* lam = lambda_.data() + std::ptrdiff_t(n) * cells;
      for (std::ptrdiff_t i = 0; i < cells; ++i) o[i] /= lam[i] * norm_;
    });
    fftw_execute_r2r(inv_, out.v.data(), out.v.data());
  }

  Field solve(const Field& r) const {
    Field out(grid_);
    solve_into(out, r);
    return out;
  }

  /// Direct stencil application of -d_tt - Laplace + Id with the reflected
  /// ghost closures that match the symbol.
  void apply_into(Field& out, const Field& q) const {
    const int nt = grid_.nt, nx1 = grid_.nx1, nx2 = grid_.nx2;
    const double it2 = 1.0 / (grid_.dt * grid_.dt);
    const double ix2 = 1.0 / (grid_.dx1 * grid_.dx1);
    const double iy2 = 1.0 / (grid_.dx2 * grid_.dx2);
    parallel_rows(nt * nx1, [&](int row) {
      const int n = row / nx1, j = row % nx1;
      for (int l = 0; l < nx2; ++l) {
        const double c = q(n, j, l);
        const double tm = (n > 0) ? q(n - 1, j, l) : c;
        const double tp = (n + 1 < nt) ? q(n + 1, j, l) : c;
        const double xm = (j > 0) ? q(n, j - 1, l) : c;
        const double xp = (j + 1 < nx1) ? q(n, j + 1, l) : c;
        const double ym = (l > 0) ? q(n, j, l - 1) : c;
        const double yp = (l + 1 < nx2) ? q(n, j, l + 1) : c;
        out(n, j, l) = (2.0 * c - tm - tp) * it2 + (2.0 * c - xm - xp) * ix2 +
                       (2.0 * c - ym - yp) * iy2 + c;
      }
    });
  }

  Field apply(const Field& q) const {
    Field out(grid_);
    apply_into(out, q);
    return out;
  }

 private:
  static std::mutex& planner_mutex() {
    static std::mutex m;
    return m;
  }

  Grid grid_;
  std::vector<double> lambda_;
  double norm_ = 1.0;
  fftw_plan fwd_ = nullptr;
  fftw_plan inv_ = nullptr;
};

inline TransformPlan build_plan(const Grid& grid, bool measure = false) {
  return TransformPlan(grid, measure);
}

inline Field solve_AAt(const TransformPlan& plan, const Field& r) { return plan.solve(r); }
inline Field apply_AAt(const TransformPlan& plan, const Field& q) { return plan.apply(q); }

}  // namespace mfid
