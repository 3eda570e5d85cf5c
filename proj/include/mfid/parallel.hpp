#pragma once

#include <algorithm>
#include <cstdlib>
#include <utility>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace mfid {

/// Worker cap: min(hardware, MFID_THREADS). Read once per process.
inline int max_threads() {
  static const int n = [] {
#ifdef _OPENMP
    int hw = omp_get_max_threads();
#else
    int hw = 1;
#endif
    if (const char* env = std::getenv("MFID_THREADS")) {
      int cap = std::atoi(env);
      if (cap >= 1) hw = std::min(hw, cap);
    }
    return std::max(1, hw);
  }();
  return n;
}

/// Parallel loop over independent rows. Pointwise kernels only; any
/// reduction goes through sum_over_rows/max_over_rows below so results do
/// not depend on the thread count.
template <class F>
inline void parallel_rows(int nrows, F&& body) {
#ifdef _OPENMP
#pragma omp parallel for schedule(static) num_threads(max_threads())
  for (int r = 0; r < nrows; ++r) body(r);
#else
  for (int r = 0; r < nrows; ++r) body(r);
#endif
}

/// Deterministic reduction: per-row partials are computed in parallel and
/// combined serially in row order, so the result is bitwise independent of
/// the number of workers.
template <class F>
inline double sum_over_rows(int nrows, F&& row_sum) {
  std::vector<double> partial(nrows);
  parallel_rows(nrows, [&](int r) { partial[r] = row_sum(r); });
  double s = 0.0;
  for (double p : partial) s += p;
  return s;
}

template <class F>
inline double max_over_rows(int nrows, F&& row_max) {
  std::vector<double> partial(nrows);
  parallel_rows(nrows, [&](int r) { partial[r] = row_max(r); });
  double m = 0.0;
  for (double p : partial) m = std::max(m, p);
  return m;
}

}  // namespace mfid
