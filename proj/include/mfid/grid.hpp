#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <vector>

namespace mfid {

/// Cell-centered grid on the unit square: cell (j,l) has center
/// ((j+0.5)*dx1, (l+0.5)*dx2), j in [0,nx1), l in [0,nx2).
struct SpaceGrid {
  int nx1 = 0;
  int nx2 = 0;
  double dx1 = 0.0;
  double dx2 = 0.0;

  SpaceGrid() = default;
  SpaceGrid(int nx1_, int nx2_) : nx1(nx1_), nx2(nx2_) {
    if (nx1 < 2 || nx2 < 2) throw std::invalid_argument("SpaceGrid: nx1, nx2 must be >= 2");
    dx1 = 1.0 / nx1;
    dx2 = 1.0 / nx2;
  }

  std::ptrdiff_t cells() const { return std::ptrdiff_t(nx1) * nx2; }
  double cell_area() const { return dx1 * dx2; }
  double x1(int j) const { return (j + 0.5) * dx1; }
  double x2(int l) const { return (l + 0.5) * dx2; }

  bool operator==(const SpaceGrid&) const = default;
};

/// Space-time grid on [0,1] x [0,1]^2 with nt time levels t_n = n*dt,
/// dt = 1/(nt-1). Fields are stored row-major as [n][j][l] so that time
/// slices are contiguous.
struct Grid {
  int nx1 = 0;
  int nx2 = 0;
  int nt = 0;
  double dx1 = 0.0;
  double dx2 = 0.0;
  double dt = 0.0;

  Grid() = default;
  Grid(int nx1_, int nx2_, int nt_) : nx1(nx1_), nx2(nx2_), nt(nt_) {
    if (nx1 < 2 || nx2 < 2 || nt < 2)
      throw std::invalid_argument("Grid: nx1, nx2, nt must all be >= 2");
    dx1 = 1.0 / nx1;
    dx2 = 1.0 / nx2;
    dt = 1.0 / (nt - 1);
  }

  SpaceGrid space() const { return SpaceGrid(nx1, nx2); }
  std::ptrdiff_t cells() const { return std::ptrdiff_t(nx1) * nx2; }
  std::ptrdiff_t size() const { return std::ptrdiff_t(nt) * nx1 * nx2; }
  std::ptrdiff_t idx(int n, int j, int l) const {
    return (std::ptrdiff_t(n) * nx1 + j) * nx2 + l;
  }
  double t(int n) const { return n * dt; }
  double x1(int j) const { return (j + 0.5) * dx1; }
  double x2(int l) const { return (l + 0.5) * dx2; }
  /// Quadrature weight used by every space-time sum and inner product.
  double weight() const { return dt * dx1 * dx2; }

  bool operator==(const Grid&) const = default;
};

/// Scalar spatial slice (one time level).
struct SpatialField {
  SpaceGrid grid;
  std::vector<double> v;

  SpatialField() = default;
  explicit SpatialField(const SpaceGrid& g, double fill = 0.0) : grid(g), v(g.cells(), fill) {}

  double& operator()(int j, int l) { return v[std::ptrdiff_t(j) * grid.nx2 + l]; }
  double operator()(int j, int l) const { return v[std::ptrdiff_t(j) * grid.nx2 + l]; }
};

/// Scalar space-time field (u, m2, Phi, Psi).
struct Field {
  Grid grid;
  std::vector<double> v;

  Field() = default;
  explicit Field(const Grid& g, double fill = 0.0) : grid(g), v(g.size(), fill) {}

  double& operator()(int n, int j, int l) { return v[grid.idx(n, j, l)]; }
  double operator()(int n, int j, int l) const { return v[grid.idx(n, j, l)]; }

  double* slice(int n) { return v.data() + grid.idx(n, 0, 0); }
  const double* slice(int n) const { return v.data() + grid.idx(n, 0, 0); }
};

/// Two-component space-time field for the spatial flux m1. Component x1
/// stored at index (n,j,l) is the flux through the face between cells
/// (j-1,l) and (j,l); j = 0 is the physical boundary face, where no-flux
/// keeps the value at zero (the stencils treat the out-of-domain face
/// j = nx1 as zero). Same layout for x2 with l.
struct FluxField {
  Grid grid;
  std::vector<double> x1;
  std::vector<double> x2;

  FluxField() = default;
  explicit FluxField(const Grid& g, double fill = 0.0)
      : grid(g), x1(g.size(), fill), x2(g.size(), fill) {}
};

inline SpatialField time_slice(const Field& f, int n) {
  SpatialField s(f.grid.space());
  const double* src = f.slice(n);
  for (std::ptrdiff_t i = 0; i < f.grid.cells(); ++i) s.v[i] = src[i];
  return s;
}

inline void set_time_slice(Field& f, int n, const SpatialField& s) {
  double* dst = f.slice(n);
  for (std::ptrdiff_t i = 0; i < f.grid.cells(); ++i) dst[i] = s.v[i];
}

/// Weighted inner product <a,b> = dt*dx1*dx2 * sum a*b.
inline double inner(const Field& a, const Field& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.v.size(); ++i) s += a.v[i] * b.v[i];
  return a.grid.weight() * s;
}

inline double inner(const FluxField& a, const FluxField& b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.x1.size(); ++i) s += a.x1[i] * b.x1[i] + a.x2[i] * b.x2[i];
  return a.grid.weight() * s;
}

inline double linf(const Field& a) {
  double m = 0.0;
  for (double x : a.v) m = std::max(m, std::abs(x));
  return m;
}

inline double linf(const FluxField& a) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.x1.size(); ++i)
    m = std::max(m, std::max(std::abs(a.x1[i]), std::abs(a.x2[i])));
  return m;
}

/// Spatial quadrature dx1*dx2 * sum over cells.
inline double integrate(const SpatialField& f) {
  double s = 0.0;
  for (double x : f.v) s += x;
  return f.grid.cell_area() * s;
}

}  // namespace mfid
