#pragma once

#include "mfid/grid.hpp"
#include "mfid/parallel.hpp"

namespace mfid {

// Staggered first-order difference operators on the cell-centered grid.
//
// Flux components live on faces (see FluxField), scalars on cell centers.
// div uses forward differences with the out-of-domain face at j = nx1
// (l = nx2) taken as zero; grad uses backward differences with a Neumann
// ghost (Phi[-1] = Phi[0]) so boundary-face gradients vanish. In time, u is
// differenced backward with row 0 owned by the Dirichlet datum, Phi forward
// with the terminal row owned by the terminal condition.

inline void div_m1_into(Field& out, const FluxField& m) {
  const Grid& g = m.grid;
  const int nx1 = g.nx1, nx2 = g.nx2;
  parallel_rows(g.nt * nx1, [&](int row) {
    const int n = row / nx1, j = row % nx1;
    const std::ptrdiff_t base = g.idx(n, j, 0);
    const double inv1 = 1.0 / g.dx1, inv2 = 1.0 / g.dx2;
    for (int l = 0; l < nx2; ++l) {
      const double mx = m.x1[base + l];
      const double mx_r = (j + 1 < nx1) ? m.x1[base + nx2 + l] : 0.0;
      const double my = m.x2[base + l];
      const double my_r = (l + 1 < nx2) ? m.x2[base + l + 1] : 0.0;
      out.v[base + l] = (mx_r - mx) * inv1 + (my_r - my) * inv2;
    }
  });
}

inline Field div_m1(const FluxField& m) {
  Field out(m.grid);
  div_m1_into(out, m);
  return out;
}

inline void grad_phi_into(FluxField& out, const Field& phi) {
  const Grid& g = phi.grid;
  const int nx1 = g.nx1, nx2 = g.nx2;
  parallel_rows(g.nt * nx1, [&](int row) {
    const int n = row / nx1, j = row % nx1;
    const std::ptrdiff_t base = g.idx(n, j, 0);
    const double inv1 = 1.0 / g.dx1, inv2 = 1.0 / g.dx2;
    for (int l = 0; l < nx2; ++l) {
      out.x1[base + l] = (j > 0) ? (phi.v[base + l] - phi.v[base - nx2 + l]) * inv1 : 0.0;
      out.x2[base + l] = (l > 0) ? (phi.v[base + l] - phi.v[base + l - 1]) * inv2 : 0.0;
    }
  });
}

inline FluxField grad_phi(const Field& phi) {
  FluxField out(phi.grid);
  grad_phi_into(out, phi);
  return out;
}

/// Backward time difference of u; row 0 is zero (Dirichlet datum row).
inline void dt_u_into(Field& out, const Field& u) {
  const Grid& g = u.grid;
  const std::ptrdiff_t cells = g.cells();
  parallel_rows(g.nt, [&](int n) {
    double* o = out.slice(n);
    if (n == 0) {
      for (std::ptrdiff_t i = 0; i < cells; ++i) o[i] = 0.0;
      return;
    }
    const double* un = u.slice(n);
    const double* um = u.slice(n - 1);
    const double inv = 1.0 / g.dt;
    for (std::ptrdiff_t i = 0; i < cells; ++i) o[i] = (un[i] - um[i]) * inv;
  });
}

inline Field dt_u(const Field& u) {
  Field out(u.grid);
  dt_u_into(out, u);
  return out;
}

/// Forward time difference of Phi on rows 0..nt-2; the terminal row is zero
/// here (it belongs to the terminal condition, not to this stencil).
inline void dt_phi_into(Field& out, const Field& phi) {
  const Grid& g = phi.grid;
  const std::ptrdiff_t cells = g.cells();
  parallel_rows(g.nt, [&](int n) {
    double* o = out.slice(n);
    if (n == g.nt - 1) {
      for (std::ptrdiff_t i = 0; i < cells; ++i) o[i] = 0.0;
      return;
    }
    const double* pn = phi.slice(n);
    const double* pp = phi.slice(n + 1);
    const double inv = 1.0 / g.dt;
    for (std::ptrdiff_t i = 0; i < cells; ++i) o[i] = (pp[i] - pn[i]) * inv;
  });
}

inline Field dt_phi(const Field& phi) {
  Field out(phi.grid);
  dt_phi_into(out, phi);
  return out;
}

/// Discrete continuity residual A(m1,m2,u) = dt_u + div m1 - m2 on rows
/// n >= 1; row 0 is identically zero (u[0] is pinned, not constrained).
inline void apply_A_into(Field& out, const FluxField& m1, const Field& m2, const Field& u) {
  const Grid& g = u.grid;
  const int nx1 = g.nx1, nx2 = g.nx2;
  parallel_rows(g.nt * nx1, [&](int row) {
    const int n = row / nx1, j = row % nx1;
    const std::ptrdiff_t base = g.idx(n, j, 0);
    if (n == 0) {
      for (int l = 0; l < nx2; ++l) out.v[base + l] = 0.0;
      return;
    }
    const double inv1 = 1.0 / g.dx1, inv2 = 1.0 / g.dx2, invt = 1.0 / g.dt;
    const std::ptrdiff_t prev = base - g.cells();
    for (int l = 0; l < nx2; ++l) {
      const double mx = m1.x1[base + l];
      const double mx_r = (j + 1 < nx1) ? m1.x1[base + nx2 + l] : 0.0;
      const double my = m1.x2[base + l];
      const double my_r = (l + 1 < nx2) ? m1.x2[base + l + 1] : 0.0;
      out.v[base + l] = (u.v[base + l] - u.v[prev + l]) * invt + (mx_r - mx) * inv1 +
                        (my_r - my) * inv2 - m2.v[base + l];
    }
  });
}

inline Field apply_A(const FluxField& m1, const Field& m2, const Field& u) {
  Field out(u.grid);
  apply_A_into(out, m1, m2, u);
  return out;
}

struct AdjointFields {
  FluxField m1;
  Field m2;
  Field u;
};

/// Exact transpose of apply_A under the uniform dt*dx1*dx2 inner product:
/// <A(m1,m2,u), Phi> = <(m1,m2,u), (At.m1, At.m2, At.u)> to machine
/// precision. The m1/m2 components are -grad_phi(Phi) and -Phi with row 0
/// zeroed (row-0 fluxes never enter the constraint); the u component carries
/// the time-boundary bookkeeping of the summation by parts,
///   (At.u)[0]    = -Phi[1]/dt,
///   (At.u)[n]    = -(Phi[n+1]-Phi[n])/dt   for 1 <= n <= nt-2,
///   (At.u)[nt-1] = +Phi[nt-1]/dt.
inline AdjointFields apply_A_transpose(const Field& phi) {
  const Grid& g = phi.grid;
  AdjointFields at{FluxField(g), Field(g), Field(g)};
  grad_phi_into(at.m1, phi);
  const std::ptrdiff_t cells = g.cells();
  for (std::ptrdiff_t i = 0; i < cells; ++i) at.m1.x1[i] = at.m1.x2[i] = 0.0;
  for (std::ptrdiff_t i = cells; i < g.size(); ++i) {
    at.m1.x1[i] = -at.m1.x1[i];
    at.m1.x2[i] = -at.m1.x2[i];
    at.m2.v[i] = -phi.v[i];
  }
  const double invt = 1.0 / g.dt;
  for (int n = 0; n < g.nt; ++n) {
    const double* p = phi.slice(n);
    double* out = at.u.slice(n);
    if (n == 0) {
      const double* p1 = phi.slice(1);
      for (std::ptrdiff_t i = 0; i < cells; ++i) out[i] = -p1[i] * invt;
    } else if (n == g.nt - 1) {
      for (std::ptrdiff_t i = 0; i < cells; ++i) out[i] = p[i] * invt;
    } else {
      const double* pp = phi.slice(n + 1);
      for (std::ptrdiff_t i = 0; i < cells; ++i) out[i] = -(pp[i] - p[i]) * invt;
    }
  }
  return at;
}

// Spatial-only variants of the same stencils, used by the information
// functional and the explicit reaction-diffusion oracle.

inline void spatial_grad_into(SpatialField& gx, SpatialField& gy, const SpatialField& f) {
  const SpaceGrid& g = f.grid;
  for (int j = 0; j < g.nx1; ++j)
    for (int l = 0; l < g.nx2; ++l) {
      gx(j, l) = (j > 0) ? (f(j, l) - f(j - 1, l)) / g.dx1 : 0.0;
      gy(j, l) = (l > 0) ? (f(j, l) - f(j, l - 1)) / g.dx2 : 0.0;
    }
}

/// Divergence of a face flux back to cell centers (same closure as div_m1).
inline void spatial_div_into(SpatialField& out, const SpatialField& fx, const SpatialField& fy) {
  const SpaceGrid& g = out.grid;
  for (int j = 0; j < g.nx1; ++j)
    for (int l = 0; l < g.nx2; ++l) {
      const double fxr = (j + 1 < g.nx1) ? fx(j + 1, l) : 0.0;
      const double fyr = (l + 1 < g.nx2) ? fy(j, l + 1) : 0.0;
      out(j, l) = (fxr - fx(j, l)) / g.dx1 + (fyr - fy(j, l)) / g.dx2;
    }
}

}  // namespace mfid
