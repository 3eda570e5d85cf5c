#pragma once

#include <cmath>
#include <functional>
#include <limits>
#include <optional>
#include <string>
#include <vector>

#include "mfid/cubic.hpp"
#include "mfid/errors.hpp"
#include "mfid/grid.hpp"
#include "mfid/mobility.hpp"
#include "mfid/parallel.hpp"
#include "mfid/rootfind.hpp"
#include "mfid/stencils.hpp"
#include "mfid/transform.hpp"

namespace mfid {

// Preconditioned primal-dual solver for the mean-field control saddle
// point. One iteration performs, in order: the dual ascent on Phi measured
// in the H-norm (transform-preconditioned), the extra dual Psi when the
// mobilities are affine, the multiplicative flux updates for m1 and m2 with
// the extrapolated dual, the pointwise density update (scalar Newton in the
// general case, closed-form cubic root in the affine case) on interior time
// levels, and the Legendre terminal update.

struct AffineParams {
  double c1 = 1.0;  // V1 = c1 (u + c3)
  double c2 = 1.0;  // V2 = c2 (u + c3)
  double c3 = 0.0;

  void validate() const {
    if (!(c1 > 0.0) || !(c2 > 0.0) || !(c3 >= 0.0))
      throw ConfigError("AffineParams: need c1 > 0, c2 > 0, c3 >= 0");
  }
  bool operator==(const AffineParams&) const = default;
};

inline MobilityPair make_affine_pair(const AffineParams& p) {
  return MobilityPair{MobilityFn::linear(p.c1, p.c3), MobilityFn::linear(p.c2, p.c3), "affine",
                      0.0, {}};
}

enum class SolveMode { General, Affine };

struct SolveConfig {
  double tau = 0.7;
  double sigma = 0.7;
  int max_iters = 100000;
  double tol_residual = 1e-5;    // max-norm continuity residual
  double tol_energy_rel = 1e-8;  // relative energy change over the window
  int energy_window = 10;
  double newton_eps = 1e-10;
  int newton_max_iters = 50;
  SolveMode mode = SolveMode::General;
  int log_every = 10;

  void validate() const {
    if (!(tau > 0.0) || !(sigma > 0.0))
      throw ConfigError("SolveConfig: step sizes must be positive");
    if (!(tau * sigma < 1.0))
      throw ConfigError("SolveConfig: step-size contract tau*sigma < 1 violated");
    if (max_iters < 1 || energy_window < 1 || log_every < 1)
      throw ConfigError("SolveConfig: iteration counts must be >= 1");
    if (!(tol_residual > 0.0) || !(tol_energy_rel > 0.0) || !(newton_eps > 0.0))
      throw ConfigError("SolveConfig: tolerances must be positive");
  }
  bool operator==(const SolveConfig&) const = default;
};

struct ControlProblem {
  Grid grid;
  MobilityPair pair;
  PotentialSpec potential;
  EntropySpec terminal;
  SpatialField u0;
  std::optional<SpatialField> u1;  // indicator terminal target
  std::optional<AffineParams> affine;

  void validate(SolveMode mode) const {
    if (u0.grid != grid.space()) throw ConfigError("ControlProblem: u0 grid mismatch");
    if (terminal.kind == EntropySpec::Kind::Indicator) {
      if (!u1) throw ConfigError("ControlProblem: indicator terminal requires a target density");
      if (u1->grid != grid.space()) throw ConfigError("ControlProblem: u1 grid mismatch");
    }
    if (mode == SolveMode::Affine) {
      if (!affine) throw ConfigError("ControlProblem: affine mode requires affine parameters");
      affine->validate();
    }
  }
};

enum class SolveStatus { Converged, MaxIters, Diverged };

struct LogRow {
  int iter = 0;
  double energy = 0.0;
  double continuity = 0.0;
  double optimality_max = 0.0;
};

struct SolverState {
  Field u;
  FluxField m1;
  Field m2;
  Field phi;
  std::optional<Field> psi;
  int iter = 0;
  SolveStatus status = SolveStatus::MaxIters;
  std::vector<double> energy_history;
  std::vector<double> residual_history;
  std::vector<LogRow> log_rows;
  int newton_iters_max = 0;
  int newton_failures = 0;
};

// ---------------------------------------------------------------------------
// individual updates

/// Phi <- Phi + sigma (AA^T)^{-1} (dt_u + div m1 - m2); `work` is scratch.
inline void update_phi(Field& phi, const TransformPlan& plan, const FluxField& m1,
                       const Field& m2, const Field& u, double sigma, Field& work) {
  apply_A_into(work, m1, m2, u);
  plan.solve_into(work, work);
  for (std::size_t i = 0; i < phi.v.size(); ++i) phi.v[i] += sigma * work.v[i];
}

/// m1 <- V1(u)/(tau + V1(u)) (m1 + tau grad phi_bar) on rows n >= 1; the
/// mobility factor is evaluated at the pre-update density iterate.
inline void update_m1_into(FluxField& m1, const Field& u, const Field& phi_bar,
                           const MobilityFn& v1, double tau) {
  const Grid& g = u.grid;
  const int nx1 = g.nx1, nx2 = g.nx2;
  parallel_rows((g.nt - 1) * nx1, [&](int row) {
    const int n = 1 + row / nx1, j = row % nx1;
    const std::ptrdiff_t base = g.idx(n, j, 0);
    const double inv1 = 1.0 / g.dx1, inv2 = 1.0 / g.dx2;
    for (int l = 0; l < nx2; ++l) {
      const double V = v1.value(u.v[base + l]);
      const double fac = V / (tau + V);
      const double gx = (j > 0) ? (phi_bar.v[base + l] - phi_bar.v[base - nx2 + l]) * inv1 : 0.0;
      const double gy = (l > 0) ? (phi_bar.v[base + l] - phi_bar.v[base + l - 1]) * inv2 : 0.0;
      m1.x1[base + l] = fac * (m1.x1[base + l] + tau * gx);
      m1.x2[base + l] = fac * (m1.x2[base + l] + tau * gy);
    }
  });
}

inline FluxField update_m1(const FluxField& m1, const Field& u, const Field& phi_bar,
                           const MobilityFn& v1, double tau) {
  FluxField out = m1;
  update_m1_into(out, u, phi_bar, v1, tau);
  return out;
}

/// m2 <- V2(u)/(tau + V2(u)) (m2 + tau phi_bar) on rows n >= 1.
inline void update_m2_into(Field& m2, const Field& u, const Field& phi_bar, const MobilityFn& v2,
                           double tau) {
  const Grid& g = u.grid;
  const std::ptrdiff_t cells = g.cells();
  parallel_rows(g.nt - 1, [&](int row) {
    const int n = 1 + row;
    const double* uu = u.slice(n);
    const double* pb = phi_bar.slice(n);
    double* m = m2.slice(n);
    for (std::ptrdiff_t i = 0; i < cells; ++i) {
      const double V = v2.value(uu[i]);
      m[i] = V / (tau + V) * (m[i] + tau * pb[i]);
    }
  });
}

inline Field update_m2(const Field& m2, const Field& u, const Field& phi_bar,
                       const MobilityFn& v2, double tau) {
  Field out = m2;
  update_m2_into(out, u, phi_bar, v2, tau);
  return out;
}

/// Psi <- (Id + sigma (s*)')^{-1} (Psi + sigma u), pointwise.
inline Field update_psi(const Field& psi, const Field& u, double sigma,
                        const PotentialSpec& potential) {
  Field out(psi.grid);
  for (std::size_t i = 0; i < psi.v.size(); ++i)
    out.v[i] = potential.resolvent(psi.v[i] + sigma * u.v[i], sigma);
  return out;
}

struct NewtonResult {
  double u = 0.0;
  int iters = 0;
  bool converged = false;
  double residual = 0.0;
};

namespace detail {

/// Residual a(u) and curvature b(u) = a'(u) of the per-cell density prox
/// objective at fixed fluxes. Zero-form mobilities and zero fluxes drop out.
struct CellObjective {
  const MobilityPair& pair;
  const PotentialSpec& potential;
  double m1sq, m2sq, dtphi_bar, u_k, tau;

  void eval(double u, double& a, double& b) const {
    a = -dtphi_bar + potential.s_prime(u) + (u - u_k) / tau;
    b = potential.s_second(u) + 1.0 / tau;
    if (!pair.v1.is_zero() && m1sq != 0.0) {
      double V, Vp, Vpp;
      pair.v1.eval_all(u, V, Vp, Vpp);
      const double iV2 = 1.0 / (V * V);
      a -= 0.5 * m1sq * Vp * iV2;
      b += m1sq * (Vp * Vp * iV2 / V - 0.5 * Vpp * iV2);
    }
    if (!pair.v2.is_zero() && m2sq != 0.0) {
      double V, Vp, Vpp;
      pair.v2.eval_all(u, V, Vp, Vpp);
      const double iV2 = 1.0 / (V * V);
      a -= 0.5 * m2sq * Vp * iV2;
      b += m2sq * (Vp * Vp * iV2 / V - 0.5 * Vpp * iV2);
    }
  }
  double residual(double u) const {
    double a, b;
    eval(u, a, b);
    return a;
  }
};

}  // namespace detail

/// Pointwise density update: damped Newton on the prox optimality residual
///   -|m1|^2 V1'/(2V1^2) - |m2|^2 V2'/(2V2^2) - dt(phi_bar) + s'(u) + (u-u_k)/tau = 0
/// with iterates clipped to the positivity floor. Nonconvex curvature
/// (b <= 0) falls back to bisection on the residual.
inline NewtonResult newton_update_u(double u_init, double u_k, double m1sq, double m2sq,
                                    double dtphi_bar, const MobilityPair& pair,
                                    const PotentialSpec& potential, double tau, double eps,
                                    int max_iters) {
  const detail::CellObjective obj{pair, potential, m1sq, m2sq, dtphi_bar, u_k, tau};
  NewtonResult res;
  double u = std::max(u_init, kPositivityFloor);
  double lo = kPositivityFloor;
  double hi = std::numeric_limits<double>::infinity();
  for (int it = 1; it <= max_iters; ++it) {
    res.iters = it;
    double a, b;
    obj.eval(u, a, b);
    if (u <= kPositivityFloor && a >= 0.0) {
      // residual pushes below the floor: the clipped problem is optimal here
      res.u = kPositivityFloor;
      res.converged = true;
      res.residual = 0.0;
      return res;
    }
    if (!(b > 0.0)) {
      // bisection fallback on the residual
      double lo = kPositivityFloor;
      if (obj.residual(lo) >= 0.0) {
        res.u = lo;
        res.converged = true;
        res.residual = 0.0;
        return res;
      }
      double hi = std::max({u, u_k, 1.0});
      int grow = 0;
      while (obj.residual(hi) < 0.0 && grow++ < 200) hi *= 2.0;
      res.u = bisect([&](double x) { return obj.residual(x); }, lo, hi, 1e-13);
      res.converged = true;
      res.residual = std::abs(obj.residual(res.u));
      return res;
    }
    const double step = a / b;
    res.residual = std::abs(step);
    if (res.residual < eps) {
      res.u = std::max(kPositivityFloor, u - step);
      res.converged = true;
      return res;
    }
    if (a > 0.0)
      hi = u;
    else
      lo = u;
    double un = u - step;
    if (!(un > lo) || !(un < hi)) {
      // overshoot: land on the floor when no negative residual has been
      // seen yet (the head check then settles the clipped case), otherwise
      // bisect the bracket
      if (un <= lo && lo <= kPositivityFloor)
        un = kPositivityFloor;
      else if (std::isfinite(hi))
        un = 0.5 * (lo + hi);
      else
        un = std::max(2.0 * u, 1.0);
    }
    u = std::max(kPositivityFloor, un);
    res.u = u;
  }
  return res;
}

/// Closed-form density update for affine mobilities V_i = c_i (u + c3):
/// the optimality condition collapses to a cubic with coefficients built
/// from k1 = -tau(|m1|^2/(2c1) + m2^2/(2c2)) and
/// k2 = -tau dt(phi_bar) + tau psi_bar - u_k.
inline double affine_update_u(double u_k, double m1sq, double m2sq, double dtphi_bar,
                              double psi_bar, const AffineParams& p, double tau) {
  const double k1 = -tau * (0.5 * m1sq / p.c1 + 0.5 * m2sq / p.c2);
  const double k2 = -tau * dtphi_bar + tau * psi_bar - u_k;
  const double q3 = k1 + k2 * p.c3 * p.c3;
  // k1 <= 0, so q3 > 0 forces k2 > 0 and the cubic is positive on u >= 0:
  // the clipped optimum sits at the boundary u = 0
  if (q3 > 0.0) return 0.0;
  return cubic_root_plus(2.0 * p.c3 + k2, p.c3 * (p.c3 + 2.0 * k2), q3);
}

/// Terminal density slice u(1,.) = (G*)'(-2 Phi_new + Phi_old); the
/// indicator kind returns the fixed target regardless of the dual.
inline SpatialField terminal_update_u(const SpatialField& phi_new_T, const SpatialField& phi_old_T,
                                      const EntropySpec& spec,
                                      const SpatialField* indicator_target = nullptr) {
  if (spec.kind == EntropySpec::Kind::Indicator) {
    if (!indicator_target)
      throw ConfigError("terminal_update_u: indicator terminal requires a target");
    return *indicator_target;
  }
  SpatialField out(phi_new_T.grid);
  for (std::size_t i = 0; i < out.v.size(); ++i)
    out.v[i] = spec.g_star_prime(-2.0 * phi_new_T.v[i] + phi_old_T.v[i]);
  return out;
}

// ---------------------------------------------------------------------------
// objective and optimality diagnostics

struct EnergyBreakdown {
  double transport = 0.0;  // |m1|^2 / (2 V1)
  double reaction = 0.0;   // m2^2 / (2 V2)
  double potential = 0.0;  // s(u)
  double terminal = 0.0;   // G(u(1,.)) resp. 0 for a satisfied indicator
  bool finite = true;

  double kinetic() const { return transport + reaction; }
  double total() const { return transport + reaction + potential + terminal; }
};

inline EnergyBreakdown energy(const FluxField& m1, const Field& m2, const Field& u,
                              const ControlProblem& prob) {
  const Grid& g = prob.grid;
  const std::ptrdiff_t cells = g.cells();
  const int nrows = g.nt - 1;
  std::vector<double> pt(nrows, 0.0), pr(nrows, 0.0), pp(nrows, 0.0);
  std::vector<char> bad(nrows, 0);
  parallel_rows(nrows, [&](int row) {
    const int n = 1 + row;
    const double* uu = u.slice(n);
    const double* mx = m1.x1.data() + g.idx(n, 0, 0);
    const double* my = m1.x2.data() + g.idx(n, 0, 0);
    const double* m2v = m2.slice(n);
    double at = 0.0, ar = 0.0, ap = 0.0;
    for (std::ptrdiff_t i = 0; i < cells; ++i) {
      const double msq = mx[i] * mx[i] + my[i] * my[i];
      if (msq != 0.0) {
        const double V = prob.pair.v1.value(uu[i]);
        if (V > 0.0)
          at += 0.5 * msq / V;
        else
          bad[row] = 1;
      }
      const double m2sq = m2v[i] * m2v[i];
      if (m2sq != 0.0) {
        const double V = prob.pair.v2.value(uu[i]);
        if (V > 0.0)
          ar += 0.5 * m2sq / V;
        else
          bad[row] = 1;
      }
      ap += prob.potential.s(uu[i]);
    }
    pt[row] = at;
    pr[row] = ar;
    pp[row] = ap;
  });

  EnergyBreakdown eb;
  const double w = g.weight();
  for (int r = 0; r < nrows; ++r) {
    eb.transport += pt[r] * w;
    eb.reaction += pr[r] * w;
    eb.potential += pp[r] * w;
    if (bad[r]) eb.finite = false;
  }
  const double* uT = u.slice(g.nt - 1);
  if (prob.terminal.kind == EntropySpec::Kind::Indicator) {
    const auto& tgt = prob.u1->v;
    for (std::ptrdiff_t i = 0; i < cells; ++i)
      if (std::abs(uT[i] - tgt[i]) > 1e-12 * (1.0 + std::abs(tgt[i]))) {
        eb.finite = false;
        break;
      }
  } else {
    double s = 0.0;
    for (std::ptrdiff_t i = 0; i < cells; ++i) s += prob.terminal.g(uT[i]);
    eb.terminal = s * g.space().cell_area();
  }
  if (!eb.finite) {
    const double inf = std::numeric_limits<double>::infinity();
    eb.transport = eb.reaction = inf;
  }
  return eb;
}

struct OptimalityResiduals {
  double continuity = 0.0;
  double m1 = 0.0;
  double m2 = 0.0;
  double u = 0.0;
  double terminal = 0.0;

  double max() const {
    return std::max({continuity, m1, m2, u, terminal});
  }
};

/// Max-norms of the five discrete optimality equations at the given state.
inline OptimalityResiduals optimality_residuals(const FluxField& m1f, const Field& m2f,
                                                const Field& uf, const Field& phif,
                                                const ControlProblem& prob) {
  const Grid& g = prob.grid;
  const int nx1 = g.nx1, nx2 = g.nx2;
  OptimalityResiduals out;

  {
    Field r(g);
    apply_A_into(r, m1f, m2f, uf);
    out.continuity = linf(r);
  }

  out.m1 = max_over_rows((g.nt - 1) * nx1, [&](int row) {
    const int n = 1 + row / nx1, j = row % nx1;
    const std::ptrdiff_t base = g.idx(n, j, 0);
    const double inv1 = 1.0 / g.dx1, inv2 = 1.0 / g.dx2;
    double m = 0.0;
    for (int l = 0; l < nx2; ++l) {
      const double V = prob.pair.v1.value(uf.v[base + l]);
      const double gx = (j > 0) ? (phif.v[base + l] - phif.v[base - nx2 + l]) * inv1 : 0.0;
      const double gy = (l > 0) ? (phif.v[base + l] - phif.v[base + l - 1]) * inv2 : 0.0;
      if (V > 0.0) {
        m = std::max(m, std::abs(m1f.x1[base + l] / V - gx));
        m = std::max(m, std::abs(m1f.x2[base + l] / V - gy));
      } else {
        m = std::max(m, std::abs(m1f.x1[base + l]));
        m = std::max(m, std::abs(m1f.x2[base + l]));
      }
    }
    return m;
  });

  out.m2 = max_over_rows(g.nt - 1, [&](int row) {
    const int n = 1 + row;
    const double* uu = uf.slice(n);
    const double* ph = phif.slice(n);
    const double* m = m2f.slice(n);
    double r = 0.0;
    for (std::ptrdiff_t i = 0; i < g.cells(); ++i) {
      const double V = prob.pair.v2.value(uu[i]);
      r = std::max(r, (V > 0.0) ? std::abs(m[i] / V - ph[i]) : std::abs(m[i]));
    }
    return r;
  });

  if (g.nt > 2) {
    out.u = max_over_rows(g.nt - 2, [&](int row) {
      const int n = 1 + row;
      const double* uu = uf.slice(n);
      const double* mx = m1f.x1.data() + g.idx(n, 0, 0);
      const double* my = m1f.x2.data() + g.idx(n, 0, 0);
      const double* m2v = m2f.slice(n);
      const double* ph = phif.slice(n);
      const double* phn = phif.slice(n + 1);
      double r = 0.0;
      for (std::ptrdiff_t i = 0; i < g.cells(); ++i) {
        double a = -(phn[i] - ph[i]) / g.dt + prob.potential.s_prime(uu[i]);
        const double m1sq = mx[i] * mx[i] + my[i] * my[i];
        if (!prob.pair.v1.is_zero() && m1sq != 0.0) {
          double V, Vp, Vpp;
          prob.pair.v1.eval_all(uu[i], V, Vp, Vpp);
          a -= 0.5 * m1sq * Vp / (V * V);
        }
        const double m2sq = m2v[i] * m2v[i];
        if (!prob.pair.v2.is_zero() && m2sq != 0.0) {
          double V, Vp, Vpp;
          prob.pair.v2.eval_all(uu[i], V, Vp, Vpp);
          a -= 0.5 * m2sq * Vp / (V * V);
        }
        r = std::max(r, std::abs(a));
      }
      return r;
    });
  }

  {
    const double* uT = uf.slice(g.nt - 1);
    const double* phT = phif.slice(g.nt - 1);
    double r = 0.0;
    if (prob.terminal.kind == EntropySpec::Kind::Indicator) {
      const auto& tgt = prob.u1->v;
      for (std::ptrdiff_t i = 0; i < g.cells(); ++i)
        r = std::max(r, std::abs(uT[i] - tgt[i]));
    } else {
      for (std::ptrdiff_t i = 0; i < g.cells(); ++i)
        r = std::max(r, std::abs(phT[i] + prob.terminal.g_prime(uT[i])));
    }
    out.terminal = r;
  }
  return out;
}

inline EnergyBreakdown energy(const SolverState& st, const ControlProblem& prob) {
  return energy(st.m1, st.m2, st.u, prob);
}

inline OptimalityResiduals optimality_residuals(const SolverState& st,
                                                const ControlProblem& prob) {
  return optimality_residuals(st.m1, st.m2, st.u, st.phi, prob);
}

// ---------------------------------------------------------------------------
// main loop

inline SolverState solve(const ControlProblem& prob, const SolveConfig& cfg,
                         const SolverState* warm = nullptr) {
  cfg.validate();
  prob.validate(cfg.mode);
  const Grid& g = prob.grid;
  const std::ptrdiff_t cells = g.cells();
  const bool affine = cfg.mode == SolveMode::Affine;
  const bool indicator = prob.terminal.kind == EntropySpec::Kind::Indicator;

  TransformPlan plan(g, /*measure=*/g.size() >= (1 << 18));

  SolverState st;
  if (warm && warm->u.grid == g) {
    st.u = warm->u;
    st.m1 = warm->m1;
    st.m2 = warm->m2;
    st.phi = warm->phi;
    if (affine) st.psi = warm->psi ? *warm->psi : Field(g);
  } else {
    st.u = Field(g);
    st.m1 = FluxField(g);
    st.m2 = Field(g);
    st.phi = Field(g);
    if (affine) st.psi = Field(g);
  }

  // initial density: linear interpolation between the endpoint data for the
  // two-endpoint problem, constant-in-time otherwise
  for (int n = 0; n < g.nt; ++n) {
    double* u = st.u.slice(n);
    const double t = g.t(n);
    for (std::ptrdiff_t i = 0; i < cells; ++i)
      u[i] = indicator ? (1.0 - t) * prob.u0.v[i] + t * prob.u1->v[i] : prob.u0.v[i];
  }

  Field r(g), phibar(g);
  Field psibar;
  if (affine) psibar = Field(g);

  const EnergyBreakdown e0 = energy(st.m1, st.m2, st.u, prob);
  const double diverge_bound = 1e3 * std::max(1.0, std::abs(e0.total()));

  st.status = SolveStatus::MaxIters;
  for (int k = 0; k < cfg.max_iters; ++k) {
    st.iter = k + 1;

    // dual ascent, preconditioned by the transform solver
    apply_A_into(r, st.m1, st.m2, st.u);
    const double continuity = linf(r);
    st.residual_history.push_back(continuity);
    plan.solve_into(r, r);
    parallel_rows(g.nt, [&](int n) {
      double* ph = st.phi.slice(n);
      double* pb = phibar.slice(n);
      const double* q = r.slice(n);
      for (std::ptrdiff_t i = 0; i < cells; ++i) {
        const double old = ph[i];
        const double nw = old + cfg.sigma * q[i];
        ph[i] = nw;
        pb[i] = 2.0 * nw - old;
      }
    });

    if (affine) {
      Field& psi = *st.psi;
      parallel_rows(g.nt, [&](int n) {
        double* ps = psi.slice(n);
        double* pb = psibar.slice(n);
        const double* uu = st.u.slice(n);
        for (std::ptrdiff_t i = 0; i < cells; ++i) {
          const double old = ps[i];
          const double nw = prob.potential.resolvent(old + cfg.sigma * uu[i], cfg.sigma);
          ps[i] = nw;
          pb[i] = 2.0 * nw - old;
        }
      });
    }

    // flux updates with the extrapolated dual, mobilities at the current u
    update_m1_into(st.m1, st.u, phibar, prob.pair.v1, cfg.tau);
    update_m2_into(st.m2, st.u, phibar, prob.pair.v2, cfg.tau);

    // density update on interior time levels
    if (g.nt > 2) {
      const int nrows = (g.nt - 2) * g.nx1;
      std::vector<int> it_max(nrows, 0);
      std::vector<int> fails(nrows, 0);
      parallel_rows(nrows, [&](int row) {
        const int n = 1 + row / g.nx1, j = row % g.nx1;
        const std::ptrdiff_t base = g.idx(n, j, 0);
        const std::ptrdiff_t next = base + cells;
        const double invt = 1.0 / g.dt;
        for (int l = 0; l < g.nx2; ++l) {
          const std::ptrdiff_t i = base + l;
          const double m1sq = st.m1.x1[i] * st.m1.x1[i] + st.m1.x2[i] * st.m1.x2[i];
          const double m2sq = st.m2.v[i] * st.m2.v[i];
          const double dtpb = (phibar.v[next + l] - phibar.v[i]) * invt;
          if (affine) {
            st.u.v[i] = affine_update_u(st.u.v[i], m1sq, m2sq, dtpb, psibar.v[i], *prob.affine,
                                        cfg.tau);
          } else {
            const NewtonResult nr =
                newton_update_u(st.u.v[i], st.u.v[i], m1sq, m2sq, dtpb, prob.pair,
                                prob.potential, cfg.tau, cfg.newton_eps, cfg.newton_max_iters);
            st.u.v[i] = nr.u;
            it_max[row] = std::max(it_max[row], nr.iters);
            if (!nr.converged) fails[row]++;
          }
        }
      });
      for (int rr = 0; rr < nrows; ++rr) {
        st.newton_iters_max = std::max(st.newton_iters_max, it_max[rr]);
        st.newton_failures += fails[rr];
      }
    }

    // terminal slice
    if (!indicator) {
      double* uT = st.u.slice(g.nt - 1);
      const double* pb = phibar.slice(g.nt - 1);
      for (std::ptrdiff_t i = 0; i < cells; ++i)
        uT[i] = prob.terminal.g_star_prime(-pb[i]);
    }

    const EnergyBreakdown eb = energy(st.m1, st.m2, st.u, prob);
    st.energy_history.push_back(eb.total());

    if (!eb.finite || !std::isfinite(eb.total()) || eb.total() > diverge_bound ||
        !std::isfinite(continuity)) {
      st.status = SolveStatus::Diverged;
      break;
    }

    bool logged = false;
    auto log_now = [&]() {
      const OptimalityResiduals res = optimality_residuals(st, prob);
      st.log_rows.push_back({st.iter, eb.total(), continuity, res.max()});
      return res;
    };

    // stop when the energy window is flat and the continuity residual is
    // small, then certify the saddle point before accepting
    if (st.iter >= cfg.energy_window && continuity < cfg.tol_residual) {
      const double e_now = st.energy_history.back();
      const double e_then = st.energy_history[st.energy_history.size() - cfg.energy_window];
      if (std::abs(e_now - e_then) <= cfg.tol_energy_rel * std::max(std::abs(e_now), 1e-30)) {
        const OptimalityResiduals res = optimality_residuals(st, prob);
        if (res.max() <= 10.0 * cfg.tol_residual) {
          st.log_rows.push_back({st.iter, eb.total(), continuity, res.max()});
          st.status = SolveStatus::Converged;
          break;
        }
        logged = true;
        st.log_rows.push_back({st.iter, eb.total(), continuity, res.max()});
      }
    }
    if (!logged && (st.iter % cfg.log_every == 0 || st.iter == cfg.max_iters)) log_now();
  }

  return st;
}

}  // namespace mfid
