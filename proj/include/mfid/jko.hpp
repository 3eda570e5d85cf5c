#pragma once

#include <optional>
#include <vector>

#include "mfid/errors.hpp"
#include "mfid/grid.hpp"
#include "mfid/mobility.hpp"
#include "mfid/pdhg.hpp"

namespace mfid {

// Iterative variational time discretization: each macro step solves the
// control problem on [t_k, t_k + outer_dt] with the previous density as the
// Dirichlet initial slice and the Lyapunov functional as terminal energy,
// and advances by the minimizer's terminal slice. First-order accurate in
// the macro step.

struct JkoConfig {
  MobilityPair pair;
  EntropySpec spec;  // Lyapunov G of the flow (not the scaled terminal)
  PotentialSpec potential = PotentialSpec::none();
  double outer_dt = 0.0;
  int n_outer = 1;
  SolveConfig inner;
  int inner_nt = 4;
  bool warm_start = true;

  void validate() const {
    if (!(outer_dt > 0.0)) throw ConfigError("JkoConfig: outer_dt must be positive");
    if (inner_nt < 2) throw ConfigError("JkoConfig: inner_nt must be >= 2");
    if (n_outer < 0) throw ConfigError("JkoConfig: n_outer must be >= 0");
    if (spec.kind == EntropySpec::Kind::Indicator)
      throw ConfigError("JkoConfig: the terminal Lyapunov functional cannot be an indicator");
  }
};

/// Rescaling the subinterval [0, dt] onto the unit interval multiplies the
/// terminal functional by dt (flux variables absorb the time scale), so the
/// inner solve uses G_eff = dt * G.
inline EntropySpec scale_terminal(const EntropySpec& spec, double dt) {
  switch (spec.kind) {
    case EntropySpec::Kind::Entropy:
      return EntropySpec::entropy(spec.weight * dt);
    case EntropySpec::Kind::Quadratic:
      return EntropySpec::quadratic(spec.beta * dt);
    case EntropySpec::Kind::Custom: {
      auto g = spec.custom_g, gp = spec.custom_gp, gpp = spec.custom_gpp;
      return EntropySpec::custom([g, dt](double u) { return dt * g(u); },
                                 [gp, dt](double u) { return dt * gp(u); },
                                 [gpp, dt](double u) { return dt * gpp(u); });
    }
    case EntropySpec::Kind::Indicator:
      break;
  }
  throw ConfigError("scale_terminal: unsupported terminal kind");
}

struct JkoStepResult {
  SpatialField u_next;
  double terminal_dual_residual = 0.0;  // |Phi(1,.) + dt G'(u(1,.))|_inf, scaled problem
  SolverState state;
};

/// One macro step: solve the subinterval control problem with initial
/// Dirichlet slice u_k, terminal Lyapunov update, zero (or configured)
/// running potential; returns the terminal density slice.
inline JkoStepResult jko_step(const SpatialField& u_k, const JkoConfig& cfg,
                              const SolverState* warm = nullptr) {
  cfg.validate();
  ControlProblem prob;
  prob.grid = Grid(u_k.grid.nx1, u_k.grid.nx2, cfg.inner_nt);
  prob.pair = cfg.pair;
  prob.potential = cfg.potential;
  prob.terminal = scale_terminal(cfg.spec, cfg.outer_dt);
  prob.u0 = u_k;

  SolverState st = solve(prob, cfg.inner, cfg.warm_start ? warm : nullptr);
  if (st.status == SolveStatus::Diverged)
    throw SolverError("jko_step: inner solve diverged");

  JkoStepResult out{time_slice(st.u, prob.grid.nt - 1), 0.0, std::move(st)};
  const Field& phi = out.state.phi;
  const int nT = prob.grid.nt - 1;
  for (int j = 0; j < u_k.grid.nx1; ++j)
    for (int l = 0; l < u_k.grid.nx2; ++l) {
      const double r = phi(nT, j, l) + prob.terminal.g_prime(out.u_next(j, l));
      out.terminal_dual_residual = std::max(out.terminal_dual_residual, std::abs(r));
    }
  return out;
}

/// Chained macro steps, duals warm-started from the previous subinterval.
/// Result holds n_outer + 1 slices starting with u0. Failures carry the
/// step index.
inline std::vector<SpatialField> jko_trajectory(const SpatialField& u0, const JkoConfig& cfg) {
  cfg.validate();
  std::vector<SpatialField> traj;
  traj.reserve(cfg.n_outer + 1);
  traj.push_back(u0);
  std::optional<SolverState> warm;
  for (int k = 0; k < cfg.n_outer; ++k) {
    try {
      JkoStepResult step = jko_step(traj.back(), cfg, warm ? &*warm : nullptr);
      traj.push_back(step.u_next);
      warm = std::move(step.state);
    } catch (const SolverError& err) {
      throw SolverError("jko_trajectory: step " + std::to_string(k) + ": " + err.what());
    }
  }
  return traj;
}

}  // namespace mfid
