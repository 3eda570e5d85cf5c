#pragma once

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "mfid/config.hpp"
#include "mfid/io.hpp"
#include "mfid/pdhg.hpp"
#include "mfid/reaction_diffusion.hpp"

namespace mfid {

// Batch front end shared by the CLI subcommands: runs a configured solve
// and leaves snapshots, the energy log, the residual report, a config echo,
// and the lossless field dump in the output directory.

struct RunResult {
  SolveStatus status = SolveStatus::MaxIters;
  int iters = 0;
  EnergyBreakdown energy;
  OptimalityResiduals residuals;
  int newton_iters_max = 0;
  std::string out_dir;

  /// Process exit status: 0 converged, 2 stopped at max_iters, 1 diverged.
  int exit_code() const {
    switch (status) {
      case SolveStatus::Converged: return 0;
      case SolveStatus::MaxIters: return 2;
      case SolveStatus::Diverged: return 1;
    }
    return 1;
  }
};

inline void write_residual_report(const std::string& path, const RunResult& r) {
  std::ofstream out(path);
  if (!out) throw ConfigError("cannot open for writing: " + path);
  out << "status = "
      << (r.status == SolveStatus::Converged
              ? "converged"
              : r.status == SolveStatus::MaxIters ? "max_iters" : "diverged")
      << "\n";
  out << "iterations = " << r.iters << "\n";
  out << "newton_iters_max = " << r.newton_iters_max << "\n";
  out << "energy_total = " << fmt_g17(r.energy.total()) << "\n";
  out << "energy_kinetic = " << fmt_g17(r.energy.kinetic()) << "\n";
  out << "energy_transport = " << fmt_g17(r.energy.transport) << "\n";
  out << "energy_reaction = " << fmt_g17(r.energy.reaction) << "\n";
  out << "energy_potential = " << fmt_g17(r.energy.potential) << "\n";
  out << "energy_terminal = " << fmt_g17(r.energy.terminal) << "\n";
  out << "residual_continuity = " << fmt_g17(r.residuals.continuity) << "\n";
  out << "residual_m1 = " << fmt_g17(r.residuals.m1) << "\n";
  out << "residual_m2 = " << fmt_g17(r.residuals.m2) << "\n";
  out << "residual_u = " << fmt_g17(r.residuals.u) << "\n";
  out << "residual_terminal = " << fmt_g17(r.residuals.terminal) << "\n";
}

inline RunResult run_experiment(const ExperimentConfig& cfg, bool quiet = false) {
  validate_config(cfg);
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  {
    std::ofstream echo(fs::path(cfg.out_dir) / "config_echo.cfg");
    echo << emit_config(cfg);
  }

  ControlProblem prob = build_problem(cfg);
  SolverState st = solve(prob, cfg.solver);

  RunResult r;
  r.status = st.status;
  r.iters = st.iter;
  r.energy = energy(st, prob);
  r.residuals = optimality_residuals(st, prob);
  r.newton_iters_max = st.newton_iters_max;
  r.out_dir = cfg.out_dir;

  write_energy_log((fs::path(cfg.out_dir) / "energy.csv").string(), st.log_rows);
  write_fields_bin((fs::path(cfg.out_dir) / "fields.bin").string(), st.m1, st.m2, st.u, st.phi);
  write_residual_report((fs::path(cfg.out_dir) / "residuals.txt").string(), r);

  {
    std::ofstream meta(fs::path(cfg.out_dir) / "snapshots.csv");
    meta << "index,time\n";
    for (int n : snapshot_indices(cfg)) {
      write_csv_matrix((fs::path(cfg.out_dir) / snapshot_filename(n)).string(),
                       time_slice(st.u, n));
      meta << n << ',' << fmt_g17(prob.grid.t(n)) << '\n';
    }
  }

  if (!quiet) {
    std::cout << "status=" << (r.status == SolveStatus::Converged ? "converged" : "stopped")
              << " iters=" << r.iters << " energy_total=" << fmt_g17(r.energy.total())
              << " energy_kinetic=" << fmt_g17(r.energy.kinetic())
              << " continuity=" << fmt_g17(r.residuals.continuity)
              << " optimality_max=" << fmt_g17(r.residuals.max()) << "\n";
  }
  return r;
}

/// Recomputes the optimality residuals of a previously saved state.
struct VerifyResult {
  OptimalityResiduals residuals;
  EnergyBreakdown energy;
  bool pass = false;
};

inline VerifyResult verify_experiment(const ExperimentConfig& cfg) {
  namespace fs = std::filesystem;
  const std::string path = (fs::path(cfg.out_dir) / "fields.bin").string();
  SavedFields s = read_fields_bin(path);
  ControlProblem prob = build_problem(cfg);
  if (s.u.grid != prob.grid)
    throw ConfigError("verify: saved fields grid does not match the configuration");
  VerifyResult v;
  v.residuals = optimality_residuals(s.m1, s.m2, s.u, s.phi, prob);
  v.energy = energy(s.m1, s.m2, s.u, prob);
  v.pass = v.residuals.max() <= 10.0 * cfg.solver.tol_residual;
  return v;
}

/// Explicit reaction-diffusion run with Lyapunov/dissipation trace, written
/// as reference_trace.csv (step,t,G,I) plus the final density snapshot.
struct ReferenceResult {
  int steps = 0;
  double dt = 0.0;
  double g_initial = 0.0;
  double g_final = 0.0;
  bool monotone = true;
};

inline ReferenceResult run_reference(const ExperimentConfig& cfg, bool quiet = false) {
  validate_config(cfg);
  namespace fs = std::filesystem;
  fs::create_directories(cfg.out_dir);

  ResolvedMobility rm = resolve_mobility(cfg.mobility);
  const SpaceGrid g(cfg.nx1, cfg.nx2);
  SpatialField u = cfg.u0.evaluate(g);

  double dt = cfg.reference_dt;
  if (dt == 0.0) {
    double fmax = 0.0;
    for (double x : u.v)
      fmax = std::max(fmax, rm.pair.v1.value(x) * rm.lyapunov.g_second(x));
    const double bound = 2.0 * std::max(fmax, 1e-30) * (1.0 / (g.dx1 * g.dx1) + 1.0 / (g.dx2 * g.dx2));
    dt = 0.8 / bound;
  }
  RDProblem prob = make_rd_problem(g, rm.pair, rm.lyapunov, dt);

  const int steps = std::max(1, int(std::ceil(cfg.reference_t_final / dt)));
  std::ofstream trace(fs::path(cfg.out_dir) / "reference_trace.csv");
  trace << "step,t,G,I\n";

  ReferenceResult res;
  res.dt = dt;
  res.steps = steps;
  double g_prev = lyapunov_g(u, rm.lyapunov);
  res.g_initial = g_prev;
  trace << 0 << ",0," << fmt_g17(g_prev) << ','
        << fmt_g17(information_functional(u, rm.pair, rm.lyapunov)) << '\n';
  for (int k = 1; k <= steps; ++k) {
    u = rd_step(u, prob);
    const double gk = lyapunov_g(u, rm.lyapunov);
    if (gk > g_prev + 1e-12) res.monotone = false;
    g_prev = gk;
    trace << k << ',' << fmt_g17(k * dt) << ',' << fmt_g17(gk) << ','
          << fmt_g17(information_functional(u, rm.pair, rm.lyapunov)) << '\n';
  }
  res.g_final = g_prev;
  write_csv_matrix((fs::path(cfg.out_dir) / "reference_final.csv").string(), u);

  if (!quiet) {
    std::cout << "reference: steps=" << res.steps << " dt=" << fmt_g17(res.dt)
              << " G0=" << fmt_g17(res.g_initial) << " GT=" << fmt_g17(res.g_final)
              << " monotone=" << (res.monotone ? "yes" : "no") << "\n";
  }
  return res;
}

}  // namespace mfid
