#include <cmath>

#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "mfid/config.hpp"
#include "mfid/pdhg.hpp"

using namespace mfid;

namespace {

SpatialField gaussian(const SpaceGrid& g, double amp, double cx, double cy, double sharp,
                      double offset) {
  SpatialField f(g);
  for (int j = 0; j < g.nx1; ++j)
    for (int l = 0; l < g.nx2; ++l) {
      const double x = g.x1(j), y = g.x2(l);
      f(j, l) = offset + amp * std::exp(-sharp * ((x - cx) * (x - cx) + (y - cy) * (y - cy)));
    }
  return f;
}

ControlProblem indicator_problem(const Grid& g, const MobilityPair& pair,
                                 const PotentialSpec& pot, const SpatialField& u0,
                                 const SpatialField& u1) {
  ControlProblem prob;
  prob.grid = g;
  prob.pair = pair;
  prob.potential = pot;
  EntropySpec t;
  t.kind = EntropySpec::Kind::Indicator;
  prob.terminal = t;
  prob.u0 = u0;
  prob.u1 = u1;
  return prob;
}

}  // namespace

TEST_CASE("step-size contract is enforced at configuration time", "[solver]") {
  SolveConfig cfg;
  cfg.tau = 1.0;
  cfg.sigma = 1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.tau = 2.0;
  cfg.sigma = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.tau = -0.5;
  cfg.sigma = 0.5;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.tau = 0.99;
  cfg.sigma = 1.0;   // tau*sigma = 0.99: admissible
  CHECK_NOTHROW(cfg.validate());
  cfg.sigma = 0.99;
  CHECK_NOTHROW(cfg.validate());
}

TEST_CASE("matched endpoints converge to the zero-control state", "[solver]") {
  const Grid g(16, 16, 8);
  const SpatialField one(g.space(), 1.0);
  ControlProblem prob =
      indicator_problem(g, catalog_lookup("wasserstein").pair, PotentialSpec::none(), one, one);
  SolveConfig cfg;
  cfg.max_iters = 200;
  const SolverState st = solve(prob, cfg);
  CHECK(st.status == SolveStatus::Converged);
  CHECK(st.iter <= 200);
  const EnergyBreakdown eb = energy(st, prob);
  CHECK(eb.total() < 1e-8);
  CHECK(linf(st.m1) < 1e-8);
  CHECK(linf(st.m2) < 1e-8);
}

TEST_CASE("steep admissible step sizes still converge on the trivial problem", "[solver]") {
  const Grid g(8, 8, 4);
  const SpatialField one(g.space(), 1.0);
  ControlProblem prob =
      indicator_problem(g, catalog_lookup("wasserstein").pair, PotentialSpec::none(), one, one);
  SolveConfig cfg;
  cfg.tau = 1.1;
  cfg.sigma = 0.9;  // tau sigma = 0.99
  cfg.max_iters = 300;
  const SolverState st = solve(prob, cfg);
  CHECK(st.status == SolveStatus::Converged);
}

TEST_CASE("reaction-only mobility keeps the transport flux at zero", "[solver]") {
  const Grid g(4, 4, 3);
  const SpatialField u0(g.space(), 1.0);
  SpatialField u1(g.space(), 1.0);
  for (int j = 0; j < 4; ++j)
    for (int l = 0; l < 4; ++l) u1(j, l) = 1.0 + 0.2 * std::sin(1.0 + j + 2.0 * l);
  ControlProblem prob =
      indicator_problem(g, catalog_lookup("fisher_rao").pair, PotentialSpec::none(), u0, u1);
  SolveConfig cfg;
  cfg.max_iters = 50;
  const SolverState st = solve(prob, cfg);
  CHECK(linf(st.m1) < 1e-14);
  CHECK(linf(st.m2) > 1e-6);  // the reaction channel is doing the work
}

TEST_CASE("affine closed-form mode agrees with the general Newton mode", "[solver]") {
  const Grid g(12, 12, 6);
  const SpatialField u0 = gaussian(g.space(), 2.0, 0.35, 0.35, 30.0, 1.0);
  const SpatialField u1 = gaussian(g.space(), 2.0, 0.65, 0.65, 30.0, 1.0);
  const AffineParams ap{1.0, 1.0, 1.0};  // V1 = V2 = u + 1
  const PotentialSpec pot = PotentialSpec::entropy(0.1);

  ControlProblem general = indicator_problem(g, make_affine_pair(ap), pot, u0, u1);
  ControlProblem affine = general;
  affine.affine = ap;

  SolveConfig cfg;
  cfg.max_iters = 20000;
  cfg.tol_residual = 1e-6;
  cfg.tol_energy_rel = 1e-10;

  SolveConfig cfg_affine = cfg;
  cfg_affine.mode = SolveMode::Affine;

  const SolverState a = solve(general, cfg);
  const SolverState b = solve(affine, cfg_affine);
  REQUIRE(a.status == SolveStatus::Converged);
  REQUIRE(b.status == SolveStatus::Converged);

  const double ea = energy(a, general).total();
  const double eb = energy(b, affine).total();
  CHECK(std::abs(ea - eb) <= 1e-5 * std::max(std::abs(ea), std::abs(eb)));
}

TEST_CASE("certified solves satisfy the saddle-point residual bound", "[solver]") {
  const Grid g(16, 16, 6);
  const SpatialField u0 = gaussian(g.space(), 3.0, 0.3, 0.5, 40.0, 1.0);
  const SpatialField u1 = gaussian(g.space(), 3.0, 0.7, 0.5, 40.0, 1.0);
  ControlProblem prob = indicator_problem(g, catalog_lookup("diffusion_reaction_alpha").pair,
                                          PotentialSpec::entropy(0.1), u0, u1);
  SolveConfig cfg;
  cfg.tol_residual = 1e-4;
  cfg.max_iters = 20000;
  const SolverState st = solve(prob, cfg);
  REQUIRE(st.status == SolveStatus::Converged);
  const OptimalityResiduals res = optimality_residuals(st, prob);
  CHECK(res.max() <= 10.0 * cfg.tol_residual);
  CHECK(res.continuity < cfg.tol_residual);

  SECTION("logged residuals trail off after burn-in") {
    const auto& hist = st.residual_history;
    REQUIRE(hist.size() > 20);
    const std::size_t burn = hist.size() / 5;
    double running_min = hist[burn];
    double worst_excess = 0.0;
    for (std::size_t k = burn; k < hist.size(); ++k) {
      worst_excess = std::max(worst_excess, hist[k] / std::max(running_min, 1e-30));
      running_min = std::min(running_min, hist[k]);
    }
    CHECK(worst_excess < 10.0);          // plateaus allowed, no blow-ups
    CHECK(hist.back() <= hist[burn]);    // net decrease over the trailing window
  }

  SECTION("per-level mass change balances the reaction quadrature") {
    // the defect is dt * cell * sum of the continuity residual, so the
    // certified bound 10*tol caps it at dt * 10*tol
    const double cell = g.dx1 * g.dx2;
    for (int n = 1; n < g.nt; ++n) {
      double dmass = 0.0, src = 0.0;
      for (int j = 0; j < g.nx1; ++j)
        for (int l = 0; l < g.nx2; ++l) {
          dmass += (st.u(n, j, l) - st.u(n - 1, j, l)) * cell;
          src += st.m2(n, j, l) * cell * g.dt;
        }
      CHECK(std::abs(dmass - src) <= g.dt * 10.0 * cfg.tol_residual);
    }
  }
}

TEST_CASE("divergence detector flags runaway energies", "[solver]") {
  // warm-start from an absurd dual state: the first flux update inherits a
  // gigantic gradient and the transport cost blows past 1e3x the initial
  // energy, which the detector must catch instead of looping to max_iters
  const Grid g(8, 8, 4);
  const SpatialField u0(g.space(), 1.0);
  const SpatialField u1(g.space(), 1.0);
  ControlProblem prob =
      indicator_problem(g, catalog_lookup("wasserstein").pair, PotentialSpec::none(), u0, u1);
  SolverState warm;
  warm.u = Field(g, 1.0);
  warm.m1 = FluxField(g);
  warm.m2 = Field(g);
  warm.phi = Field(g);
  for (int n = 0; n < g.nt; ++n)
    for (int j = 0; j < g.nx1; ++j)
      for (int l = 0; l < g.nx2; ++l) warm.phi(n, j, l) = 1e9 * g.x1(j);
  SolveConfig cfg;
  cfg.max_iters = 50;
  const SolverState st = solve(prob, cfg, &warm);
  CHECK(st.status == SolveStatus::Diverged);
  CHECK(st.iter < 50);
}
