#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "mfid/grid.hpp"
#include "mfid/stencils.hpp"

using namespace mfid;
using mfid::test::random_field;
using mfid::test::random_flux;
using mfid::test::rng;

TEST_CASE("grid invariants", "[grid]") {
  CHECK_THROWS_AS(Grid(1, 4, 4), std::invalid_argument);
  CHECK_THROWS_AS(Grid(4, 1, 4), std::invalid_argument);
  CHECK_THROWS_AS(Grid(4, 4, 1), std::invalid_argument);
  const Grid g(8, 4, 5);
  CHECK(g.dx1 == 1.0 / 8);
  CHECK(g.dx2 == 1.0 / 4);
  CHECK(g.dt == 1.0 / 4);
  CHECK(g.size() == 8 * 4 * 5);
  CHECK(g.x1(0) == Catch::Approx(0.5 / 8));
  CHECK(g.t(4) == Catch::Approx(1.0));
}

TEST_CASE("div of zero flux is zero", "[stencils]") {
  const Grid g(4, 4, 3);
  CHECK(linf(div_m1(FluxField(g))) == 0.0);
}

TEST_CASE("div of constant interior flux concentrates on boundary cells", "[stencils]") {
  // constant c on every interior face, zero on boundary faces: interior
  // cells see zero, first cells +c/dx, last cells -c/dx
  const Grid g(4, 4, 2);
  const double c = 0.75;
  FluxField m(g);
  for (int n = 0; n < g.nt; ++n)
    for (int j = 0; j < 4; ++j)
      for (int l = 0; l < 4; ++l) {
        m.x1[g.idx(n, j, l)] = (j > 0) ? c : 0.0;
        m.x2[g.idx(n, j, l)] = (l > 0) ? c : 0.0;
      }
  const Field d = div_m1(m);
  for (int n = 0; n < g.nt; ++n)
    for (int j = 0; j < 4; ++j)
      for (int l = 0; l < 4; ++l) {
        const double ex = (j == 0 ? c / g.dx1 : (j == 3 ? -c / g.dx1 : 0.0)) +
                          (l == 0 ? c / g.dx2 : (l == 3 ? -c / g.dx2 : 0.0));
        CHECK(d(n, j, l) == Catch::Approx(ex).margin(1e-14));
      }
}

TEST_CASE("unit impulse spreads with the forward-difference pattern", "[stencils]") {
  const Grid g(3, 3, 2);
  FluxField m(g);
  m.x1[g.idx(1, 2, 1)] = 1.0;  // face between cells (1,1) and (2,1)
  const Field d = div_m1(m);
  for (int n = 0; n < g.nt; ++n)
    for (int j = 0; j < 3; ++j)
      for (int l = 0; l < 3; ++l) {
        double ex = 0.0;
        if (n == 1 && l == 1 && j == 1) ex = 1.0 / g.dx1;
        if (n == 1 && l == 1 && j == 2) ex = -1.0 / g.dx1;
        CHECK(d(n, j, l) == ex);
      }
}

TEST_CASE("gradient of a constant vanishes", "[stencils]") {
  const Grid g(5, 5, 2);
  CHECK(linf(grad_phi(Field(g, 3.25))) == 0.0);
}

TEST_CASE("gradient of a linear profile is its slope away from the boundary", "[stencils]") {
  const Grid g(5, 5, 2);
  Field phi(g);
  for (int n = 0; n < g.nt; ++n)
    for (int j = 0; j < 5; ++j)
      for (int l = 0; l < 5; ++l) phi(n, j, l) = 2.0 * g.x1(j);
  const FluxField gr = grad_phi(phi);
  for (int n = 0; n < g.nt; ++n)
    for (int j = 0; j < 5; ++j)
      for (int l = 0; l < 5; ++l) {
        CHECK(gr.x1[g.idx(n, j, l)] == Catch::Approx(j == 0 ? 0.0 : 2.0).margin(1e-12));
        CHECK(gr.x2[g.idx(n, j, l)] == 0.0);
      }
}

TEST_CASE("grad and div are adjoint on valid flux fields", "[stencils]") {
  auto gen = rng(17);
  const Grid g(6, 5, 4);
  for (int rep = 0; rep < 5; ++rep) {
    const Field phi = random_field(g, gen);
    const FluxField m = random_flux(g, gen);
    const double lhs = inner(grad_phi(phi), m);
    const double rhs = -inner(phi, div_m1(m));
    CHECK(lhs == Catch::Approx(rhs).margin(1e-12));
  }
}

TEST_CASE("time differences on simple profiles", "[stencils]") {
  const Grid g(3, 3, 4);
  SECTION("constant in time") {
    Field u(g, 2.0);
    CHECK(linf(dt_u(u)) == 0.0);
    CHECK(linf(dt_phi(u)) == 0.0);
  }
  SECTION("linear ramp u = n dt") {
    Field u(g);
    for (int n = 0; n < g.nt; ++n)
      for (int j = 0; j < 3; ++j)
        for (int l = 0; l < 3; ++l) u(n, j, l) = g.t(n);
    const Field d = dt_u(u);
    for (int n = 0; n < g.nt; ++n)
      for (int j = 0; j < 3; ++j)
        for (int l = 0; l < 3; ++l)
          CHECK(d(n, j, l) == Catch::Approx(n == 0 ? 0.0 : 1.0).margin(1e-13));
  }
}

TEST_CASE("time summation by parts matches the transpose bookkeeping", "[stencils]") {
  auto gen = rng(23);
  const Grid g(4, 3, 3);
  const Field u = random_field(g, gen);
  const Field phi = random_field(g, gen);
  const AdjointFields at = apply_A_transpose(phi);
  CHECK(inner(dt_u(u), phi) == Catch::Approx(inner(u, at.u)).margin(1e-12));
}

TEST_CASE("apply_A is the sum of its three stencils on rows n >= 1", "[stencils]") {
  auto gen = rng(31);
  const Grid g(5, 4, 4);
  const Field u = random_field(g, gen);
  const Field m2 = random_field(g, gen);
  const FluxField m1 = random_flux(g, gen);
  const Field a = apply_A(m1, m2, u);
  const Field dtu = dt_u(u), dv = div_m1(m1);
  for (int n = 0; n < g.nt; ++n)
    for (int j = 0; j < g.nx1; ++j)
      for (int l = 0; l < g.nx2; ++l) {
        const double ex = (n == 0) ? 0.0 : dtu(n, j, l) + dv(n, j, l) - m2(n, j, l);
        CHECK(a(n, j, l) == Catch::Approx(ex).margin(1e-14));
      }
}

TEST_CASE("apply_A of a resting state is zero", "[stencils]") {
  const Grid g(4, 4, 3);
  Field u(g, 1.5);
  CHECK(linf(apply_A(FluxField(g), Field(g), u)) == 0.0);
}

TEST_CASE("full adjoint identity <Az, phi> = <z, At phi>", "[stencils]") {
  auto gen = rng(41);
  const Grid g(6, 4, 5);
  for (int rep = 0; rep < 5; ++rep) {
    const Field u = random_field(g, gen);
    const Field m2 = random_field(g, gen);
    const FluxField m1 = random_flux(g, gen);
    const Field phi = random_field(g, gen);
    const AdjointFields at = apply_A_transpose(phi);
    const double lhs = inner(apply_A(m1, m2, u), phi);
    const double rhs = inner(m1, at.m1) + inner(m2, at.m2) + inner(u, at.u);
    CHECK(lhs == Catch::Approx(rhs).margin(1e-12));
  }
}

TEST_CASE("integration by parts reproduces the index-rearranged sums", "[stencils]") {
  auto gen = rng(53);
  const Grid g(8, 8, 5);
  const Field u = random_field(g, gen);
  const FluxField m1 = random_flux(g, gen);
  const Field phi = random_field(g, gen);
  const int N = g.nt;

  double lhs = 0.0;
  {
    const Field dtu = dt_u(u), dv = div_m1(m1);
    for (int n = 1; n < N; ++n)
      for (int j = 0; j < g.nx1; ++j)
        for (int l = 0; l < g.nx2; ++l) lhs += phi(n, j, l) * (dtu(n, j, l) + dv(n, j, l));
  }
  double rhs = 0.0;
  {
    const Field dtp = dt_phi(phi);
    const FluxField gr = grad_phi(phi);
    for (int n = 1; n <= N - 2; ++n)
      for (int j = 0; j < g.nx1; ++j)
        for (int l = 0; l < g.nx2; ++l) rhs -= dtp(n, j, l) * u(n, j, l);
    for (int n = 1; n < N; ++n)
      for (int j = 0; j < g.nx1; ++j)
        for (int l = 0; l < g.nx2; ++l)
          rhs -= gr.x1[g.idx(n, j, l)] * m1.x1[g.idx(n, j, l)] +
                 gr.x2[g.idx(n, j, l)] * m1.x2[g.idx(n, j, l)];
    for (int j = 0; j < g.nx1; ++j)
      for (int l = 0; l < g.nx2; ++l)
        rhs += (phi(N - 1, j, l) * u(N - 1, j, l) - phi(1, j, l) * u(0, j, l)) / g.dt;
  }
  CHECK(lhs == Catch::Approx(rhs).margin(1e-12 * (1.0 + std::abs(lhs))));
}

TEST_CASE("no-flux closure conserves mass when the source vanishes", "[stencils]") {
  // build u satisfying dt_u + div m1 = 0 with m2 = 0 and check the spatial
  // sums stay put
  auto gen = rng(67);
  const Grid g(6, 6, 5);
  const FluxField m1 = random_flux(g, gen);
  const Field dv = div_m1(m1);
  Field u(g);
  for (int j = 0; j < g.nx1; ++j)
    for (int l = 0; l < g.nx2; ++l) u(0, j, l) = 1.0 + 0.1 * j + 0.05 * l;
  for (int n = 1; n < g.nt; ++n)
    for (int j = 0; j < g.nx1; ++j)
      for (int l = 0; l < g.nx2; ++l) u(n, j, l) = u(n - 1, j, l) - g.dt * dv(n, j, l);
  CHECK(linf(apply_A(m1, Field(g), u)) < 1e-11);
  double mass0 = 0.0;
  for (int j = 0; j < g.nx1; ++j)
    for (int l = 0; l < g.nx2; ++l) mass0 += u(0, j, l);
  for (int n = 1; n < g.nt; ++n) {
    double mass = 0.0;
    for (int j = 0; j < g.nx1; ++j)
      for (int l = 0; l < g.nx2; ++l) mass += u(n, j, l);
    CHECK(mass == Catch::Approx(mass0).margin(1e-12 * std::abs(mass0) * g.cells()));
  }
}

TEST_CASE("reductions are independent of the worker count", "[stencils][threads]") {
  // pointwise kernels plus serial row combination: the stencil results and
  // the weighted sums must not depend on how many workers ran them
  auto gen = rng(71);
  const Grid g(16, 16, 6);
  const Field phi = random_field(g, gen);
  const FluxField m1 = random_flux(g, gen);
  const Field d1 = div_m1(m1);
  const double s1 = inner(phi, d1);
  const Field d2 = div_m1(m1);
  CHECK(d1.v == d2.v);
  CHECK(s1 == inner(phi, d2));
}
