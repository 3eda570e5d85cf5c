#include <algorithm>

#include <catch_amalgamated.hpp>

#include "helpers.hpp"
#include "mfid/transform.hpp"

using namespace mfid;
using mfid::test::dense_operator;
using mfid::test::random_field;
using mfid::test::rng;

TEST_CASE("symbol: constants are eigenvectors with eigenvalue one", "[transform]") {
  const Grid g(4, 4, 3);
  const TransformPlan plan(g);
  CHECK(plan.eigenvalues()[0] == Catch::Approx(1.0));
  for (double lam : plan.eigenvalues()) CHECK(lam >= 1.0 - 1e-12);

  const Field five(g, 5.0);
  const Field q = plan.solve(five);
  for (double x : q.v) CHECK(x == Catch::Approx(5.0).margin(1e-10));
  const Field aq = plan.apply(five);
  for (double x : aq.v) CHECK(x == Catch::Approx(5.0).margin(1e-10));
}

TEST_CASE("symbol is nondecreasing in each frequency index", "[transform]") {
  const Grid g(5, 6, 4);
  const TransformPlan plan(g);
  const auto& lam = plan.eigenvalues();
  for (int n = 0; n < g.nt; ++n)
    for (int j = 0; j < g.nx1; ++j)
      for (int l = 0; l < g.nx2; ++l) {
        if (n + 1 < g.nt) CHECK(lam[g.idx(n, j, l)] <= lam[g.idx(n + 1, j, l)] + 1e-12);
        if (j + 1 < g.nx1) CHECK(lam[g.idx(n, j, l)] <= lam[g.idx(n, j + 1, l)] + 1e-12);
        if (l + 1 < g.nx2) CHECK(lam[g.idx(n, j, l)] <= lam[g.idx(n, j, l + 1)] + 1e-12);
      }
}

TEST_CASE("symbol matches the dense spectrum of the assembled stencil", "[transform]") {
  const Grid g(4, 4, 3);
  const TransformPlan plan(g);
  const Eigen::MatrixXd A =
      dense_operator(g, [&](Field& out, const Field& in) { plan.apply_into(out, in); });
  CHECK((A - A.transpose()).cwiseAbs().maxCoeff() < 1e-11);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A);
  std::vector<double> dense(es.eigenvalues().data(), es.eigenvalues().data() + g.size());
  std::vector<double> symbol = plan.eigenvalues();
  std::sort(dense.begin(), dense.end());
  std::sort(symbol.begin(), symbol.end());
  for (std::size_t k = 0; k < symbol.size(); ++k)
    CHECK(dense[k] == Catch::Approx(symbol[k]).margin(1e-10));
}

TEST_CASE("solve matches a dense linear solve", "[transform]") {
  auto gen = rng(101);
  const Grid g(4, 4, 3);
  const TransformPlan plan(g);
  const Eigen::MatrixXd A =
      dense_operator(g, [&](Field& out, const Field& in) { plan.apply_into(out, in); });
  const Field r = random_field(g, gen);
  const Field q = plan.solve(r);
  Eigen::VectorXd rhs(g.size());
  for (std::ptrdiff_t i = 0; i < g.size(); ++i) rhs(i) = r.v[i];
  const Eigen::VectorXd x = A.partialPivLu().solve(rhs);
  for (std::ptrdiff_t i = 0; i < g.size(); ++i)
    CHECK(q.v[i] == Catch::Approx(x(i)).margin(1e-10));
}

TEST_CASE("solve of zero is zero", "[transform]") {
  const Grid g(6, 5, 4);
  const TransformPlan plan(g);
  CHECK(linf(plan.solve(Field(g))) == 0.0);
}

TEST_CASE("round trips solve(apply) and apply(solve) are the identity", "[transform]") {
  auto gen = rng(113);
  const Grid g(16, 12, 5);
  const TransformPlan plan(g);
  const Field p = random_field(g, gen);
  const double scale = linf(p);

  const Field a = plan.apply(plan.solve(p));
  const Field b = plan.solve(plan.apply(p));
  for (std::ptrdiff_t i = 0; i < g.size(); ++i) {
    CHECK(std::abs(a.v[i] - p.v[i]) <= 1e-10 * scale);
    CHECK(std::abs(b.v[i] - p.v[i]) <= 1e-10 * scale);
  }
}

TEST_CASE("apply is symmetric and coercive", "[transform]") {
  auto gen = rng(127);
  const Grid g(7, 6, 4);
  const TransformPlan plan(g);
  const Field p = random_field(g, gen);
  const Field q = random_field(g, gen);
  CHECK(inner(plan.apply(p), q) ==
        Catch::Approx(inner(p, plan.apply(q))).margin(1e-12 * (1.0 + std::abs(inner(p, q)))));
  // lambda >= 1 means <q, Mq> >= |q|^2
  CHECK(inner(q, plan.apply(q)) >= inner(q, q) - 1e-12);
}

TEST_CASE("H-norm equals the explicit difference quadratures", "[transform]") {
  auto gen = rng(131);
  const Grid g(8, 7, 5);
  const TransformPlan plan(g);
  const Field p = random_field(g, gen);
  const double quad = inner(p, plan.apply(p));
  const Field dtp = dt_phi(p);
  const FluxField gr = grad_phi(p);
  const double expl = inner(dtp, dtp) + inner(gr, gr) + inner(p, p);
  CHECK(quad == Catch::Approx(expl).margin(1e-10 * (1.0 + std::abs(quad))));
}
