#include "mfg/error.hpp"
#include "mfg/multipop.hpp"

#include <doctest.h>

using namespace mfg;

namespace {

OperatorPtr grid(int n)
{
  GridSpec g;
  g.Nx = n;
  g.Ny = n;
  return build_operators(g);
}

HamiltonianModel ham(double a1, double a2)
{
  return make_hamiltonian(1.5, CoeffExpr::constant(1.0), CoeffExpr{0.0, a1, a2});
}

MultiPopSpec two(std::vector<std::vector<double>> q, HamiltonianModel h1, HamiltonianModel h2)
{
  MultiPopSpec s;
  s.hamiltonians = {h1, h2};
  s.coupling.kind = CouplingKind::multipop_potential;
  s.coupling.matrix = std::move(q);
  return s;
}

} // namespace

TEST_CASE("zero coupling and constant costs: uniform after one sweep")
{
  auto const op = grid(6);
  auto const h = make_hamiltonian(1.5, CoeffExpr::constant(1), CoeffExpr::constant(0));
  auto const r = solve_best_response(two({{0, 0}, {0, 0}}, h, h), op, SolverParams{});
  CHECK(r.converged);
  for (auto const& p : r.populations) {
    CHECK((p.m.array() - 1.0).abs().maxCoeff() <= 1e-6);
    CHECK(p.residuals.pass);
  }
  REQUIRE_FALSE(r.fixed_point.history.empty());
  CHECK(r.fixed_point.history.back() <= 1e-6);
}

TEST_CASE("identical populations with a symmetric coupling stay identical")
{
  auto const op = grid(10);
  auto const h = ham(-0.5, 0.3);
  auto const r = solve_best_response(two({{1, 1}, {1, 1}}, h, h), op, SolverParams{});
  CHECK(r.converged);
  CHECK((r.populations[0].m - r.populations[1].m).cwiseAbs().maxCoeff() <= 1e-8);
  CHECK(r.populations[0].lambda == doctest::Approx(r.populations[1].lambda).epsilon(1e-8));
}

TEST_CASE("best response agrees with the potential minimiser")
{
  auto const op = grid(10);
  auto const spec = two({{1, 0.3}, {0.3, 1}}, ham(-0.5, 0.3), ham(0.4, -0.2));
  auto const br = solve_best_response(spec, op, SolverParams{});
  auto const pot = solve_potential(spec, op, SolverParams{});
  REQUIRE(br.converged);
  REQUIRE(pot.converged);
  for (int i = 0; i < 2; ++i) {
    CHECK((br.populations[i].m - pot.populations[i].m).cwiseAbs().maxCoeff() <= 1e-4);
    CHECK(pot.populations[i].residuals.pass);
  }
}

TEST_CASE("shared bound is respected and certified")
{
  auto const op = grid(10);
  auto spec = two({{1, 0}, {0, 1}}, ham(-0.5, 0.3), ham(0.4, -0.2));
  spec.kappa = Field::Constant(op->size(), 2.03);
  spec.alpha = {1.0, 1.0};
  auto const r = solve_potential(spec, op, SolverParams{});
  CHECK(r.converged);
  REQUIRE(r.p);
  CHECK(r.p->minCoeff() >= -1e-10);
  Field const load = r.populations[0].m + r.populations[1].m;
  CHECK(load.maxCoeff() <= 2.03 + 1e-7);
  CHECK(r.reference_point_strict);
  for (auto const& p : r.populations) { CHECK(p.residuals.pass); }
}

TEST_CASE("reference point has unit mass")
{
  auto const op = grid(6);
  Field k(op->size());
  for (int i = 0; i < op->size(); ++i) { k[i] = 1.0 + 0.01 * i; }
  CHECK(op->integral(reference_point(*op, k)) == doctest::Approx(1.0));
}

TEST_CASE("configuration errors")
{
  auto const op = grid(4);
  auto const h = ham(0, 0);
  MultiPopSpec one;
  one.hamiltonians = {h};
  one.coupling.kind = CouplingKind::multipop_potential;
  one.coupling.matrix = {{1}};
  CHECK_THROWS_AS(one.validate(*op), ConfigError);

  auto wrong = two({{1, 0}}, h, h);
  CHECK_THROWS_AS(wrong.validate(*op), ConfigError);

  auto nonsym = two({{1, 1}, {0, 1}}, h, h);
  CHECK_NOTHROW(nonsym.validate(*op));
  CHECK_THROWS_AS(solve_potential(nonsym, op, SolverParams{}), ConfigError);

  auto tight = two({{1, 0}, {0, 1}}, h, h);
  tight.kappa = Field::Constant(op->size(), 1.9);
  tight.alpha = {1.0, 1.0};
  CHECK_THROWS_AS(tight.validate(*op), InfeasibleKappa);
  tight.alpha = {1.0, -0.1};
  CHECK_THROWS_AS(tight.validate(*op), ConfigError);
  tight.kappa = Field::Constant(op->size(), 3.0);
  tight.alpha = {1.0, 1.0};
  CHECK_THROWS_AS(solve_best_response(tight, op, SolverParams{}), ConfigError);
}
