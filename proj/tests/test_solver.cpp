#include "mfg/error.hpp"
#include "mfg/solver.hpp"
#include "mfg/verify.hpp"

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

HamiltonianModel varying()
{
  return make_hamiltonian(1.5, CoeffExpr::constant(1.0), CoeffExpr{0.0, -0.5, 0.3});
}

CouplingPtr linear(OperatorPtr op, double slope)
{
  CouplingSpec s;
  s.kind = CouplingKind::local_primitive;
  s.law.form = LocalLaw::Form::linear;
  s.law.slope = slope;
  return make_coupling(s, op);
}

} // namespace

TEST_CASE("trivial problem returns the uniform equilibrium")
{
  auto const op = grid(8);
  auto const h = make_hamiltonian(1.5, CoeffExpr::constant(1), CoeffExpr::constant(0));
  auto const r = solve_p1(h, make_coupling(CouplingSpec{}, op), op, SolverParams{});
  CHECK(r.converged);
  CHECK((r.m.array() - 1.0).abs().maxCoeff() <= 1e-6);
  CHECK(r.w.cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(r.u.cwiseAbs().maxCoeff() <= 1e-6);
  CHECK(std::abs(r.lambda) <= 1e-6);
  CHECK(r.residuals.pass);
}

TEST_CASE("constant running cost shifts lambda only")
{
  auto const op = grid(6);
  auto const h = make_hamiltonian(1.5, CoeffExpr::constant(1), CoeffExpr::constant(0.7));
  auto const r = solve_p1(h, make_coupling(CouplingSpec{}, op), op, SolverParams{});
  CHECK(r.converged);
  // HJB row with u = 0: H(0) + lambda = 0.
  CHECK(r.lambda == doctest::Approx(-0.7).epsilon(1e-8));
}

TEST_CASE("monotone coupling: certified with and without the polish")
{
  auto const op = grid(12);
  SolverParams p;
  auto const r = solve_p1(varying(), linear(op, 1.0), op, p);
  CHECK(r.converged);
  CHECK(r.residuals.pass);
  CHECK(r.residuals.kkt_row1 <= 1e-5);
  CHECK(r.residuals.apriori_w_bound.strict);
  REQUIRE(r.residuals.duality_gap);
  CHECK(std::abs(*r.residuals.duality_gap) <= 1e-6);
  CHECK((forward_fp_check(varying(), *op, r.u) - r.m).cwiseAbs().maxCoeff() <= 1e-4);

  p.newton = false;
  p.max_iters = 40000;
  auto const q = solve_p1(varying(), linear(op, 1.0), op, p);
  CHECK(q.converged);
  CHECK(q.residuals.kkt_row1 <= 1e-5);
  CHECK((q.m - r.m).cwiseAbs().maxCoeff() <= 1e-4);
}

TEST_CASE("Newton polish from a loose primal-dual iterate")
{
  auto const op = grid(10);
  SolverParams p;
  p.newton = false;
  p.max_iters = 200;
  auto const loose = solve_p1(varying(), linear(op, 1.0), op, p);
  CHECK(loose.residuals.kkt_row1 > 1e-9);

  std::vector<FieldSet> fields{loose.fields()};
  auto const joint = make_joint(linear(op, 1.0));
  std::vector<std::vector<LocalH>> h{sample_nodes(varying(), *op)};
  auto const nt = detail::newton_polish(*op, h, *joint, std::nullopt, fields, 1e-11);
  CHECK(nt.converged);
  ProblemContext ctx;
  ctx.op = op;
  ctx.hamiltonian = varying();
  ctx.coupling = linear(op, 1.0);
  auto const rep = certify(fields[0], ctx);
  CHECK(rep.pass);
  CHECK(rep.kkt_row1 <= 1e-9);
}

TEST_CASE("density constraint: active set, complementarity, sign")
{
  auto const op = grid(12);
  Field const kappa = Field::Constant(op->size(), 1.05);
  auto const r = solve_p2(varying(), linear(op, -1.0), op, kappa, SolverParams{});
  CHECK(r.converged);
  REQUIRE(r.p);
  CHECK(r.residuals.pass);
  CHECK(r.p->minCoeff() >= -1e-10);
  CHECK(r.p->maxCoeff() > 0.0);
  CHECK(r.m.maxCoeff() <= 1.05 + 1e-8);
  double const pmax = r.p->maxCoeff();
  for (int k = 0; k < op->size(); ++k) {
    if ((*r.p)[k] > 1e-6 * pmax) { CHECK(kappa[k] - r.m[k] <= 1e-5); }
  }
}

TEST_CASE("kappa feasibility")
{
  auto const op = grid(4);
  CHECK_THROWS_AS(check_kappa(*op, Field::Constant(op->size(), 0.9)), InfeasibleKappa);
  Field k = Field::Constant(op->size(), 2.0);
  k[0] = 0.0;
  CHECK_THROWS_AS(check_kappa(*op, k), InfeasibleKappa);
  CHECK_NOTHROW(check_kappa(*op, Field::Constant(op->size(), 1.01)));
}

TEST_CASE("parameter validation")
{
  SolverParams p;
  p.relaxation = 2.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
  p = SolverParams{};
  p.damping = 0.0;
  CHECK_THROWS_AS(p.validate(), ConfigError);
}

TEST_CASE("uniqueness probe")
{
  auto const op = grid(8);
  SolverParams p;
  auto const u = uniqueness_probe(varying(), linear(op, 1.0), op, std::nullopt, p, 3, 42);
  CHECK(u.pass);
  CHECK(u.m_spread <= 1e-5);
  auto const zero = uniqueness_probe(varying(), make_coupling(CouplingSpec{}, op), op, std::nullopt, p, 2, 1);
  CHECK(zero.m_spread <= 1e-5);
  CHECK(zero.u_spread <= 1e-5);
  auto const nc =
      uniqueness_probe(varying(), linear(op, -1.0), op, Field::Constant(op->size(), 1.05), p, 2, 7);
  CHECK(nc.report_only);
  CHECK_FALSE(nc.pass);
}
