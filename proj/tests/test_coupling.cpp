#include "mfg/coupling.hpp"
#include "mfg/error.hpp"

#include <doctest.h>

#include <random>

using namespace mfg;

namespace {

OperatorPtr small_grid()
{
  GridSpec g;
  g.Nx = 6;
  g.Ny = 5;
  return build_operators(g);
}

Field random_field(const ConstraintOperator& op, std::mt19937_64& rng, double lo, double hi)
{
  std::uniform_real_distribution<double> u(lo, hi);
  Field f(op.size());
  for (int k = 0; k < op.size(); ++k) { f[k] = u(rng); }
  return f;
}

std::vector<CouplingSpec> specs()
{
  std::vector<CouplingSpec> out;
  CouplingSpec s;
  out.push_back(s);  // zero
  s.kind = CouplingKind::local_primitive;
  s.law.form = LocalLaw::Form::linear;
  s.law.offset = CoeffExpr{0.1, 0.2, 0.3};
  out.push_back(s);
  s.law.form = LocalLaw::Form::pow;
  s.law.r = 3.0;
  s.law.sign = -1.0;
  out.push_back(s);
  s.lipschitz_hint = 5.0;
  out.push_back(s);
  CouplingSpec d;
  d.kind = CouplingKind::gradient_dependent;
  d.law.form = LocalLaw::Form::linear;
  d.dirichlet_weight = 0.7;
  out.push_back(d);
  CouplingSpec n;
  n.kind = CouplingKind::nonlocal_convolution;
  n.kernel_radius = 0.25;
  n.kernel_shift_y = -0.1;
  n.nonlocal_weight = 1.3;
  n.nonlocal_grad_weight = 0.4;
  out.push_back(n);
  return out;
}

} // namespace

TEST_CASE("derivative is the lumped gradient of the value")
{
  auto const op = small_grid();
  std::mt19937_64 rng(11);
  for (auto const& s : specs()) {
    auto const c = make_coupling(s, op);
    for (int t = 0; t < 5; ++t) {
      Field const m = random_field(*op, rng, 0.5, 1.5), z = random_field(*op, rng, -1, 1);
      double const h = 1e-4;
      double const fd = (c->value(m + h * z) - c->value(m - h * z)) / (2 * h);
      CHECK(std::abs(fd - op->dot(c->derivative(m), z)) <= 1e-7 * (1.0 + std::abs(fd)));
    }
  }
}

TEST_CASE("jacobian matches differences of the derivative")
{
  auto const op = small_grid();
  std::mt19937_64 rng(12);
  for (auto const& s : specs()) {
    auto const c = make_coupling(s, op);
    Field const m = random_field(*op, rng, 0.5, 1.5), z = random_field(*op, rng, -1, 1);
    double const h = 1e-5;
    Field const fd = (c->derivative(m + h * z) - c->derivative(m - h * z)) / (2 * h);
    Field const jz = c->jacobian(m) * z;
    CHECK((fd - jz).cwiseAbs().maxCoeff() <= 1e-6 * (1.0 + jz.cwiseAbs().maxCoeff()));
  }
}

TEST_CASE("local law closed forms")
{
  LocalLaw l;
  l.form = LocalLaw::Form::pow;
  l.r = 2.0;
  CHECK(l.f(3.0, 1.0) == doctest::Approx(10.0));
  CHECK(l.primitive(3.0, 1.0) == doctest::Approx(9.0 + 3.0));
  CHECK(l.df(3.0) == doctest::Approx(6.0));
  CHECK(l.nondecreasing());
  l.sign = -1.0;
  CHECK_FALSE(l.nondecreasing());
}

TEST_CASE("convexity flags and lower bounds")
{
  auto const op = small_grid();
  CouplingSpec s;
  s.kind = CouplingKind::local_primitive;
  s.law.form = LocalLaw::Form::linear;
  auto const up = make_coupling(s, op);
  CHECK(up->convex());
  REQUIRE(up->lower_bound());
  CHECK(*up->lower_bound() == 0.0);
  s.law.slope = -1.0;
  CHECK_FALSE(make_coupling(s, op)->convex());

  std::mt19937_64 rng(1);
  for (int t = 0; t < 20; ++t) {
    Field const a = random_field(*op, rng, 0, 2), b = random_field(*op, rng, 0, 2);
    CHECK(up->value(0.5 * (a + b)) <= 0.5 * (up->value(a) + up->value(b)) + 1e-12);
  }
}

TEST_CASE("admissibility sampling")
{
  GridSpec g;
  g.Nx = 4;
  g.Ny = 4;
  ConstraintOperator const op(g);
  CouplingSpec s;
  s.kind = CouplingKind::local_primitive;
  s.law.form = LocalLaw::Form::pow;
  s.law.r = 2.0;
  auto const rep = check_admissibility(s, op, 2.0);
  CHECK(rep.monotone);
  CHECK(rep.min_primitive == doctest::Approx(0.0));
  CHECK(rep.max_abs_f == doctest::Approx(4.0));
  s.law.sign = -1.0;
  auto const neg = check_admissibility(s, op, 2.0);
  CHECK_FALSE(neg.monotone);
  CHECK_FALSE(neg.global_lower_bound);
}

TEST_CASE("quadratic potential and frozen populations")
{
  auto const op = small_grid();
  CouplingSpec s;
  s.kind = CouplingKind::multipop_potential;
  s.matrix = {{2.0, 0.5}, {0.5, 1.0}};
  s.offsets = {CoeffExpr{0.3, 0, 0}, CoeffExpr{0, 0.1, 0}};
  auto const joint = make_quadratic_potential(s, op);
  CHECK(joint->populations() == 2);
  CHECK(joint->convex());
  CHECK(potential_mismatch(s, *op) <= 1e-6);

  std::mt19937_64 rng(3);
  std::vector<Field> m{random_field(*op, rng, 0.5, 1.5), random_field(*op, rng, 0.5, 1.5)};
  auto const d = joint->derivative(m);
  for (int i = 0; i < 2; ++i) {
    auto const frozen = freeze_population(s, op, m, i);
    CHECK((frozen->derivative(m[i]) - d[i]).cwiseAbs().maxCoeff() <= 1e-12);
  }
  std::vector<Field> z{random_field(*op, rng, -1, 1), random_field(*op, rng, -1, 1)};
  Eigen::VectorXd zz(2 * op->size());
  zz << z[0], z[1];
  Eigen::VectorXd const jz = joint->jacobian(m) * zz;
  double const h = 1e-5;
  std::vector<Field> mp{m[0] + h * z[0], m[1] + h * z[1]}, mn{m[0] - h * z[0], m[1] - h * z[1]};
  auto const dp = joint->derivative(mp), dn = joint->derivative(mn);
  Eigen::VectorXd fd(2 * op->size());
  fd << (dp[0] - dn[0]) / (2 * h), (dp[1] - dn[1]) / (2 * h);
  CHECK((fd - jz).cwiseAbs().maxCoeff() <= 1e-7);

  s.matrix = {{1.0, 1.0}, {0.0, 1.0}};
  CHECK(potential_mismatch(s, *op) > 1e-3);
}

TEST_CASE("single-population kinds reject the multipopulation kind")
{
  auto const op = small_grid();
  CouplingSpec s;
  s.kind = CouplingKind::multipop_potential;
  CHECK_THROWS_AS(make_coupling(s, op), ConfigError);
  CHECK_THROWS_AS(coupling_kind_from_string("bogus"), ConfigError);
}
