#include "mfg/discretization.hpp"
#include "mfg/kinetic.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace mfg;

namespace {

LocalH const kUnit{1.0, 0.0, 1.5, 3.0};

}

TEST_CASE("perspective integrand values")
{
  CHECK(bq_value(kUnit, 0.0, Vec2(0, 0)) == 0.0);
  CHECK(std::isinf(bq_value(kUnit, 0.0, Vec2(1, 0))));
  CHECK(std::isinf(bq_value(kUnit, -1.0, Vec2(0, 0))));
  // m H*(-w/m) with H*(eta) = |eta|^3 / 3.
  CHECK(bq_value(kUnit, 2.0, Vec2(2, 0)) == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  // Sup formula: sup over A of alpha m + beta . w, sampled on the boundary alpha = -H(-beta).
  double sup = -1e300;
  for (int i = -400; i <= 400; ++i) {
    Vec2 const beta(i / 100.0, 0.0);
    double const alpha = -oracle::H(1, 0, 1.5, -beta.x(), 0);
    sup = std::max(sup, alpha * 2.0 + beta.dot(Vec2(2, 0)));
  }
  CHECK(std::abs(sup - 2.0 / 3.0) <= 1e-6);
}

TEST_CASE("subgradient")
{
  auto const g0 = bq_subgradient(kUnit, 1.0, Vec2(0, 0));
  REQUIRE(g0);
  CHECK(g0->alpha == 0.0);
  CHECK(g0->beta.norm() == 0.0);
  auto const g = bq_subgradient(kUnit, 2.0, Vec2(2, 0));
  REQUIRE(g);
  CHECK(g->alpha == doctest::Approx(-1.0 / 1.5));
  CHECK((g->beta - Vec2(1, 0)).norm() <= 1e-14);
  CHECK_FALSE(bq_subgradient(kUnit, 0.0, Vec2(0, 0)));
  CHECK_THROWS_AS(bq_subgradient(kUnit, 0.0, Vec2(1, 0)), std::domain_error);

  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(0.01, 3.0), v(-2, 2);
  for (int s = 0; s < 300; ++s) {
    double const m2 = u(rng);
    Vec2 const w2(v(rng), v(rng));
    double const rhs = bq_value(kUnit, 2.0, Vec2(2, 0)) + g->alpha * (m2 - 2.0) + g->beta.dot(w2 - Vec2(2, 0));
    CHECK(bq_value(kUnit, m2, w2) >= rhs - 1e-12);
  }
}

TEST_CASE("projection onto A")
{
  auto const in = project_onto_A(kUnit, -5.0, Vec2(0, 0));
  CHECK(in.alpha == -5.0);
  CHECK(in.beta.norm() == 0.0);
  auto const v = project_onto_A(kUnit, 1.0, Vec2(0, 0));
  CHECK(std::abs(v.alpha) <= 1e-12);
  CHECK(v.beta.norm() <= 1e-12);
  // Vertex check by dense search along the boundary alpha = -(2/3) t^{1.5}.
  double best = 1e300, arg = -1;
  for (int i = 0; i <= 20000; ++i) {
    double const t = i / 10000.0;
    double const d = std::pow(1.0 + 2.0 / 3.0 * std::pow(t, 1.5), 2) + t * t;
    if (d < best) {
      best = d;
      arg = t;
    }
  }
  CHECK(arg == 0.0);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> a(0.1, 3), b(-2, 2);
  for (int s = 0; s < 200; ++s) {
    double const a0 = a(rng);
    Vec2 const b0(b(rng), b(rng));
    auto const p = project_onto_A(kUnit, a0, b0);
    CHECK(std::abs(a_violation(kUnit, p)) <= 1e-10);
  }
}

TEST_CASE("prox examples and brute force")
{
  auto const z1 = prox_bq(kUnit, 1.0, -1.0, Vec2(0, 0));
  CHECK(z1.m == doctest::Approx(0.0));
  CHECK(z1.w.norm() <= 1e-14);
  auto const z2 = prox_bq(kUnit, 1.0, 1.0, Vec2(0, 0));
  CHECK(z2.m == doctest::Approx(1.0));
  auto const z3 = prox_bq(kUnit, 3.0, 0.0, Vec2(0, 0));
  CHECK(z3.m == 0.0);
  CHECK(z3.w.norm() == 0.0);

  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int s = 0; s < 10; ++s) {
    LocalH h{1.0 + 0.4 * u(rng), 0.3 * u(rng), 1.5 + 0.2 * u(rng), 0.0};
    h.q = h.qprime / (h.qprime - 1.0);
    double const sigma = 1.0 + 0.5 * u(rng);
    double const mt = 0.5 + u(rng);
    Vec2 const wt(u(rng), u(rng));
    auto J = [&](const Eigen::Vector3d& z) {
      Vec2 const w(z[1], z[2]);
      return bq_value(h, z[0], w) + ((z[0] - mt) * (z[0] - mt) + (w - wt).squaredNorm()) / (2.0 * sigma);
    };
    Eigen::Vector3d const bf =
        oracle::argmin3(J, Eigen::Vector3d(0, -4, -4), Eigen::Vector3d(5, 4, 4), Eigen::Vector3d(0, -1e9, -1e9));
    auto const z = prox_bq(h, sigma, mt, wt);
    CHECK(std::abs(z.m - bf[0]) <= 1e-4);
    CHECK(std::abs(z.w.x() - bf[1]) <= 1e-4);
    CHECK(std::abs(z.w.y() - bf[2]) <= 1e-4);
  }
}

TEST_CASE("capped prox respects the cap and reports a multiplier")
{
  auto const free = prox_bq(kUnit, 1.0, 3.0, Vec2(0.2, 0));
  REQUIRE(free.m > 1.0);
  auto const capped = prox_bq_capped(kUnit, 1.0, 3.0, Vec2(0.2, 0), 1.0);
  CHECK(capped.z.m == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(capped.multiplier > 0.0);
  // Optimality on the face m = cap by a 1-D search over w.
  double best = 1e300, arg = 0;
  for (int i = -20000; i <= 20000; ++i) {
    double const w = i / 40000.0;
    double const v = bq_value(kUnit, 1.0, Vec2(w, 0)) + (w - 0.2) * (w - 0.2) / 2.0;
    if (v < best) {
      best = v;
      arg = w;
    }
  }
  CHECK(std::abs(capped.z.w.x() - arg) <= 1e-4);
  auto const loose = prox_bq_capped(kUnit, 1.0, 3.0, Vec2(0.2, 0), 10.0);
  CHECK(loose.multiplier == 0.0);
  CHECK(loose.z.m == doctest::Approx(free.m));
}

TEST_CASE("lumped kinetic total")
{
  GridSpec g;
  g.Nx = 4;
  g.Ny = 3;
  ConstraintOperator const op(g);
  Field const m = Field::Constant(op.size(), 1.0);
  VectorField w = VectorField::Zero(op.size(), 2);
  CHECK(Bq_total(make_hamiltonian(1.5, CoeffExpr::constant(1), CoeffExpr::constant(0)), op, m, w) == 0.0);
  CHECK(Bq_total(make_hamiltonian(1.5, CoeffExpr::constant(1), CoeffExpr::constant(1)), op, m, w) ==
        doctest::Approx(-1.0));
  Field m0 = m;
  m0[3] = 0.0;
  w(3, 0) = 0.1;
  CHECK(std::isinf(Bq_total(make_hamiltonian(1.5, CoeffExpr::constant(1), CoeffExpr::constant(0)), op, m0, w)));
}
