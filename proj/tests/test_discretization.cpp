#include "mfg/discretization.hpp"
#include "mfg/error.hpp"
#include "mfg/fpcheck.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <numbers>
#include <random>

using namespace mfg;

TEST_CASE("stiffness matches quadrature assembly")
{
  GridSpec g;
  g.Nx = 5;
  g.Ny = 3;
  g.Lx = 1.5;
  g.Ly = 0.7;
  ConstraintOperator const op(g);
  Eigen::MatrixXd const ref = oracle::q1_stiffness(5, 3, 1.5, 0.7);
  CHECK((Eigen::MatrixXd(op.stiffness()) - ref).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK(op.weights().sum() == doctest::Approx(1.5 * 0.7));
  // Constants are in the kernel (natural boundary conditions).
  CHECK(op.apply_A(Field::Ones(op.size())).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("gradient is exact on bilinear functions")
{
  GridSpec g;
  g.Nx = 6;
  g.Ny = 4;
  ConstraintOperator const op(g);
  Field u(op.size());
  for (int k = 0; k < op.size(); ++k) {
    Point const p = op.node(k);
    u[k] = 2.0 * p.x - 3.0 * p.y + 0.5;
  }
  VectorField const du = op.gradient(u);
  CHECK((du.col(0).array() - 2.0).abs().maxCoeff() <= 1e-12);
  CHECK((du.col(1).array() + 3.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("B is minus the adjoint of the gradient in the lumped product")
{
  GridSpec g;
  g.Nx = 7;
  g.Ny = 5;
  ConstraintOperator const op(g);
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int s = 0; s < 10; ++s) {
    Field phi(op.size());
    VectorField w(op.size(), 2);
    for (int k = 0; k < op.size(); ++k) {
      phi[k] = u(rng);
      w(k, 0) = u(rng);
      w(k, 1) = u(rng);
    }
    VectorField const gp = op.gradient(phi);
    double rhs = 0.0;
    for (int k = 0; k < op.size(); ++k) { rhs -= op.weights()[k] * (w.row(k).dot(gp.row(k))); }
    CHECK(std::abs(op.apply_B(w).dot(phi) - rhs) <= 1e-12);
    VectorField const bt = op.apply_Bt(phi);
    CHECK(std::abs((bt.array() * w.array()).sum() - op.apply_B(w).dot(phi)) <= 1e-12);
  }
}

TEST_CASE("solve_fp_linear and the manufactured solution")
{
  GridSpec g;
  g.Nx = 8;
  g.Ny = 8;
  ConstraintOperator const op(g);
  Field const m0 = solve_fp_linear(op, VectorField::Zero(op.size(), 2));
  CHECK((m0.array() - 1.0).abs().maxCoeff() <= 1e-12);

  std::mt19937_64 rng(2);
  std::uniform_real_distribution<double> u(-1, 1);
  VectorField w(op.size(), 2);
  for (int k = 0; k < op.size(); ++k) { w.row(k) << u(rng), u(rng); }
  Field const m = solve_fp_linear(op, w);
  CHECK((op.apply_A(m) + op.apply_B(w)).norm() <= 1e-10);
  CHECK(op.integral(m) == doctest::Approx(1.0).epsilon(1e-14));

  double const e16 = manufactured_fp_error(16), e32 = manufactured_fp_error(32), e64 = manufactured_fp_error(64);
  CHECK(std::log2(e16 / e32) >= 1.9);
  CHECK(std::log2(e32 / e64) >= 1.9);
}

TEST_CASE("normal-equation solve")
{
  GridSpec g;
  g.Nx = 6;
  g.Ny = 5;
  ConstraintOperator const op(g);
  std::mt19937_64 rng(4);
  std::uniform_real_distribution<double> u(-1, 1);
  Field r(op.size());
  for (int k = 0; k < op.size(); ++k) { r[k] = u(rng); }
  r.array() -= r.mean();
  Field const y = op.solve_normal(r);
  Field const winv = op.weights().cwiseInverse();
  Field const Ay = op.apply_A(y);
  Field const lhs = op.apply_A(winv.cwiseProduct(Ay)) + op.apply_B(winv.asDiagonal() * op.apply_Bt(y));
  CHECK((lhs - r).norm() <= 1e-10 * (1.0 + r.norm()));
}

TEST_CASE("grid validation")
{
  GridSpec g;
  g.Nx = 0;
  CHECK_THROWS_AS(ConstraintOperator{g}, ConfigError);
  g.Nx = 2;
  g.Lx = -1.0;
  CHECK_THROWS_AS(ConstraintOperator{g}, ConfigError);
}
