#include "mfg/error.hpp"
#include "mfg/hamiltonian.hpp"
#include "oracles.hpp"

#include <doctest.h>

#include <random>

using namespace mfg;

TEST_CASE("h_value closed form")
{
  LocalH const h1{1.0, 0.0, 1.5, 3.0};
  LocalH const h2{2.0, 1.0, 1.5, 3.0};
  CHECK(h_value(h1, Vec2(0, 0)) == 0.0);
  CHECK(h_value(h1, Vec2(1, 0)) == doctest::Approx(oracle::H(1, 0, 1.5, 1, 0)).epsilon(1e-15));
  CHECK(h_value(h2, Vec2(0, 1)) == doctest::Approx(oracle::H(2, 1, 1.5, 0, 1)).epsilon(1e-15));
}

TEST_CASE("hstar_value matches a grid supremum")
{
  LocalH const h1{1.0, 0.0, 1.5, 3.0};
  LocalH const h2{2.0, 0.0, 1.5, 3.0};
  CHECK(hstar_value(h1, Vec2(0, 0)) == 0.0);
  CHECK(hstar_value(h1, Vec2(1, 0)) == doctest::Approx(oracle::conjugate_by_grid(1, 0, 1.5, 1, 0, 4)).epsilon(1e-9));
  CHECK(hstar_value(h2, Vec2(1, 0)) == doctest::Approx(oracle::conjugate_by_grid(2, 0, 1.5, 1, 0, 4)).epsilon(1e-9));

  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.5, 1.5);
  for (int s = 0; s < 30; ++s) {
    LocalH h{1.0 + 0.3 * u(rng), 0.5 * u(rng), 1.3 + 0.1 * u(rng), 0.0};
    h.q = h.qprime / (h.qprime - 1.0);
    Vec2 const eta(u(rng), u(rng));
    // window comfortably contains the maximiser, whose radius is (|eta|/b)^(1/(q'-1))
    double const R = 2.0 * std::pow(eta.norm() / h.b, 1.0 / (h.qprime - 1.0)) + 1.0;
    double const sup = oracle::conjugate_by_grid(h.b, h.c, h.qprime, eta.x(), eta.y(), R);
    CHECK(std::abs(hstar_value(h, eta) - sup) <= 1e-6 * (1.0 + std::abs(sup)));
  }
}

TEST_CASE("gradients are inverse maps")
{
  LocalH const h{1.0, 0.0, 1.5, 3.0};
  CHECK(grad_h(h, Vec2(0, 0)).norm() == 0.0);
  CHECK((grad_h(h, Vec2(4, 0)) - Vec2(2, 0)).norm() <= 1e-14);
  CHECK((grad_hstar(h, Vec2(2, 0)) - Vec2(4, 0)).norm() <= 1e-14);
  std::mt19937_64 rng(5);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int s = 0; s < 200; ++s) {
    LocalH g{1.0 + 0.3 * std::abs(u(rng)), u(rng), 1.2 + 0.2 * std::abs(u(rng)), 0.0};
    g.q = g.qprime / (g.qprime - 1.0);
    Vec2 const eta(u(rng), u(rng));
    CHECK((grad_h(g, grad_hstar(g, eta)) - eta).norm() <= 1e-9 * std::max(1.0, eta.norm()));
  }
}

TEST_CASE("model validation and growth constants")
{
  auto ok = make_hamiltonian(1.5, CoeffExpr::constant(1.0), CoeffExpr::constant(0.0));
  CHECK_NOTHROW(ok.validate());
  CHECK(ok.C1 == 1.0);
  CHECK(ok.C2 == 0.0);
  CHECK(validate_growth(ok, 200).pass);

  auto const b2c1 = make_hamiltonian(1.5, CoeffExpr::constant(2.0), CoeffExpr::constant(1.0));
  CHECK(validate_growth(b2c1, 200).pass);

  auto tight = b2c1;
  tight.C1 = 1.0;
  tight.C2 = 0.0;
  auto const rep = validate_growth(tight, 200);
  CHECK_FALSE(rep.pass);
  CHECK_FALSE(rep.violated.empty());

  auto bad = ok;
  bad.qprime = 2.5;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
  bad.qprime = 1.0;
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}
