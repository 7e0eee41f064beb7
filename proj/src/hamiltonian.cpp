#include "mfg/hamiltonian.hpp"

#include "mfg/error.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <limits>
#include <random>
#include <tuple>
#include <sstream>

namespace mfg {

double CoeffExpr::operator()(Point p) const
{
  return a0 + a1 * std::cos(std::numbers::pi * p.x) + a2 * std::cos(std::numbers::pi * p.y);
}

// Bounds over all of R^2; tight on any domain containing a unit cell of the
// cosine lattice, conservative otherwise.
double CoeffExpr::max_value() const { return a0 + std::abs(a1) + std::abs(a2); }
double CoeffExpr::min_value() const { return a0 - std::abs(a1) - std::abs(a2); }

void HamiltonianModel::validate() const
{
  if (!(qprime > 1.0 && qprime < 2.0)) {
    std::ostringstream os;
    os << "hamiltonian exponent q' = " << qprime << " must lie in (1,2): the conjugate exponent q = q'/(q'-1)"
       << " must exceed the space dimension d = 2";
    throw ConfigError(os.str());
  }
  if (!(b.min_value() > 0.0)) {
    throw ConfigError("hamiltonian coefficient b must be bounded below by a positive constant");
  }
  if (!(C1 >= 1.0) || !(C2 >= 0.0)) {
    throw ConfigError("growth constants must satisfy C1 >= 1 and C2 >= 0");
  }
}

std::pair<double, double> HamiltonianModel::sufficient_constants(const CoeffExpr& b, const CoeffExpr& c)
{
  double const C1 = std::max({1.0, b.max_value(), 1.0 / b.min_value()});
  double const C2 = std::max(std::abs(c.max_value()), std::abs(c.min_value()));
  return {C1, C2};
}

HamiltonianModel make_hamiltonian(double qprime, CoeffExpr b, CoeffExpr c)
{
  HamiltonianModel m;
  m.qprime = qprime;
  m.b = b;
  m.c = c;
  std::tie(m.C1, m.C2) = HamiltonianModel::sufficient_constants(b, c);
  return m;
}

double h_value(const LocalH& h, const Vec2& xi)
{
  return h.b / h.qprime * std::pow(xi.norm(), h.qprime) + h.c;
}

double hstar_value(const LocalH& h, const Vec2& eta)
{
  return std::pow(h.b, 1.0 - h.q) * std::pow(eta.norm(), h.q) / h.q - h.c;
}

// |xi|^{q'-2} xi is extended by 0 at the origin.
Vec2 grad_h(const LocalH& h, const Vec2& xi)
{
  double const r = xi.norm();
  if (r == 0.0) { return Vec2::Zero(); }
  return h.b * std::pow(r, h.qprime - 2.0) * xi;
}

Vec2 grad_hstar(const LocalH& h, const Vec2& eta)
{
  double const r = eta.norm();
  if (r == 0.0) { return Vec2::Zero(); }
  return std::pow(h.b, 1.0 - h.q) * std::pow(r, h.q - 2.0) * eta;
}

GrowthReport validate_growth(const HamiltonianModel& model, std::size_t sample_count, double Lx, double Ly,
                             std::uint64_t seed)
{
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> ux(0.0, Lx), uy(0.0, Ly), ang(0.0, 2.0 * std::numbers::pi),
    logr(-3.0, 2.0);
  double const qp = model.qprime, q = model.q(), C1 = model.C1, C2 = model.C2;

  GrowthReport rep;
  rep.worst_slack = std::numeric_limits<double>::infinity();
  auto consider = [&](double slack, double scale, Point x, const Vec2& xi, const char* which) {
    if (slack < rep.worst_slack) {
      rep.worst_slack = slack;
      if (slack < -1e-12 * (1.0 + scale)) {
        rep.pass = false;
        rep.witness_x = x;
        rep.witness_xi = xi;
        rep.violated = which;
      }
    }
  };

  for (std::size_t k = 0; k < std::max<std::size_t>(sample_count, 1); ++k) {
    Point x{ux(rng), uy(rng)};
    double const r = k == 0 ? 1.0 : std::pow(10.0, logr(rng));
    double const th = k == 0 ? 0.0 : ang(rng);
    Vec2 const v(r * std::cos(th), r * std::sin(th));
    LocalH const h = model.at(x);

    double const H = h_value(h, v);
    double const Hlo = std::pow(v.norm(), qp) / (qp * C1) - C2;
    double const Hhi = C1 * std::pow(v.norm(), qp) / qp + C2;
    consider(H - Hlo, std::abs(H), x, v, "H lower bound");
    consider(Hhi - H, std::abs(H), x, v, "H upper bound");

    double const Hs = hstar_value(h, v);
    double const Slo = std::pow(C1, 1.0 - q) / q * std::pow(v.norm(), q) - C2;
    double const Shi = std::pow(C1, q - 1.0) / q * std::pow(v.norm(), q) + C2;
    consider(Hs - Slo, std::abs(Hs), x, v, "H* lower bound");
    consider(Shi - Hs, std::abs(Hs), x, v, "H* upper bound");
  }
  return rep;
}

} // namespace mfg
