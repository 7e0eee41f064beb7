#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <cstdint>
#include <string>

namespace mfg {

using Vec2 = Eigen::Vector2d;

struct Point
{
  double x = 0.0;
  double y = 0.0;
};

/// Coefficient field of the form a0 + a1 cos(pi x) + a2 cos(pi y).
struct CoeffExpr
{
  double a0 = 0.0;
  double a1 = 0.0;
  double a2 = 0.0;

  static CoeffExpr constant(double v) { return {v, 0.0, 0.0}; }

  double operator()(Point p) const;
  double max_value() const;
  double min_value() const;
  bool is_constant() const { return a1 == 0.0 && a2 == 0.0; }
};

/// Hamiltonian frozen at one point x: H(xi) = (b/q')|xi|^{q'} + c.
struct LocalH
{
  double b = 1.0;
  double c = 0.0;
  double qprime = 1.5;
  double q = 3.0;
};

/**
 * Power-family Hamiltonian H(x, xi) = (b(x)/q') |xi|^{q'} + c(x) together
 * with the growth constants (C1, C2) of the two-sided bounds
 *
 *   |xi|^{q'} / (q' C1) - C2 <= H(x, xi) <= C1 |xi|^{q'} / q' + C2.
 *
 * Other Hamiltonians can be plugged in by providing the quadruple
 * (H, H*, grad H, grad H*) with the same pointwise signatures as the free
 * functions below; the kinetic prox only needs the projection onto
 * {alpha + H(-beta) <= 0}.
 */
struct HamiltonianModel
{
  double qprime = 1.5;
  CoeffExpr b = CoeffExpr::constant(1.0);
  CoeffExpr c = CoeffExpr::constant(0.0);
  double C1 = 1.0;
  double C2 = 0.0;

  double q() const { return qprime / (qprime - 1.0); }
  LocalH at(Point p) const { return {b(p), c(p), qprime, q()}; }

  /// Throws ConfigError unless q' in (1,2) (so q > d = 2) and min b > 0.
  void validate() const;

  /// Smallest constants the power family is guaranteed to satisfy.
  static std::pair<double, double> sufficient_constants(const CoeffExpr& b, const CoeffExpr& c);
};

HamiltonianModel make_hamiltonian(double qprime, CoeffExpr b, CoeffExpr c);

double h_value(const LocalH& h, const Vec2& xi);
double hstar_value(const LocalH& h, const Vec2& eta);
Vec2 grad_h(const LocalH& h, const Vec2& xi);
Vec2 grad_hstar(const LocalH& h, const Vec2& eta);

inline double h_value(const HamiltonianModel& m, Point x, const Vec2& xi) { return h_value(m.at(x), xi); }
inline double hstar_value(const HamiltonianModel& m, Point x, const Vec2& eta) { return hstar_value(m.at(x), eta); }
inline Vec2 grad_h(const HamiltonianModel& m, Point x, const Vec2& xi) { return grad_h(m.at(x), xi); }
inline Vec2 grad_hstar(const HamiltonianModel& m, Point x, const Vec2& eta) { return grad_hstar(m.at(x), eta); }

struct GrowthReport
{
  bool pass = true;
  double worst_slack = 0.0;  // min over samples of all four bound gaps
  Point witness_x;
  Vec2 witness_xi = Vec2::Zero();
  std::string violated;       // which inequality, empty when pass
};

/// Samples (x, xi) over the unit-square coefficient domain [0,Lx]x[0,Ly] and
/// checks the growth bounds of H and of H*.
GrowthReport validate_growth(const HamiltonianModel& model, std::size_t sample_count,
                             double Lx = 1.0, double Ly = 1.0, std::uint64_t seed = 7);

} // namespace mfg
