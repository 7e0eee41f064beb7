#pragma once

#include "mfg/hamiltonian.hpp"

#include <limits>
#include <optional>

namespace mfg {

class Discretization;

/// (m, w) at one point: density and momentum.
struct KineticSample
{
  double m = 0.0;
  Vec2 w = Vec2::Zero();
};

/// (alpha, beta) at one point; in A(x) iff alpha + H(x, -beta) <= 0.
struct DualSample
{
  double alpha = 0.0;
  Vec2 beta = Vec2::Zero();
};

inline constexpr double kInf = std::numeric_limits<double>::infinity();

/// Densities with |m| at or below this are treated as exactly zero.
inline constexpr double kZeroDensity = 1e-300;

/// Perspective integrand m H*(x, -w/m), 0 at the origin, +inf elsewhere.
double bq_value(const LocalH& h, double m, const Vec2& w);
inline double bq_value(const LocalH& h, const KineticSample& z) { return bq_value(h, z.m, z.w); }

/**
 * The unique subgradient (-H(x, -beta), beta), beta = -grad H*(x, -w/m), for
 * m > 0. Returns nullopt at the origin, where the subdifferential is all of
 * A(x). Throws std::domain_error when bq_value is +inf.
 */
std::optional<DualSample> bq_subgradient(const LocalH& h, double m, const Vec2& w);

/// Distance of (alpha, beta) from A(x) measured by the constraint value.
inline double a_violation(const LocalH& h, const DualSample& d) { return d.alpha + h_value(h, -d.beta); }

/// Euclidean projection onto A(x) = {alpha + (b/q')|beta|^{q'} + c <= 0}.
DualSample project_onto_A(const LocalH& h, double alpha0, const Vec2& beta0);

/// argmin b_q(m, w) + |(m, w) - (m~, w~)|^2 / (2 sigma), through the Moreau
/// identity with the projection onto A(x).
KineticSample prox_bq(const LocalH& h, double sigma, double m_tilde, const Vec2& w_tilde);

/// prox of b_q + indicator{m <= cap}; `multiplier` is the normal-cone
/// component nu >= 0 of the bound (0 when the bound is inactive).
struct CappedProx
{
  KineticSample z;
  double multiplier = 0.0;
};

CappedProx prox_bq_capped(const LocalH& h, double sigma, double m_tilde, const Vec2& w_tilde, double cap);

} // namespace mfg
