#include "mfg/kinetic.hpp"

#include "mfg/error.hpp"

#include <cmath>
#include <stdexcept>

namespace mfg {

double bq_value(const LocalH& h, double m, const Vec2& w)
{
  double const wn = w.norm();
  if (std::abs(m) <= kZeroDensity) { return wn == 0.0 ? 0.0 : kInf; }
  if (m < 0.0) { return kInf; }
  // m H*(-w/m) without forming w/m.
  return std::pow(h.b, 1.0 - h.q) * std::pow(wn, h.q) / (h.q * std::pow(m, h.q - 1.0)) - h.c * m;
}

std::optional<DualSample> bq_subgradient(const LocalH& h, double m, const Vec2& w)
{
  if (bq_value(h, m, w) == kInf) { throw std::domain_error("bq_subgradient: (m, w) outside the domain of b_q"); }
  if (std::abs(m) <= kZeroDensity) { return std::nullopt; }
  Vec2 const beta = -grad_hstar(h, Vec2(-w / m));
  return DualSample{-h_value(h, -beta), beta};
}

namespace {

constexpr double kProjTol = 1e-12;
constexpr int kProjMaxIter = 200;

/*
 * Exterior point (alpha0, beta0), beta0 = t0 d. The projection is
 * (-g(t) - c, t d) with g(t) = (b/q') t^{q'}, where t solves
 *
 *   psi(t) = (g(t) + s) g'(t) + t - t0 = 0,   s = alpha0 + c,
 *
 * on [t_lo, t0], t_lo = (max(0, -s) q'/b)^{1/q'}. On that bracket both
 * factors of the first term are nonnegative and increasing, so psi is
 * increasing with psi(t_lo) < 0 <= psi(t0).
 */
double solve_radius(const LocalH& h, double s, double t0)
{
  double const b = h.b, qp = h.qprime;
  auto g = [&](double t) { return b / qp * std::pow(t, qp); };
  auto dg = [&](double t) { return b * std::pow(t, qp - 1.0); };
  auto psi = [&](double t) { return (g(t) + s) * dg(t) + t - t0; };

  double lo = s < 0.0 ? std::pow(-s * qp / b, 1.0 / qp) : 0.0;
  double hi = t0;
  if (lo >= hi) { return hi; }
  double t = 0.5 * (lo + hi);
  for (int it = 0; it < kProjMaxIter; ++it) {
    double const r = psi(t);
    if (std::abs(r) <= kProjTol * (1.0 + t0)) { return t; }
    if (r > 0.0) {
      hi = t;
    } else {
      lo = t;
    }
    if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) { return t; }
    double const d = dg(t) * dg(t) + (g(t) + s) * b * (qp - 1.0) * std::pow(t, qp - 2.0) + 1.0;
    double tn = t - r / d;
    if (!(tn > lo && tn < hi) || !std::isfinite(tn)) { tn = 0.5 * (lo + hi); }
    t = tn;
  }
  throw IterationLimit("project_onto_A: safeguarded Newton did not converge");
}

} // namespace

DualSample project_onto_A(const LocalH& h, double alpha0, const Vec2& beta0)
{
  double const t0 = beta0.norm();
  double const s = alpha0 + h.c;
  if (s + h.b / h.qprime * std::pow(t0, h.qprime) <= 0.0) { return {alpha0, beta0}; }
  if (t0 == 0.0) { return {-h.c, Vec2::Zero()}; }
  double const t = solve_radius(h, s, t0);
  return {-h.b / h.qprime * std::pow(t, h.qprime) - h.c, (t / t0) * beta0};
}

KineticSample prox_bq(const LocalH& h, double sigma, double m_tilde, const Vec2& w_tilde)
{
  if (!(sigma > 0.0)) { throw std::invalid_argument("prox_bq: sigma must be positive"); }
  double const alpha0 = m_tilde / sigma;
  Vec2 const beta0 = w_tilde / sigma;
  double const t0 = beta0.norm();
  double const s = alpha0 + h.c;
  if (s + h.b / h.qprime * std::pow(t0, h.qprime) <= 0.0) { return {}; }
  if (t0 == 0.0) { return {sigma * s, Vec2::Zero()}; }

  // m = sigma (alpha0 - alpha) and w = sigma (beta0 - beta), written so that
  // m >= 0 holds in floating point.
  double const t = solve_radius(h, s, t0);
  double const m = sigma * std::max(0.0, s + h.b / h.qprime * std::pow(t, h.qprime));
  if (m <= kZeroDensity) { return {}; }
  return {m, sigma * (1.0 - t / t0) * beta0};
}

CappedProx prox_bq_capped(const LocalH& h, double sigma, double m_tilde, const Vec2& w_tilde, double cap)
{
  CappedProx out;
  out.z = prox_bq(h, sigma, m_tilde, w_tilde);
  if (out.z.m <= cap) { return out; }

  // On the face m = cap: minimise a t^q / q + (t - t0)^2 / (2 sigma) over
  // w = t w~/|w~|, a = (b cap)^{1-q}; the derivative is increasing on [0, t0].
  double const t0 = w_tilde.norm();
  double const a = std::pow(h.b * cap, 1.0 - h.q);
  double t = 0.0;
  if (t0 > 0.0) {
    auto phi = [&](double s) { return a * std::pow(s, h.q - 1.0) + (s - t0) / sigma; };
    double lo = 0.0, hi = t0;
    t = 0.5 * t0;
    int it = 0;
    for (; it < kProjMaxIter; ++it) {
      double const r = phi(t);
      if (std::abs(r) <= kProjTol * (1.0 + t0 / sigma)) { break; }
      if (r > 0.0) {
        hi = t;
      } else {
        lo = t;
      }
      if (hi - lo <= 4.0 * std::numeric_limits<double>::epsilon() * hi) { break; }
      double const d = a * (h.q - 1.0) * std::pow(t, h.q - 2.0) + 1.0 / sigma;
      double tn = t - r / d;
      if (!(tn > lo && tn < hi) || !std::isfinite(tn)) { tn = 0.5 * (lo + hi); }
      t = tn;
    }
    if (it == kProjMaxIter) { throw IterationLimit("prox_bq_capped: safeguarded Newton did not converge"); }
  }
  out.z.m = cap;
  out.z.w = t0 > 0.0 ? Vec2((t / t0) * w_tilde) : Vec2::Zero();
  // nu = (m~ - cap)/sigma - d_m b_q(cap, w), d_m b_q = -H(grad H*(-w/cap)).
  Vec2 const eta = -out.z.w / cap;
  out.multiplier = std::max(0.0, (m_tilde - cap) / sigma + h_value(h, grad_hstar(h, eta)));
  return out;
}

} // namespace mfg
