#include "mfg/report.hpp"

#include "mfg/kinetic.hpp"

#include <algorithm>
#include <cmath>

namespace mfg {

Field hjb_residual(const ConstraintOperator& op, const std::vector<LocalH>& h, const Field& u, double lambda,
                   const Field* p, double p_scale, const Field& g)
{
  Field const Au = op.apply_A(u);
  VectorField const du = op.gradient(u);
  Field r(op.size());
  for (int k = 0; k < op.size(); ++k) {
    r[k] = Au[k] / op.weights()[k] + h_value(h[k], Vec2(du(k, 0), du(k, 1))) + lambda - g[k];
    if (p) { r[k] -= p_scale * (*p)[k]; }
  }
  return r;
}

namespace {

/*
 * Lagrangian lower bound for convex couplings, built from (u, lambda, p)
 * alone: the nodal dual point
 *
 *   alpha_i = -g_i + (A u)_i / omega_i + lambda - s p_i,  beta_i = -(G u)_i
 *
 * is shifted into A(x_i) by lowering lambda, after which
 * F(m) - <g, m> + lambda' - <omega kappa, p> bounds the optimal value.
 */
double dual_bound(const FieldSet& f, const ProblemContext& ctx, const std::vector<LocalH>& h, const Field& g)
{
  auto const& op = *ctx.op;
  Field const Au = op.apply_A(f.u);
  VectorField const du = op.gradient(f.u);
  double shift = 0.0;
  for (int k = 0; k < op.size(); ++k) {
    double alpha = -g[k] + Au[k] / op.weights()[k] + f.lambda;
    if (f.p) { alpha -= ctx.p_scale * (*f.p)[k]; }
    Vec2 const beta(-du(k, 0), -du(k, 1));
    shift = std::max(shift, alpha + h_value(h[k], -beta));
  }
  double d = ctx.coupling->value(f.m) - op.dot(g, f.m) + (f.lambda - shift);
  if (f.p && ctx.kappa) { d -= ctx.p_scale * op.dot(*ctx.kappa, *f.p); }
  return d;
}

} // namespace

ResidualReport certify(const FieldSet& f, const ProblemContext& ctx)
{
  auto const& op = *ctx.op;
  auto const& th = ctx.thresholds;
  auto const h = sample_nodes(ctx.hamiltonian, op);
  double const q = ctx.hamiltonian.q();
  ResidualReport rep;

  Field const g = ctx.coupling->derivative(f.m);
  Field const row = hjb_residual(op, h, f.u, f.lambda, f.p ? &*f.p : nullptr, ctx.p_scale, g);
  for (int k = 0; k < op.size(); ++k) {
    if (f.m[k] > ctx.eps_m) { rep.kkt_row1 = std::max(rep.kkt_row1, std::abs(row[k])); }
  }

  Field const Bw = op.apply_B(f.w);
  rep.fp_residual = (op.apply_A(f.m) + Bw).norm() / (1.0 + Bw.norm());
  rep.mass_error = std::abs(op.integral(f.m) - 1.0);

  VectorField const du = op.gradient(f.u);
  VectorField d(op.size(), 2);
  for (int k = 0; k < op.size(); ++k) {
    Vec2 const v = Vec2(f.w(k, 0), f.w(k, 1)) + f.m[k] * grad_h(h[k], Vec2(du(k, 0), du(k, 1)));
    d.row(k) = v.transpose();
  }
  rep.drift_residual = norms(op, d, q).Lq / (1.0 + norms(op, f.w, q).Lq);

  rep.min_density = f.m.minCoeff();
  rep.max_density = f.m.maxCoeff();
  rep.density_ratio = rep.max_density > 0.0 ? rep.min_density / rep.max_density : 0.0;

  rep.constrained = f.p.has_value();
  if (rep.constrained) {
    Field const& p = *f.p;
    Field const load = ctx.load ? *ctx.load : f.m;
    Field const kappa = ctx.kappa ? *ctx.kappa : Field::Constant(op.size(), kInf);
    rep.p_min = p.minCoeff();
    double const pmax = p.cwiseAbs().maxCoeff();
    for (int k = 0; k < op.size(); ++k) {
      rep.complementarity += op.weights()[k] * std::abs(p[k] * (kappa[k] - load[k]));
      if (p[k] > th.active_rel * pmax && pmax > 0.0) {
        rep.support_violation = std::max(rep.support_violation, kappa[k] - load[k]);
      }
    }
  }

  auto const CF = ctx.coupling->lower_bound();
  if (!rep.constrained && CF) {
    auto& ab = rep.apriori_w_bound;
    ab.applicable = true;
    ab.lhs = std::pow(norms(op, f.w, q).Lq, q);
    double const F1 = ctx.coupling->value(Field::Constant(op.size(), 1.0 / op.area()));
    double const C1 = ctx.hamiltonian.C1, C2 = ctx.hamiltonian.C2;
    ab.rhs = q * std::pow(C1, q - 1.0) * (F1 + 2.0 * C2 - *CF) * std::pow(f.m.cwiseAbs().maxCoeff(), q - 1.0);
    // |w| at roundoff level (1e-12) makes lhs at most about 1e-36.
    ab.pass = ab.lhs <= ab.rhs + 1e-30;
    ab.strict = ab.lhs < ab.rhs;
  }

  if (ctx.coupling->convex() && !ctx.load) {
    double const obj = Bq_total(h, op, f.m, f.w) + ctx.coupling->value(f.m);
    rep.duality_gap = obj - dual_bound(f, ctx, h, g);
  }
  rep.hypotheses_verified = ctx.coupling->hypotheses_verified();

  auto check = [&](bool ok, const char* what) {
    if (!ok) { rep.failures.emplace_back(what); }
  };
  check(rep.kkt_row1 <= th.kkt, "kkt_row1");
  check(rep.fp_residual <= th.fp, "fp_residual");
  check(rep.mass_error <= th.mass, "mass_error");
  check(rep.drift_residual <= th.drift, "drift_residual");
  check(rep.min_density >= th.min_density, "min_density");
  if (rep.constrained) {
    check(rep.p_min >= th.p_floor, "p_min");
    check(rep.complementarity <= th.complementarity, "complementarity");
    check(rep.support_violation <= th.support, "support_violation");
  }
  if (rep.apriori_w_bound.applicable) { check(rep.apriori_w_bound.pass, "apriori_w_bound"); }
  rep.pass = rep.failures.empty();
  return rep;
}

} // namespace mfg
