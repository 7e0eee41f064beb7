#include "mfg/solver.hpp"

#include "mfg/error.hpp"
#include "mfg/kinetic.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mfg {

void SolverParams::validate() const
{
  if (max_iters < 1) { throw ConfigError("solver.max_iters must be positive"); }
  if (tau < 0.0) { throw ConfigError("solver.tau must be nonnegative (0 selects the default)"); }
  if (!(dual_fraction > 0.0 && dual_fraction < 1.0)) { throw ConfigError("solver.dual_fraction must lie in (0,1)"); }
  if (!(relaxation > 0.0 && relaxation < 2.0)) { throw ConfigError("solver.relaxation must lie in (0,2)"); }
  if (!(damping > 0.0 && damping <= 1.0)) { throw ConfigError("solver.damping must lie in (0,1]"); }
  if (tol_pde <= 0.0 || tol_kkt <= 0.0 || tol_change <= 0.0) { throw ConfigError("solver tolerances must be positive"); }
  if (check_every < 1) { throw ConfigError("solver.check_every must be positive"); }
}

void check_kappa(const ConstraintOperator& op, const Field& kappa)
{
  if (kappa.size() != op.size()) { throw InfeasibleKappa("kappa has the wrong number of nodes"); }
  if (!(kappa.minCoeff() > 0.0)) { throw InfeasibleKappa("kappa must be strictly positive"); }
  if (!(op.integral(kappa) > 1.0)) {
    std::ostringstream os;
    os << "kappa must have integral > 1 for a unit-mass density to fit; got " << op.integral(kappa);
    throw InfeasibleKappa(os.str());
  }
}

namespace detail {

namespace {

constexpr double kDefaultTau = 1.0;

struct State
{
  std::vector<Field> m;
  std::vector<VectorField> w;
  std::vector<Field> y;
  std::vector<double> ym;
  Field p;
};

struct Residuals
{
  double pde = 0.0;
  double kkt = 0.0;
  double bound = 0.0;

  double merit(double tol_pde, double tol_kkt) const { return std::max({pde / tol_pde, kkt / tol_kkt, bound / tol_kkt}); }
};

// Running sum of iterates since the last restart.
struct Average
{
  State sum;
  int count = 0;

  void reset(const State& s)
  {
    sum = s;
    count = 1;
  }

  void add(const State& s)
  {
    for (std::size_t k = 0; k < s.m.size(); ++k) {
      sum.m[k] += s.m[k];
      sum.w[k] += s.w[k];
      sum.y[k] += s.y[k];
      sum.ym[k] += s.ym[k];
    }
    if (s.p.size() > 0) { sum.p += s.p; }
    ++count;
  }

  State mean() const
  {
    State r = sum;
    double const f = 1.0 / count;
    for (std::size_t k = 0; k < r.m.size(); ++k) {
      r.m[k] *= f;
      r.w[k] *= f;
      r.y[k] *= f;
      r.ym[k] *= f;
    }
    if (r.p.size() > 0) { r.p *= f; }
    return r;
  }
};

} // namespace

EngineOutput run_primal_dual(const OperatorPtr& opp, std::vector<PopulationProblem> pops, const JointCoupling& coupling,
                             const std::optional<SharedBound>& bound, const SolverParams& params)
{
  params.validate();
  auto const& op = *opp;
  int const N = static_cast<int>(pops.size());
  int const n = op.size();
  Field const& omega = op.weights();
  Field const winv = omega.cwiseInverse();
  double const area = op.area();
  double const q = pops.empty() ? 3.0 : pops[0].h[0].q;

  std::vector<double> alpha(N, 1.0);
  double alpha2 = 0.0;
  if (bound) {
    alpha = bound->alpha;
    for (double a : alpha) { alpha2 += a * a; }
    if (!(alpha2 > 0.0)) { throw ConfigError("shared constraint needs some positive weight"); }
  }

  State s;
  s.m.resize(N);
  s.w.resize(N);
  s.y.resize(N);
  s.ym.assign(N, 0.0);
  for (int k = 0; k < N; ++k) {
    auto const& st = pops[k].start;
    s.m[k] = st.m.size() == n ? st.m : Field::Constant(n, 1.0 / area);
    s.w[k] = st.w.rows() == n ? st.w : VectorField::Zero(n, 2);
    s.y[k] = st.y ? *st.y : Field::Zero(n);
    s.ym[k] = st.y ? st.y_mass : 0.0;
  }
  if (bound) { s.p = (pops[0].start.p && pops[0].start.p->size() == n) ? *pops[0].start.p : Field::Zero(n); }

  // One population: the bound m <= kappa / alpha_0 goes into the nodal prox
  // and p is read off as the prox multiplier. Several populations share one
  // bound, which is enforced by its own dual row.
  bool const capped = bound && N == 1;
  bool const dual_row = bound && N > 1;
  Field cap;
  if (capped) {
    if (!(alpha[0] > 0.0)) { throw ConfigError("density bound weight must be positive"); }
    cap = bound->kappa / alpha[0];
  }

  double const c_total = params.dual_fraction;
  double const c12 = dual_row ? 0.5 * c_total : c_total;
  double const c3 = dual_row ? 0.5 * c_total : 0.0;

  double L = coupling.lipschitz(s.m);
  auto step_for = [&](double lip) {
    double t = params.tau > 0.0 ? params.tau : kDefaultTau;
    if (lip > 0.0) { t = std::min(t, 0.95 * 2.0 * (1.0 - c_total) / lip); }
    return t;
  };
  double tau = step_for(L);

  auto load_of = [&](const std::vector<Field>& m) {
    Field ld = Field::Zero(n);
    for (int k = 0; k < N; ++k) { ld += alpha[k] * m[k]; }
    return ld;
  };

  // Largest eigenvalue of T^{1/2} K^T S K T^{1/2}; equals c12 (+ c3) when the
  // preconditioner is exact.
  auto measure_step = [&]() {
    std::vector<Field> zm(N);
    std::vector<VectorField> zw(N);
    for (int k = 0; k < N; ++k) {
      zm[k] = Field::Ones(n) + 0.3 * Field::LinSpaced(n, -1.0, 1.0).array().sin().matrix();
      zw[k] = VectorField::Constant(n, 2, 0.5);
      zw[k].col(1) += 0.2 * Field::LinSpaced(n, 0.0, 3.0).array().cos().matrix();
    }
    Field const sq = (tau * winv).cwiseSqrt();
    double lam = 0.0;
    for (int it = 0; it < 20; ++it) {
      double nrm = 0.0;
      for (int k = 0; k < N; ++k) { nrm += zm[k].squaredNorm() + zw[k].squaredNorm(); }
      nrm = std::sqrt(nrm);
      std::vector<Field> om(N);
      std::vector<VectorField> ow(N);
      Field ld = Field::Zero(n);
      for (int k = 0; k < N; ++k) {
        zm[k] /= nrm;
        zw[k] /= nrm;
        ld += alpha[k] * sq.cwiseProduct(zm[k]);
      }
      Field s3 = dual_row ? Field((c3 / (tau * alpha2)) * ld) : Field::Zero(n);
      for (int k = 0; k < N; ++k) {
        Field const tm = sq.cwiseProduct(zm[k]);
        VectorField tw = zw[k];
        tw.col(0) = tw.col(0).cwiseProduct(sq);
        tw.col(1) = tw.col(1).cwiseProduct(sq);
        Field const s1 = (c12 / tau) * op.solve_normal(op.apply_A(tm) + op.apply_B(tw));
        double const s2 = (c12 / tau) * omega.dot(tm) / area;
        Field km = op.apply_A(s1) + s2 * omega;
        if (dual_row) { km += alpha[k] * omega.cwiseProduct(s3); }
        VectorField kw = op.apply_Bt(s1);
        om[k] = sq.cwiseProduct(km);
        ow[k] = kw;
        ow[k].col(0) = ow[k].col(0).cwiseProduct(sq);
        ow[k].col(1) = ow[k].col(1).cwiseProduct(sq);
      }
      lam = 0.0;
      for (int k = 0; k < N; ++k) { lam += zm[k].dot(om[k]) + (zw[k].array() * ow[k].array()).sum(); }
      zm = om;
      zw = ow;
    }
    return lam;
  };

  auto residuals = [&](const State& st) {
    Residuals r;
    auto const g = coupling.derivative(st.m);
    for (int k = 0; k < N; ++k) {
      Field const Bw = op.apply_B(st.w[k]);
      r.pde = std::max(r.pde, (op.apply_A(st.m[k]) + Bw).norm() / (1.0 + Bw.norm()));
      r.pde = std::max(r.pde, std::abs(omega.dot(st.m[k]) - 1.0));
      Field const u = -st.y[k];
      Field const row = hjb_residual(op, pops[k].h, u, -st.ym[k], bound ? &st.p : nullptr, alpha[k], g[k]);
      VectorField const du = op.gradient(u);
      VectorField d(n, 2);
      for (int i = 0; i < n; ++i) {
        if (st.m[k][i] > params.eps_m) { r.kkt = std::max(r.kkt, std::abs(row[i])); }
        Vec2 const v = Vec2(st.w[k](i, 0), st.w[k](i, 1)) + st.m[k][i] * grad_h(pops[k].h[i], Vec2(du(i, 0), du(i, 1)));
        d.row(i) = v.transpose();
      }
      r.kkt = std::max(r.kkt, norms(op, d, q).Lq / (1.0 + norms(op, st.w[k], q).Lq));
    }
    if (bound) {
      Field const ld = load_of(st.m);
      double comp = 0.0, excess = 0.0;
      for (int i = 0; i < n; ++i) {
        comp += omega[i] * std::abs(st.p[i] * (bound->kappa[i] - ld[i]));
        excess = std::max(excess, ld[i] - bound->kappa[i]);
      }
      r.bound = std::max(comp, excess);
    }
    return r;
  };

  EngineOutput out;
  out.step_condition = measure_step() + 0.5 * tau * L;

  auto to_fields = [&](const State& st) {
    std::vector<FieldSet> fs;
    for (int k = 0; k < N; ++k) {
      FieldSet f;
      f.m = st.m[k];
      f.w = st.w[k];
      f.u = -st.y[k];
      f.u.array() -= op.weighted_mean(f.u);
      f.lambda = -st.ym[k];
      if (bound) { f.p = st.p; }
      fs.push_back(std::move(f));
    }
    return fs;
  };
  std::vector<std::vector<LocalH>> hs;
  for (auto const& pp : pops) { hs.push_back(pp.h); }
  std::optional<std::vector<FieldSet>> polished;
  int next_newton = 0;

  State nx = s;
  int it = 0;
  bool converged = false;
  Average avg;
  avg.reset(s);
  double merit_restart = residuals(s).merit(params.tol_pde, params.tol_kkt);
  double merit_prev = merit_restart;
  int last_restart = 0;
  for (it = 1; it <= params.max_iters; ++it) {
    auto const g = coupling.derivative(s.m);
    double const F0 = L > 0.0 ? coupling.value(s.m) : 0.0;

    int backtracks = 0;
    for (;;) {
      for (int k = 0; k < N; ++k) {
        Field const Ay = op.apply_A(s.y[k]);
        VectorField const Gy = op.gradient(s.y[k]);
        Field const& gk = g[k];
        auto const& h = pops[k].h;
        Field& mk = nx.m[k];
        VectorField& wk = nx.w[k];
#pragma omp parallel for schedule(static)
        for (int i = 0; i < n; ++i) {
          double mt = s.m[k][i] - tau * (gk[i] + Ay[i] * winv[i] + s.ym[k]);
          if (dual_row) { mt -= tau * alpha[k] * s.p[i]; }
          Vec2 const wt(s.w[k](i, 0) + tau * Gy(i, 0), s.w[k](i, 1) + tau * Gy(i, 1));
          KineticSample z;
          if (capped) {
            CappedProx const c = prox_bq_capped(h[i], tau, mt, wt, cap[i]);
            z = c.z;
            nx.p[i] = c.multiplier / alpha[0];
          } else {
            z = prox_bq(h[i], tau, mt, wt);
          }
          mk[i] = z.m;
          wk(i, 0) = z.w.x();
          wk(i, 1) = z.w.y();
        }
      }
      if (L <= 0.0 && coupling.lipschitz(nx.m) <= 0.0) { break; }
      // Descent-lemma test for the explicit coupling step.
      double lin = 0.0, sq = 0.0;
      for (int k = 0; k < N; ++k) {
        Field const dm = nx.m[k] - s.m[k];
        lin += op.dot(g[k], dm);
        sq += op.dot(dm, dm);
      }
      double const F1 = coupling.value(nx.m);
      if (F1 <= F0 + lin + 0.5 * L * sq + 1e-12 * (1.0 + std::abs(F0))) { break; }
      if (++backtracks > params.max_backtracks) {
        throw StepSizeFailure("coupling Lipschitz estimate kept failing the descent test; raise lipschitz_hint");
      }
      L = std::max(2.0 * L, 1e-8);
      tau = step_for(L);
    }

    for (int k = 0; k < N; ++k) {
      Field const mbar = 2.0 * nx.m[k] - s.m[k];
      VectorField const wbar = 2.0 * nx.w[k] - s.w[k];
      nx.y[k] = s.y[k] + (c12 / tau) * op.solve_normal(op.apply_A(mbar) + op.apply_B(wbar));
      nx.ym[k] = s.ym[k] + (c12 / tau) * (omega.dot(mbar) - 1.0) / area;
    }
    if (dual_row) {
      Field ld = Field::Zero(n);
      for (int k = 0; k < N; ++k) { ld += alpha[k] * (2.0 * nx.m[k] - s.m[k]); }
      nx.p = (s.p + (c3 / (tau * alpha2)) * (ld - bound->kappa)).cwiseMax(0.0);
    }

    double const rho = params.relaxation;
    if (rho == 1.0) {
      std::swap(s, nx);
    } else {
      for (int k = 0; k < N; ++k) {
        s.m[k] += rho * (nx.m[k] - s.m[k]);
        s.w[k] += rho * (nx.w[k] - s.w[k]);
        s.y[k] += rho * (nx.y[k] - s.y[k]);
        s.ym[k] += rho * (nx.ym[k] - s.ym[k]);
      }
      if (dual_row) { s.p += rho * (nx.p - s.p); }
      if (capped) { s.p = nx.p; }
    }

    avg.add(s);

    if (it % params.check_every == 0 || it == params.max_iters) {
      Residuals r = residuals(s);
      if (params.restart && avg.count > 1) {
        // Restart to whichever of the current and averaged iterate is better
        // once the merit has dropped enough or stopped improving.
        State const mean = avg.mean();
        Residuals const ra = residuals(mean);
        bool const use_avg = ra.merit(params.tol_pde, params.tol_kkt) < r.merit(params.tol_pde, params.tol_kkt);
        Residuals const& rc = use_avg ? ra : r;
        double const mc = rc.merit(params.tol_pde, params.tol_kkt);
        bool const sufficient = mc <= 0.2 * merit_restart;
        bool const stalled = mc <= 0.8 * merit_restart && mc > merit_prev;
        bool const long_run = it - last_restart >= std::max(params.check_every, static_cast<int>(0.36 * it));
        if (sufficient || stalled || long_run) {
          if (use_avg) {
            s = mean;
            r = ra;
          }
          avg.reset(s);
          merit_restart = mc;
          last_restart = it;
        }
        merit_prev = mc;
      }
      if (params.record_history) {
        double obj = coupling.value(s.m);
        for (int k = 0; k < N; ++k) { obj += Bq_total(pops[k].h, op, s.m[k], s.w[k]); }
        out.history.push_back({it, obj, r.pde, r.kkt});
      }
      if (r.pde <= params.tol_pde && r.kkt <= params.tol_kkt && r.bound <= params.tol_kkt) {
        converged = true;
        break;
      }
      if (params.newton && it >= next_newton && std::max({r.pde, r.kkt, r.bound}) <= params.newton_start) {
        auto fs = to_fields(s);
        auto const nt = newton_polish(op, hs, coupling, bound, fs, params.newton_tol);
        if (nt.converged) {
          polished = std::move(fs);
          converged = true;
          break;
        }
        next_newton = 2 * it;
      }
      double const Lnow = coupling.lipschitz(s.m);
      if (Lnow > L) {
        L = Lnow;
        tau = step_for(L);
      }
    }
  }

  out.iterations = std::min(it, params.max_iters);
  out.converged = converged;
  if (polished) {
    out.fields = std::move(*polished);
  } else {
    // Remove the remaining constraint violation by the lumped-metric
    // projection onto {Am + Bw = 0, <omega, m> = 1}.
    for (int k = 0; k < N; ++k) {
      Field const yk = op.solve_normal(op.apply_A(s.m[k]) + op.apply_B(s.w[k]));
      s.m[k] -= winv.cwiseProduct(op.apply_A(yk));
      s.m[k].array() -= (omega.dot(s.m[k]) - 1.0) / area;
      s.w[k] -= winv.asDiagonal() * op.apply_Bt(yk);
    }
    out.fields = to_fields(s);
  }
  std::vector<Field> ms;
  for (auto const& f : out.fields) { ms.push_back(f.m); }
  out.objective = coupling.value(ms);
  for (int k = 0; k < N; ++k) { out.objective += Bq_total(pops[k].h, op, out.fields[k].m, out.fields[k].w); }
  if (bound) { out.p = out.fields[0].p; }
  return out;
}

} // namespace detail

namespace {

SolveResult single_population(const HamiltonianModel& hamiltonian, CouplingPtr coupling, OperatorPtr op,
                              const std::optional<Field>& kappa, const SolverParams& params, const InitialGuess* init)
{
  hamiltonian.validate();
  detail::PopulationProblem pop;
  pop.h = sample_nodes(hamiltonian, *op);
  if (init) { pop.start = *init; }
  std::optional<detail::SharedBound> bound;
  if (kappa) {
    check_kappa(*op, *kappa);
    bound = detail::SharedBound{*kappa, {1.0}};
  }
  auto const joint = make_joint(coupling);
  auto eng = detail::run_primal_dual(op, {std::move(pop)}, *joint, bound, params);

  SolveResult r;
  auto& f = eng.fields[0];
  r.m = std::move(f.m);
  r.w = std::move(f.w);
  r.u = std::move(f.u);
  r.lambda = f.lambda;
  r.p = std::move(f.p);
  r.objective = eng.objective;
  r.iterations = eng.iterations;
  r.converged = eng.converged;
  r.step_condition = eng.step_condition;
  r.history = std::move(eng.history);

  ProblemContext ctx;
  ctx.op = op;
  ctx.hamiltonian = hamiltonian;
  ctx.coupling = coupling;
  ctx.kappa = kappa;
  ctx.eps_m = params.eps_m;
  r.residuals = certify(r.fields(), ctx);
  return r;
}

} // namespace

SolveResult solve_p1(const HamiltonianModel& hamiltonian, CouplingPtr coupling, OperatorPtr op,
                     const SolverParams& params, const InitialGuess* init)
{
  return single_population(hamiltonian, std::move(coupling), std::move(op), std::nullopt, params, init);
}

SolveResult solve_p2(const HamiltonianModel& hamiltonian, CouplingPtr coupling, OperatorPtr op, const Field& kappa,
                     const SolverParams& params, const InitialGuess* init)
{
  return single_population(hamiltonian, std::move(coupling), std::move(op), kappa, params, init);
}

Field forward_fp_check(const HamiltonianModel& hamiltonian, const ConstraintOperator& op, const Field& u,
                       double damping, int max_iters)
{
  auto const h = sample_nodes(hamiltonian, op);
  VectorField const du = op.gradient(u);
  VectorField drift(op.size(), 2);
  for (int k = 0; k < op.size(); ++k) {
    drift.row(k) = grad_h(h[k], Vec2(du(k, 0), du(k, 1))).transpose();
  }
  Field m = Field::Constant(op.size(), 1.0 / op.area());
  double change = 0.0;
  for (int it = 0; it < max_iters; ++it) {
    VectorField w = drift;
    w.col(0) = -m.cwiseProduct(drift.col(0));
    w.col(1) = -m.cwiseProduct(drift.col(1));
    Field const next = (1.0 - damping) * m + damping * solve_fp_linear(op, w);
    change = (next - m).cwiseAbs().maxCoeff();
    m = next;
    if (change <= 1e-13 * std::max(1.0, m.cwiseAbs().maxCoeff())) { return m; }
  }
  std::ostringstream os;
  os << "forward Fokker-Planck Picard iteration stalled; last change " << change;
  throw FixedPointStalled(os.str());
}

} // namespace mfg
