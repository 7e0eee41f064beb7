#include "mfg/multipop.hpp"

#include "mfg/error.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

namespace mfg {

void MultiPopSpec::validate(const ConstraintOperator& op) const
{
  int const n = populations();
  if (n < 2) { throw ConfigError("multipopulation problems need at least 2 populations"); }
  for (auto const& h : hamiltonians) { h.validate(); }
  if (coupling.kind != CouplingKind::multipop_potential) {
    throw ConfigError("multipopulation coupling must have kind multipop_potential");
  }
  if (static_cast<int>(coupling.matrix.size()) != n) {
    throw ConfigError("multipopulation coupling matrix must be N x N with N the number of populations");
  }
  for (auto const& row : coupling.matrix) {
    if (static_cast<int>(row.size()) != n) { throw ConfigError("multipopulation coupling matrix must be square"); }
    for (double v : row) {
      if (!std::isfinite(v)) { throw ConfigError("multipopulation coupling matrix entries must be finite"); }
    }
  }
  if (static_cast<int>(coupling.offsets.size()) > n) { throw ConfigError("more coupling offsets than populations"); }
  if (!kappa) { return; }
  if (static_cast<int>(alpha.size()) != n) { throw ConfigError("alpha needs one weight per population"); }
  double sum = 0.0;
  bool positive = false;
  for (double a : alpha) {
    if (!(a >= 0.0) || !std::isfinite(a)) { throw ConfigError("alpha weights must be finite and nonnegative"); }
    positive = positive || a > 0.0;
    sum += a;
  }
  if (!positive) { throw ConfigError("at least one alpha weight must be positive"); }
  if (kappa->size() != op.size()) { throw InfeasibleKappa("kappa has the wrong number of nodes"); }
  if (!(kappa->minCoeff() > 0.0)) { throw InfeasibleKappa("kappa must be strictly positive"); }
  double const total = op.integral(*kappa);
  if (!(sum < total)) {
    std::ostringstream os;
    os << "the alpha weights must sum to less than the integral of kappa; got " << sum << " >= " << total;
    throw InfeasibleKappa(os.str());
  }
}

Field reference_point(const ConstraintOperator& op, const Field& kappa) { return kappa / op.integral(kappa); }

namespace {

bool reference_strict(const MultiPopSpec& spec, const ConstraintOperator& op)
{
  if (!spec.kappa) { return true; }
  double sum = 0.0;
  for (double a : spec.alpha) { sum += a; }
  Field const ref = reference_point(op, *spec.kappa);
  return ((sum * ref).array() < spec.kappa->array()).all();
}

std::vector<Field> densities(const std::vector<SolveResult>& pops)
{
  std::vector<Field> ms;
  for (auto const& r : pops) { ms.push_back(r.m); }
  return ms;
}

} // namespace

MultiPopResult solve_best_response(const MultiPopSpec& spec, OperatorPtr op, const SolverParams& params)
{
  params.validate();
  spec.validate(*op);
  if (spec.kappa) { throw ConfigError("shared density constraints are solved by solve_potential"); }
  int const N = spec.populations();
  double const theta = params.damping;

  std::vector<Field> m(N, Field::Constant(op->size(), 1.0 / op->area()));
  std::vector<VectorField> w(N, VectorField::Zero(op->size(), 2));
  std::vector<InitialGuess> starts(N);
  for (int i = 0; i < N; ++i) {
    starts[i].m = m[i];
    starts[i].w = w[i];
  }

  MultiPopResult res;
  res.populations.resize(N);
  auto& fp = res.fixed_point;
  for (int outer = 0; outer < params.max_outer; ++outer) {
    // Jacobi sweep: every population answers the same frozen state.
    for (int i = 0; i < N; ++i) {
      auto const frozen = freeze_population(spec.coupling, op, m, i);
      res.populations[i] = solve_p1(spec.hamiltonians[i], frozen, op, params, &starts[i]);
    }
    double change = 0.0;
    for (int i = 0; i < N; ++i) {
      auto const& r = res.populations[i];
      change = std::max(change, (r.m - m[i]).cwiseAbs().maxCoeff());
      w[i] = theta * r.w + (1.0 - theta) * w[i];
      m[i] = solve_fp_linear(*op, w[i]);
      starts[i].m = m[i];
      starts[i].w = w[i];
      starts[i].y = Field(-r.u);
      starts[i].y_mass = -r.lambda;
    }
    fp.history.push_back(change);
    fp.outer_iterations = outer + 1;
    if (change <= params.tol_change) {
      fp.converged = true;
      break;
    }
  }

  // Certify each answer against the others' final densities.
  auto const final_m = densities(res.populations);
  res.converged = fp.converged;
  for (int i = 0; i < N; ++i) {
    auto& r = res.populations[i];
    ProblemContext ctx;
    ctx.op = op;
    ctx.hamiltonian = spec.hamiltonians[i];
    ctx.coupling = freeze_population(spec.coupling, op, final_m, i);
    ctx.eps_m = params.eps_m;
    r.residuals = certify(r.fields(), ctx);
    res.converged = res.converged && r.converged;
  }
  return res;
}

MultiPopResult solve_potential(const MultiPopSpec& spec, OperatorPtr op, const SolverParams& params)
{
  params.validate();
  spec.validate(*op);
  double const mismatch = potential_mismatch(spec.coupling, *op);
  if (mismatch > 1e-6) {
    std::ostringstream os;
    os << "coupling is not the gradient of a potential (mismatch " << mismatch << "); the matrix must be symmetric";
    throw ConfigError(os.str());
  }
  int const N = spec.populations();

  std::vector<detail::PopulationProblem> pops(N);
  for (int i = 0; i < N; ++i) { pops[i].h = sample_nodes(spec.hamiltonians[i], *op); }
  std::optional<detail::SharedBound> bound;
  if (spec.kappa) { bound = detail::SharedBound{*spec.kappa, spec.alpha}; }
  auto const joint = make_quadratic_potential(spec.coupling, op);
  auto eng = detail::run_primal_dual(op, std::move(pops), *joint, bound, params);

  MultiPopResult res;
  res.objective = eng.objective;
  res.p = eng.p;
  res.reference_point_strict = reference_strict(spec, *op);
  res.fixed_point.converged = eng.converged;
  res.fixed_point.outer_iterations = 1;
  res.converged = eng.converged;

  std::vector<Field> ms;
  for (auto const& f : eng.fields) { ms.push_back(f.m); }
  std::optional<Field> load;
  if (bound) {
    load = Field::Zero(op->size());
    for (int i = 0; i < N; ++i) { *load += spec.alpha[i] * ms[i]; }
  }
  for (int i = 0; i < N; ++i) {
    SolveResult r;
    auto& f = eng.fields[i];
    r.m = std::move(f.m);
    r.w = std::move(f.w);
    r.u = std::move(f.u);
    r.lambda = f.lambda;
    r.p = eng.p;
    r.objective = eng.objective;
    r.iterations = eng.iterations;
    r.converged = eng.converged;
    r.step_condition = eng.step_condition;
    if (i == 0) { r.history = eng.history; }

    ProblemContext ctx;
    ctx.op = op;
    ctx.hamiltonian = spec.hamiltonians[i];
    ctx.coupling = freeze_population(spec.coupling, op, ms, i);
    ctx.kappa = spec.kappa;
    ctx.load = load;
    ctx.p_scale = bound ? spec.alpha[i] : 1.0;
    ctx.eps_m = params.eps_m;
    r.residuals = certify(r.fields(), ctx);
    res.populations.push_back(std::move(r));
  }
  return res;
}

} // namespace mfg
