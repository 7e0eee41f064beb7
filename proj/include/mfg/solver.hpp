#pragma once

#include "mfg/coupling.hpp"
#include "mfg/discretization.hpp"
#include "mfg/hamiltonian.hpp"
#include "mfg/report.hpp"

#include <optional>
#include <vector>

namespace mfg {

struct SolverParams
{
  int max_iters = 20000;
  double tau = 0.0;            // primal step, 0 picks the default
  double dual_fraction = 0.9;  // share of the step condition given to the dual blocks
  double relaxation = 1.0;     // in (0, 2)
  double tol_pde = 1e-9;
  double tol_kkt = 1e-6;
  double tol_change = 1e-7;
  double eps_m = 1e-12;
  double damping = 0.5;        // best-response relaxation theta
  int max_outer = 200;
  int check_every = 10;
  bool restart = true;          // restart to the averaged iterate
  bool newton = true;           // semismooth Newton polish of the KKT system
  double newton_start = 5e-2;   // KKT residual at which the polish is first tried
  double newton_tol = 1e-11;    // scaled residual accepted by the polish
  int max_backtracks = 40;
  bool record_history = false;

  void validate() const;
};

struct IterationRecord
{
  int iteration = 0;
  double objective = 0.0;
  double pde_residual = 0.0;
  double kkt_residual = 0.0;
};

/// Optional warm start. Missing duals start at zero.
struct InitialGuess
{
  Field m;
  VectorField w;
  std::optional<Field> y;  // multiplier of Am + Bw = 0 (equals -u up to constants)
  double y_mass = 0.0;     // multiplier of the mass constraint (equals -lambda)
  std::optional<Field> p;
};

struct SolveResult
{
  Field m;
  VectorField w;
  Field u;                 // zero weighted mean
  double lambda = 0.0;
  std::optional<Field> p;  // present iff density constrained
  double objective = 0.0;
  ResidualReport residuals;
  int iterations = 0;
  bool converged = false;
  double step_condition = 0.0;  // measured |S^{1/2} K T^{1/2}|^2 + tau L / 2
  std::vector<IterationRecord> history;

  FieldSet fields() const { return {m, w, u, lambda, p}; }
};

/// Minimise B_q(m, w) + F(m) subject to Am + Bw = 0 and <omega, m> = 1.
SolveResult solve_p1(const HamiltonianModel& hamiltonian, CouplingPtr coupling, OperatorPtr op,
                     const SolverParams& params, const InitialGuess* init = nullptr);

/// As solve_p1 with the extra constraint m <= kappa; p is its multiplier.
SolveResult solve_p2(const HamiltonianModel& hamiltonian, CouplingPtr coupling, OperatorPtr op, const Field& kappa,
                     const SolverParams& params, const InitialGuess* init = nullptr);

/// Throws InfeasibleKappa unless min kappa > 0 and <omega, kappa> > 1.
void check_kappa(const ConstraintOperator& op, const Field& kappa);

/**
 * Fokker-Planck solution for the drift induced by u, by damped Picard
 * iteration on solve_fp_linear with w = -m grad_xi H(grad u).
 */
Field forward_fp_check(const HamiltonianModel& hamiltonian, const ConstraintOperator& op, const Field& u,
                       double damping = 0.5, int max_iters = 200);

// Internal driver shared with the multipopulation solver.
namespace detail {

struct PopulationProblem
{
  std::vector<LocalH> h;
  InitialGuess start;
};

struct SharedBound
{
  Field kappa;
  std::vector<double> alpha;
};

struct EngineOutput
{
  std::vector<FieldSet> fields;
  std::optional<Field> p;
  double objective = 0.0;
  int iterations = 0;
  bool converged = false;
  double step_condition = 0.0;
  std::optional<double> duality_gap;
  std::vector<IterationRecord> history;
};

struct NewtonOutcome
{
  bool converged = false;
  int iterations = 0;
  double residual = 0.0;
};

/// Newton on the discrete optimality system from the given fields; they are
/// overwritten only on success.
NewtonOutcome newton_polish(const ConstraintOperator& op, const std::vector<std::vector<LocalH>>& h,
                            const JointCoupling& coupling, const std::optional<SharedBound>& bound,
                            std::vector<FieldSet>& fields, double tol, int max_iter = 50);

EngineOutput run_primal_dual(const OperatorPtr& op, std::vector<PopulationProblem> pops, const JointCoupling& coupling,
                             const std::optional<SharedBound>& bound, const SolverParams& params);

} // namespace detail

} // namespace mfg
