#pragma once

#include "mfg/coupling.hpp"
#include "mfg/discretization.hpp"
#include "mfg/hamiltonian.hpp"
#include "mfg/solver.hpp"

#include <optional>
#include <vector>

namespace mfg {

/**
 * N populations with Hamiltonians H^i and linear couplings
 * f^i(x, zeta) = sum_j Q_ij zeta_j + V_i(x) (coupling.kind = multipop_potential).
 * The optional shared bound is sum_i alpha_i m_i <= kappa.
 */
struct MultiPopSpec
{
  std::vector<HamiltonianModel> hamiltonians;
  CouplingSpec coupling;
  std::optional<Field> kappa;
  std::vector<double> alpha;

  int populations() const { return static_cast<int>(hamiltonians.size()); }

  /// Throws ConfigError / InfeasibleKappa on inconsistent sizes or weights.
  void validate(const ConstraintOperator& op) const;
};

struct FixedPointReport
{
  std::vector<double> history;  // max_i |m_i^new - m_i^old|_inf per outer sweep
  int outer_iterations = 0;
  bool converged = false;
};

struct MultiPopResult
{
  std::vector<SolveResult> populations;
  std::optional<Field> p;  // shared multiplier in constrained mode
  double objective = 0.0;  // joint objective (potential mode)
  bool converged = false;
  FixedPointReport fixed_point;
  bool reference_point_strict = true;  // sum alpha_i kappa/|kappa|_1 < kappa everywhere
};

/// Damped Jacobi best-response iteration; non-convergence is flagged, not thrown.
MultiPopResult solve_best_response(const MultiPopSpec& spec, OperatorPtr op, const SolverParams& params);

/// Joint minimisation for a potential game, with the optional shared bound.
MultiPopResult solve_potential(const MultiPopSpec& spec, OperatorPtr op, const SolverParams& params);

/// Reference density kappa / <omega, kappa>.
Field reference_point(const ConstraintOperator& op, const Field& kappa);

} // namespace mfg
