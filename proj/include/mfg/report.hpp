#pragma once

#include "mfg/coupling.hpp"
#include "mfg/discretization.hpp"
#include "mfg/hamiltonian.hpp"

#include <optional>
#include <string>
#include <vector>

namespace mfg {

/// Pass thresholds applied by certify().
struct ReportThresholds
{
  double kkt = 1e-5;
  double fp = 1e-8;
  double mass = 1e-10;
  double drift = 1e-5;
  double min_density = 1e-8;
  double complementarity = 1e-6;
  double support = 1e-5;
  double p_floor = -1e-10;
  double active_rel = 1e-6;  // node active when p_i > active_rel * |p|_inf
};

struct AprioriBound
{
  bool applicable = false;  // needs a known lower bound C_F
  double lhs = 0.0;         // |w|_q^q
  double rhs = 0.0;         // q C1^{q-1} (F(1/|Omega|) + 2 C2 - C_F) |m|_inf^{q-1}
  bool pass = false;        // lhs <= rhs
  bool strict = false;      // lhs < rhs
};

struct ResidualReport
{
  double kkt_row1 = 0.0;        // max nodal HJB residual on {m > eps_m}
  double fp_residual = 0.0;     // |Am + Bw|_2 / (1 + |Bw|_2)
  double mass_error = 0.0;      // |<omega, m> - 1|
  double drift_residual = 0.0;  // |w + m grad_xi H(grad u)|_q / (1 + |w|_q)
  double min_density = 0.0;
  double max_density = 0.0;
  double density_ratio = 0.0;   // min m / max m, informational
  double complementarity = 0.0; // sum omega p (kappa - load), 0 without constraint
  double support_violation = 0.0;
  double p_min = 0.0;
  bool constrained = false;
  AprioriBound apriori_w_bound;
  std::optional<double> duality_gap;
  bool hypotheses_verified = true;

  bool pass = false;
  std::vector<std::string> failures;
};

/**
 * Everything certify() needs besides the fields. For a population in a
 * shared-constraint system, `load` is sum_j alpha_j m_j and `p_scale` is
 * this population's alpha_i.
 */
struct ProblemContext
{
  OperatorPtr op;
  HamiltonianModel hamiltonian;
  CouplingPtr coupling;
  std::optional<Field> kappa;
  std::optional<Field> load;
  double p_scale = 1.0;
  double eps_m = 1e-12;
  ReportThresholds thresholds;
};

/// Fields of one population as produced by a solve.
struct FieldSet
{
  Field m;
  VectorField w;
  Field u;
  double lambda = 0.0;
  std::optional<Field> p;
};

ResidualReport certify(const FieldSet& fields, const ProblemContext& ctx);

/// Nodal HJB residual (A u)_i / omega_i + H(x_i, (G u)_i) + lambda - s p_i - g_i.
Field hjb_residual(const ConstraintOperator& op, const std::vector<LocalH>& h, const Field& u, double lambda,
                   const Field* p, double p_scale, const Field& g);

} // namespace mfg
