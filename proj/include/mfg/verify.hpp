#pragma once

#include "mfg/solver.hpp"

#include <cstdint>
#include <optional>

namespace mfg {

struct UniquenessReport
{
  int trials = 0;
  double m_spread = 0.0;       // max pairwise |m - m'|_inf
  double u_spread = 0.0;       // max pairwise |u - u'|_inf, zero-mean gauge
  double lambda_spread = 0.0;  // max pairwise |lambda - lambda'|
  double threshold = 0.0;      // 10 tol_change
  bool report_only = false;    // coupling not convex: spreads are informational
  bool all_converged = true;
  bool pass = false;
};

/**
 * Re-solves from `trials` randomised starts: m = (1 + scale r) / |Omega| with
 * r uniform in [-1, 1] (renormalised to unit mass) and w = scale r' / |Omega|.
 */
UniquenessReport uniqueness_probe(const HamiltonianModel& hamiltonian, CouplingPtr coupling, OperatorPtr op,
                                  const std::optional<Field>& kappa, const SolverParams& params, int trials,
                                  std::uint64_t seed, double scale = 0.5);

} // namespace mfg
