#include "mfg/verify.hpp"

#include <algorithm>
#include <random>
#include <stdexcept>

namespace mfg {

UniquenessReport uniqueness_probe(const HamiltonianModel& hamiltonian, CouplingPtr coupling, OperatorPtr op,
                                  const std::optional<Field>& kappa, const SolverParams& params, int trials,
                                  std::uint64_t seed, double scale)
{
  if (trials < 2) { throw std::invalid_argument("uniqueness_probe needs at least 2 trials"); }
  if (!(scale >= 0.0 && scale < 1.0)) { throw std::invalid_argument("uniqueness_probe: scale must lie in [0,1)"); }
  UniquenessReport rep;
  rep.trials = trials;
  rep.threshold = 10.0 * params.tol_change;
  rep.report_only = !coupling->convex();

  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> unit(-1.0, 1.0);
  int const n = op->size();
  double const base = 1.0 / op->area();
  std::vector<SolveResult> runs;
  for (int t = 0; t < trials; ++t) {
    InitialGuess init;
    init.m.resize(n);
    init.w.resize(n, 2);
    for (int k = 0; k < n; ++k) { init.m[k] = base * (1.0 + scale * unit(rng)); }
    for (int k = 0; k < n; ++k) {
      init.w(k, 0) = base * scale * unit(rng);
      init.w(k, 1) = base * scale * unit(rng);
    }
    init.m /= op->integral(init.m);
    if (kappa) { init.m = init.m.cwiseMin(*kappa); }
    runs.push_back(kappa ? solve_p2(hamiltonian, coupling, op, *kappa, params, &init)
                         : solve_p1(hamiltonian, coupling, op, params, &init));
    rep.all_converged = rep.all_converged && runs.back().converged;
  }
  for (int a = 0; a < trials; ++a) {
    for (int b = a + 1; b < trials; ++b) {
      rep.m_spread = std::max(rep.m_spread, (runs[a].m - runs[b].m).cwiseAbs().maxCoeff());
      rep.u_spread = std::max(rep.u_spread, (runs[a].u - runs[b].u).cwiseAbs().maxCoeff());
      rep.lambda_spread = std::max(rep.lambda_spread, std::abs(runs[a].lambda - runs[b].lambda));
    }
  }
  rep.pass = !rep.report_only && rep.all_converged && rep.m_spread <= rep.threshold && rep.u_spread <= rep.threshold;
  return rep;
}

} // namespace mfg
